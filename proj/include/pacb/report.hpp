#pragma once

#include "pacb/bounds.hpp"
#include "pacb/io.hpp"
#include "pacb/verify.hpp"

#include <string>
#include <vector>

namespace pacb::report {

io::Json mc_to_json(const verify::McResult& r);
io::Json report_to_json(const bounds::BoundReport& r);
std::string report_to_markdown(const bounds::BoundReport& r);
/// One row per report plus the asymptotic Δ-factor table.
std::string comparison_markdown(const std::vector<bounds::BoundReport>& reports);

}  // namespace pacb::report
