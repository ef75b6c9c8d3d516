#pragma once

#include "pacb/io.hpp"
#include "pacb/sensitivity.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pacb::cli {

/// Settings shared by certify and verify. Values come from defaults, then a
/// JSON config file, then PACB_SEED (seed only), then explicit flags.
struct Config {
  std::optional<double> gamma;
  /// γ as a fraction of the smallest training margin; used when gamma is unset.
  double gamma_from_margin = 0.5;
  double delta = 0.05;
  std::size_t mc_samples = 1000;
  std::uint64_t seed = 0;
  /// A structure name or "all"; the first network's natural structure when unset.
  std::optional<std::string> structure;
  sensitivity::ToeplitzSymbol symbol = sensitivity::ToeplitzSymbol::identity();
  sensitivity::CircGain circ_gain = sensitivity::CircGain::normalized;
  /// Low-rank anchor sample; the largest-norm input when unset.
  std::optional<std::size_t> anchor;
  std::filesystem::path out_dir = ".";
  std::optional<double> radius;
  bool run_mc = true;
  std::size_t direct_samples = 0;

  void validate() const;
};

/// Merges recognised keys of a config document into cfg; unknown keys are errors.
void apply_config(Config& cfg, const io::Json& doc);
sensitivity::ToeplitzSymbol parse_symbol(const io::Json& doc);
/// Parses PACB_SEED when set.
std::optional<std::uint64_t> seed_from_env();

int cmd_certify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_verify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace pacb::cli
