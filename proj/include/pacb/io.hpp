#pragma once

#include "pacb/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>

namespace pacb::io {

using Json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form.
std::string format_number(double x);

Json network_to_json(const net::Network& net);
net::Network network_from_json(const Json& doc);

net::Network read_network(const std::filesystem::path& path);
void write_network(const std::filesystem::path& path, const net::Network& net);

/// CSV with header label,x1,...,xn. The radius defaults to the largest input norm.
net::Dataset parse_dataset(std::istream& in, std::optional<double> radius = std::nullopt);
net::Dataset read_dataset(const std::filesystem::path& path, std::optional<double> radius = std::nullopt);
std::string dataset_to_csv(const net::Dataset& data);
void write_dataset(const std::filesystem::path& path, const net::Dataset& data);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
/// Two-space indented JSON followed by a newline.
std::string dump(const Json& doc);

}  // namespace pacb::io
