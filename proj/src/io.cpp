#include "pacb/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace pacb::io {

namespace {

using linalg::Matrix;
using linalg::Vector;

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from(const Json& arr, const std::string& what) {
  if (!arr.is_array()) throw IoError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw IoError(what + " must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Matrix matrix_from(const Json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw IoError(what + " must be a non-empty array of rows");
  const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0) throw IoError(what + " rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Vector row = vector_from(rows[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw IoError(what + " rows have unequal lengths");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

double parse_double(const std::string& cell, std::size_t line) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError("dataset line " + std::to_string(line) + ": cannot parse '" + cell + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw IoError("format_number: conversion failed");
  return std::string(buf, ptr);
}

Json network_to_json(const net::Network& net) {
  Json doc;
  doc["kind"] = std::string(net::to_string(net.kind()));
  doc["input_dim"] = net.input_dim();
  doc["output_dim"] = net.output_dim();
  Json layers = Json::array();
  for (const auto& layer : net.layers()) {
    Json entry;
    if (net.is_structured()) {
      entry["kernel"] = vector_json(layer.kernel);
      entry["size"] = layer.size;
    } else {
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        rows.push_back(vector_json(layer.weight.row(r).transpose()));
      }
      entry["weight"] = std::move(rows);
    }
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

net::Network network_from_json(const Json& doc) {
  if (!doc.is_object()) throw IoError("network document must be a JSON object");
  for (const char* key : {"kind", "input_dim", "output_dim", "layers"}) {
    if (!doc.contains(key)) throw IoError(std::string("network document lacks '") + key + "'");
  }
  const net::LayerKind kind = net::parse_layer_kind(doc["kind"].get<std::string>());
  const auto input_dim = doc["input_dim"].get<std::size_t>();
  const auto output_dim = doc["output_dim"].get<std::size_t>();
  const Json& layers = doc["layers"];
  if (!layers.is_array()) throw IoError("'layers' must be an array");
  std::vector<net::Layer> parsed;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Json& entry = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (kind == net::LayerKind::dense || kind == net::LayerKind::residual) {
      if (!entry.contains("weight")) throw IoError(where + " lacks 'weight'");
      parsed.push_back(net::Layer::from_weight(matrix_from(entry["weight"], where + " weight")));
    } else {
      if (!entry.contains("kernel") || !entry.contains("size")) {
        throw IoError(where + " needs 'kernel' and 'size'");
      }
      parsed.push_back(net::Layer::from_kernel(vector_from(entry["kernel"], where + " kernel"),
                                               entry["size"].get<std::size_t>()));
    }
  }
  return net::Network(kind, std::move(parsed), input_dim, output_dim);
}

net::Network read_network(const std::filesystem::path& path) { return network_from_json(read_json(path)); }

void write_network(const std::filesystem::path& path, const net::Network& net) {
  write_text(path, dump(network_to_json(net)));
}

net::Dataset parse_dataset(std::istream& in, std::optional<double> radius) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset is empty");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "label") throw IoError("dataset header must be label,x1,...,xn");
  const std::size_t dim = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != dim + 1) {
      throw IoError("dataset line " + std::to_string(line_no) + ": expected " + std::to_string(dim + 1) +
                    " fields");
    }
    const double label = parse_double(cells[0], line_no);
    if (label != std::floor(label)) throw IoError("dataset line " + std::to_string(line_no) + ": bad label");
    labels.push_back(static_cast<int>(label));
    std::vector<double> row;
    for (std::size_t j = 1; j <= dim; ++j) row.push_back(parse_double(cells[j], line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("dataset has no samples");
  Matrix xs(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      xs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    }
  }
  if (radius) return net::Dataset(std::move(xs), std::move(labels), *radius);
  return net::Dataset::with_max_norm_radius(std::move(xs), std::move(labels));
}

net::Dataset read_dataset(const std::filesystem::path& path, std::optional<double> radius) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  return parse_dataset(in, radius);
}

std::string dataset_to_csv(const net::Dataset& data) {
  std::string out = "label";
  for (std::size_t j = 1; j <= data.input_dim(); ++j) out += ",x" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.label(i));
    const Vector x = data.input(i);
    for (Eigen::Index j = 0; j < x.size(); ++j) out += ',' + format_number(x(j));
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const net::Dataset& data) {
  write_text(path, dataset_to_csv(data));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

}  // namespace pacb::io
