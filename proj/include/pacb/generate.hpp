#pragma once

#include "pacb/network.hpp"

#include <cstddef>
#include <cstdint>

namespace pacb::gen {

struct NetSpec {
  net::LayerKind kind = net::LayerKind::dense;
  std::size_t depth = 2;
  /// Hidden width for dense nets; signal length for the other kinds.
  std::size_t width = 8;
  /// Input dimension of dense nets. Residual, circulant and Toeplitz nets
  /// take inputs of length width.
  std::size_t input_dim = 8;
  std::size_t output_dim = 2;
  /// Toeplitz kernel length.
  std::size_t kernel = 3;
  double scale = 1.0;
  std::uint64_t seed = 0;
  /// Identity-like weights that separate two blobs centred on the first two
  /// coordinates, with noise of relative size planted_noise.
  bool planted = false;
  double planted_noise = 0.02;
};

/// Random entries N(0, scale²/fan_in), or a planted separator.
net::Network make_network(const NetSpec& spec);

struct BlobSpec {
  std::size_t dim = 8;
  std::size_t m = 200;
  double separation = 4.0;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

/// Two Gaussian blobs centred at separation·e₁ (label 1) and separation·e₂
/// (label 2), labels alternating, radius set to the largest input norm.
net::Dataset make_blobs(const BlobSpec& spec);

}  // namespace pacb::gen
