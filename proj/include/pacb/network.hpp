#pragma once

#include "pacb/linalg.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace pacb::net {

using linalg::Matrix;
using linalg::Vector;

enum class LayerKind { dense, residual, circulant, toeplitz };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

/// One layer's parameters. Dense and residual layers carry a weight matrix;
/// circulant and Toeplitz layers carry a kernel and their square size h.
struct Layer {
  Matrix weight;
  Vector kernel;
  std::size_t size = 0;

  static Layer from_weight(Matrix w) { return Layer{std::move(w), Vector(), 0}; }
  static Layer from_kernel(Vector k, std::size_t h) { return Layer{Matrix(), std::move(k), h}; }
};

/// Per-layer perturbation in each layer's own parameterization.
using Perturbation = std::vector<Vector>;

/**
 * Homogeneous ReLU network without biases.
 *
 * Dense: f = W_d φ(… φ(W_1 x)). Residual: z ← W_l φ(z) + z for every layer but
 * the last, whose output is W_d φ(z). Circulant and Toeplitz nets act on
 * length-h signals through expanded h×h layers; their K outputs are read out
 * from the last layer through a fixed orthonormal map: the real Fourier basis
 * of fourier_modes(h, K) for circulant nets, the first K coordinates for
 * Toeplitz nets.
 */
class Network {
 public:
  Network(LayerKind kind, std::vector<Layer> layers, std::size_t input_dim,
          std::size_t output_dim);

  static Network dense(std::vector<Matrix> weights);
  static Network residual(std::vector<Matrix> weights);
  static Network circulant(std::vector<Vector> kernels, std::size_t output_dim);
  static Network toeplitz(std::vector<Vector> kernels, std::size_t size, std::size_t output_dim);

  LayerKind kind() const { return kind_; }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }

  /// Expanded weight matrix of layer l.
  const Matrix& weight(std::size_t l) const { return expanded_.at(l); }
  /// K×h readout for structured nets; empty for dense and residual nets.
  const Matrix& readout() const { return readout_; }

  bool is_structured() const;
  std::size_t parameter_count(std::size_t l) const;
  Vector parameters(std::size_t l) const;
  double parameter_norm2() const;
  /// Largest row or column count over the expanded layers.
  std::size_t max_width() const;
  /// Longest kernel (structured nets) or zero.
  std::size_t kernel_length() const;

  Vector forward(const Vector& x) const;
  /// Forward pass over the columns of xs.
  Matrix forward_batch(const Matrix& xs) const;

  Network with_parameters(std::vector<Vector> params) const;

 private:
  void expand();

  LayerKind kind_;
  std::vector<Layer> layers_;
  std::size_t input_dim_;
  std::size_t output_dim_;
  std::vector<Matrix> expanded_;
  Matrix readout_;
};

/// Labeled inputs stored as columns, labels in 1..K.
class Dataset {
 public:
  Dataset(Matrix inputs, std::vector<int> labels, double radius);
  static Dataset with_max_norm_radius(Matrix inputs, std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs_.rows()); }
  const Matrix& inputs() const { return inputs_; }
  Vector input(std::size_t i) const { return inputs_.col(static_cast<Eigen::Index>(i)); }
  const std::vector<int>& labels() const { return labels_; }
  int label(std::size_t i) const { return labels_.at(i); }
  double radius() const { return radius_; }
  std::size_t max_norm_index() const;

 private:
  Matrix inputs_;
  std::vector<int> labels_;
  double radius_;
};

/// f[y] - max_{j≠y} f[j] for a 1-based label y.
double margin(const Vector& logits, int label);
std::vector<double> margins(const Network& net, const Dataset& data);
double min_margin(const Network& net, const Dataset& data);
/// Fraction of samples whose margin is at most gamma.
double empirical_margin_loss(const Network& net, const Dataset& data, double gamma);

Network perturb(const Network& net, const Perturbation& u);

/// ∂f/∂vec(W_l) at x for dense nets (K × rows·cols, row-major vec).
Matrix layer_jacobian(const Network& net, const Vector& x, std::size_t l);

/// Spectral norm of the expanded layer l (exact DFT formula for circulant layers).
double layer_spectral_norm(const Network& net, std::size_t l);
std::vector<double> layer_spectral_norms(const Network& net);

struct NormalizedNetwork {
  Network network;
  double beta = 0.0;
  bool rescaled = false;
};

/// Rescales every layer to share β = (∏‖W_l‖₂)^{1/d}. Residual nets are not
/// positively homogeneous and are returned unchanged.
NormalizedNetwork spectral_normalize(const Network& net);

}  // namespace pacb::net
