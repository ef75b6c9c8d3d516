#include "pacb/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pacb::net {

namespace {

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("Network: " + message);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::residual: return "residual";
    case LayerKind::circulant: return "circulant";
    case LayerKind::toeplitz: return "toeplitz";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
  if (text == "dense") return LayerKind::dense;
  if (text == "residual") return LayerKind::residual;
  if (text == "circulant") return LayerKind::circulant;
  if (text == "toeplitz") return LayerKind::toeplitz;
  throw std::invalid_argument("unknown network kind: " + std::string(text));
}

Network::Network(LayerKind kind, std::vector<Layer> layers, std::size_t input_dim,
                 std::size_t output_dim)
    : kind_(kind), layers_(std::move(layers)), input_dim_(input_dim), output_dim_(output_dim) {
  require(layers_.size() >= 2, "depth must be at least 2");
  require(output_dim_ >= 1, "output dimension must be positive");
  const std::size_t d = layers_.size();

  switch (kind_) {
    case LayerKind::dense:
    case LayerKind::residual: {
      for (const auto& layer : layers_) {
        require(layer.weight.size() > 0, "dense layers need a weight matrix");
        require(layer.kernel.size() == 0, "dense layers cannot carry a kernel");
        require(layer.weight.allFinite(), "non-finite weight");
      }
      require(static_cast<std::size_t>(layers_.front().weight.cols()) == input_dim_,
              "first layer columns must equal input_dim");
      require(static_cast<std::size_t>(layers_.back().weight.rows()) == output_dim_,
              "last layer rows must equal output_dim");
      for (std::size_t l = 1; l < d; ++l) {
        require(layers_[l].weight.cols() == layers_[l - 1].weight.rows(),
                "layer shapes do not chain");
      }
      if (kind_ == LayerKind::residual) {
        for (std::size_t l = 0; l + 1 < d; ++l) {
          require(layers_[l].weight.rows() == layers_[l].weight.cols() &&
                      static_cast<std::size_t>(layers_[l].weight.rows()) == input_dim_,
                  "residual hidden layers must be square with the input width");
        }
      }
      break;
    }
    case LayerKind::circulant:
    case LayerKind::toeplitz: {
      const std::size_t h = layers_.front().size;
      require(h >= 1, "structured layers need a positive size");
      for (const auto& layer : layers_) {
        require(layer.weight.size() == 0, "structured layers carry kernels, not matrices");
        require(layer.size == h, "all structured layers must share one size");
        require(layer.kernel.size() > 0 && layer.kernel.allFinite(), "invalid kernel");
        if (kind_ == LayerKind::circulant) {
          require(static_cast<std::size_t>(layer.kernel.size()) == h,
                  "circulant kernels must have length h");
        } else {
          require(static_cast<std::size_t>(layer.kernel.size()) <= h,
                  "Toeplitz kernel longer than h");
        }
      }
      require(input_dim_ == h, "structured nets take inputs of length h");
      require(output_dim_ <= h, "output_dim must not exceed h");
      break;
    }
  }
  expand();
}

void Network::expand() {
  expanded_.clear();
  for (const auto& layer : layers_) {
    switch (kind_) {
      case LayerKind::dense:
      case LayerKind::residual: expanded_.push_back(layer.weight); break;
      case LayerKind::circulant: expanded_.push_back(linalg::circulant_from_kernel(layer.kernel)); break;
      case LayerKind::toeplitz:
        expanded_.push_back(linalg::toeplitz_from_kernel(layer.kernel, layer.size));
        break;
    }
  }
  if (kind_ == LayerKind::circulant) {
    readout_ = linalg::real_fourier_basis(input_dim_, output_dim_).transpose();
  } else if (kind_ == LayerKind::toeplitz) {
    readout_ = Matrix::Identity(static_cast<Eigen::Index>(output_dim_),
                                static_cast<Eigen::Index>(input_dim_));
  }
}

Network Network::dense(std::vector<Matrix> weights) {
  require(!weights.empty(), "no layers");
  const auto n = static_cast<std::size_t>(weights.front().cols());
  const auto k = static_cast<std::size_t>(weights.back().rows());
  std::vector<Layer> layers;
  for (auto& w : weights) layers.push_back(Layer::from_weight(std::move(w)));
  return Network(LayerKind::dense, std::move(layers), n, k);
}

Network Network::residual(std::vector<Matrix> weights) {
  require(!weights.empty(), "no layers");
  const auto n = static_cast<std::size_t>(weights.front().cols());
  const auto k = static_cast<std::size_t>(weights.back().rows());
  std::vector<Layer> layers;
  for (auto& w : weights) layers.push_back(Layer::from_weight(std::move(w)));
  return Network(LayerKind::residual, std::move(layers), n, k);
}

Network Network::circulant(std::vector<Vector> kernels, std::size_t output_dim) {
  require(!kernels.empty(), "no layers");
  const auto h = static_cast<std::size_t>(kernels.front().size());
  std::vector<Layer> layers;
  for (auto& k : kernels) layers.push_back(Layer::from_kernel(std::move(k), h));
  return Network(LayerKind::circulant, std::move(layers), h, output_dim);
}

Network Network::toeplitz(std::vector<Vector> kernels, std::size_t size, std::size_t output_dim) {
  std::vector<Layer> layers;
  for (auto& k : kernels) layers.push_back(Layer::from_kernel(std::move(k), size));
  return Network(LayerKind::toeplitz, std::move(layers), size, output_dim);
}

bool Network::is_structured() const {
  return kind_ == LayerKind::circulant || kind_ == LayerKind::toeplitz;
}

std::size_t Network::parameter_count(std::size_t l) const {
  const auto& layer = layers_.at(l);
  return is_structured() ? static_cast<std::size_t>(layer.kernel.size())
                         : static_cast<std::size_t>(layer.weight.size());
}

Vector Network::parameters(std::size_t l) const {
  const auto& layer = layers_.at(l);
  return is_structured() ? layer.kernel : linalg::vec(layer.weight);
}

double Network::parameter_norm2() const {
  double total = 0.0;
  for (std::size_t l = 0; l < depth(); ++l) total += parameters(l).squaredNorm();
  return total;
}

std::size_t Network::max_width() const {
  std::size_t h = 0;
  for (const auto& w : expanded_) {
    h = std::max({h, static_cast<std::size_t>(w.rows()), static_cast<std::size_t>(w.cols())});
  }
  return h;
}

std::size_t Network::kernel_length() const {
  std::size_t k = 0;
  for (const auto& layer : layers_) k = std::max(k, static_cast<std::size_t>(layer.kernel.size()));
  return k;
}

Matrix Network::forward_batch(const Matrix& xs) const {
  if (static_cast<std::size_t>(xs.rows()) != input_dim_) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  const std::size_t d = depth();
  Matrix z = xs;
  if (kind_ == LayerKind::residual) {
    for (std::size_t l = 0; l + 1 < d; ++l) z = expanded_[l] * relu(z) + z;
    return expanded_[d - 1] * relu(z);
  }
  z = expanded_[0] * z;
  for (std::size_t l = 1; l < d; ++l) z = expanded_[l] * relu(z);
  if (is_structured()) return readout_ * z;
  return z;
}

Vector Network::forward(const Vector& x) const { return forward_batch(x); }

Network Network::with_parameters(std::vector<Vector> params) const {
  if (params.size() != depth()) throw std::invalid_argument("parameter list length mismatch");
  std::vector<Layer> layers = layers_;
  for (std::size_t l = 0; l < depth(); ++l) {
    if (static_cast<std::size_t>(params[l].size()) != parameter_count(l)) {
      throw std::invalid_argument("parameter shape mismatch at layer " + std::to_string(l));
    }
    if (is_structured()) {
      layers[l].kernel = std::move(params[l]);
    } else {
      const auto& w = layers_[l].weight;
      layers[l].weight = linalg::unvec(params[l], static_cast<std::size_t>(w.rows()),
                                       static_cast<std::size_t>(w.cols()));
    }
  }
  return Network(kind_, std::move(layers), input_dim_, output_dim_);
}

Dataset::Dataset(Matrix inputs, std::vector<int> labels, double radius)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), radius_(radius) {
  if (static_cast<std::size_t>(inputs_.cols()) != labels_.size()) {
    throw std::invalid_argument("Dataset: input/label count mismatch");
  }
  if (!inputs_.allFinite()) throw std::invalid_argument("Dataset: non-finite input");
  for (int y : labels_) {
    if (y < 1) throw std::invalid_argument("Dataset: labels must be in 1..K");
  }
  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < inputs_.cols(); ++i) {
    max_norm = std::max(max_norm, inputs_.col(i).norm());
  }
  if (!(radius_ >= 0.0) || max_norm > radius_ * (1.0 + 1e-12)) {
    throw std::invalid_argument("Dataset: radius smaller than the largest input norm");
  }
}

Dataset Dataset::with_max_norm_radius(Matrix inputs, std::vector<int> labels) {
  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) max_norm = std::max(max_norm, inputs.col(i).norm());
  return Dataset(std::move(inputs), std::move(labels), max_norm);
}

std::size_t Dataset::max_norm_index() const {
  std::size_t best = 0;
  double best_norm = -1.0;
  for (Eigen::Index i = 0; i < inputs_.cols(); ++i) {
    const double n = inputs_.col(i).norm();
    if (n > best_norm) {
      best_norm = n;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

double margin(const Vector& logits, int label) {
  if (logits.size() < 2) throw std::invalid_argument("margin: need at least two classes");
  if (label < 1 || label > logits.size()) throw std::invalid_argument("margin: label out of range");
  const auto y = static_cast<Eigen::Index>(label - 1);
  double rival = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (j != y) rival = std::max(rival, logits(j));
  }
  return logits(y) - rival;
}

std::vector<double> margins(const Network& net, const Dataset& data) {
  const Matrix out = net.forward_batch(data.inputs());
  std::vector<double> result(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    result[i] = margin(out.col(static_cast<Eigen::Index>(i)), data.label(i));
  }
  return result;
}

double min_margin(const Network& net, const Dataset& data) {
  const auto m = margins(net, data);
  if (m.empty()) throw std::invalid_argument("min_margin: empty dataset");
  return *std::min_element(m.begin(), m.end());
}

double empirical_margin_loss(const Network& net, const Dataset& data, double gamma) {
  if (data.size() == 0) throw std::invalid_argument("empirical_margin_loss: empty dataset");
  if (!(gamma >= 0.0)) throw std::invalid_argument("empirical_margin_loss: gamma must be >= 0");
  const auto m = margins(net, data);
  const auto hits = std::count_if(m.begin(), m.end(), [&](double v) { return v <= gamma; });
  return static_cast<double>(hits) / static_cast<double>(m.size());
}

Network perturb(const Network& net, const Perturbation& u) {
  if (u.size() != net.depth()) throw std::invalid_argument("perturb: layer count mismatch");
  std::vector<Vector> params;
  params.reserve(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    if (static_cast<std::size_t>(u[l].size()) != net.parameter_count(l)) {
      throw std::invalid_argument("perturb: shape mismatch at layer " + std::to_string(l));
    }
    params.push_back(net.parameters(l) + u[l]);
  }
  return net.with_parameters(std::move(params));
}

Matrix layer_jacobian(const Network& net, const Vector& x, std::size_t l) {
  if (net.kind() != LayerKind::dense) {
    throw std::invalid_argument("layer_jacobian: only dense networks are supported");
  }
  const std::size_t d = net.depth();
  if (l >= d) throw std::out_of_range("layer_jacobian: layer index out of range");
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw std::invalid_argument("layer_jacobian: input dimension mismatch");
  }

  std::vector<Vector> inputs(d);
  std::vector<Vector> pre(d);
  Vector a = x;
  for (std::size_t i = 0; i < d; ++i) {
    inputs[i] = a;
    pre[i] = net.weight(i) * a;
    a = pre[i].cwiseMax(0.0);
  }

  Matrix g = Matrix::Identity(static_cast<Eigen::Index>(net.output_dim()),
                              static_cast<Eigen::Index>(net.output_dim()));
  for (std::size_t i = d - 1; i > l; --i) {
    g = g * net.weight(i);
    const Vector mask = (pre[i - 1].array() > 0.0).cast<double>();
    g = g * mask.asDiagonal();
  }

  const Vector& in = inputs[l];
  const auto rows = net.weight(l).rows();
  const auto cols = net.weight(l).cols();
  Matrix j(g.rows(), rows * cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    j.middleCols(r * cols, cols) = g.col(r) * in.transpose();
  }
  return j;
}

double layer_spectral_norm(const Network& net, std::size_t l) {
  if (net.kind() == LayerKind::circulant) {
    return linalg::dft(net.layer(l).kernel).cwiseAbs().maxCoeff();
  }
  return linalg::spectral_norm(net.weight(l));
}

std::vector<double> layer_spectral_norms(const Network& net) {
  std::vector<double> out;
  for (std::size_t l = 0; l < net.depth(); ++l) out.push_back(layer_spectral_norm(net, l));
  return out;
}

NormalizedNetwork spectral_normalize(const Network& net) {
  const auto norms = layer_spectral_norms(net);
  double log_sum = 0.0;
  bool any_zero = false;
  for (double n : norms) {
    if (n == 0.0) any_zero = true;
    else log_sum += std::log(n);
  }
  if (any_zero) return {net, 0.0, false};
  const double beta = std::exp(log_sum / static_cast<double>(net.depth()));
  if (net.kind() == LayerKind::residual) return {net, beta, false};

  std::vector<Vector> params;
  for (std::size_t l = 0; l < net.depth(); ++l) params.push_back(net.parameters(l) * (beta / norms[l]));
  return {net.with_parameters(std::move(params)), beta, true};
}

}  // namespace pacb::net
