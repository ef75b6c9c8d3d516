#include "pacb/generate.hpp"

#include "pacb/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace pacb::gen {

namespace {

using linalg::Matrix;
using linalg::Rng;
using linalg::Vector;

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * normal(rng);
  }
  return m;
}

Vector gaussian_vector(Eigen::Index n, double stddev, Rng& rng) {
  return gaussian_matrix(n, 1, stddev, rng).col(0);
}

Vector unit_impulse(Eigen::Index n) {
  Vector e = Vector::Zero(n);
  e(0) = 1.0;
  return e;
}

/// Kernel w whose Fourier readout separates impulses at positions 0 and 1:
/// Qᵀ·shift^c(w) = e_c + o_c·1 for c ∈ {0, 1}, least-norm over (w, o).
Vector circulant_separator(std::size_t h, std::size_t k) {
  const Matrix q = linalg::real_fourier_basis(h, k);
  const auto n = static_cast<Eigen::Index>(h);
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix shift = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) shift((r + 1) % n, r) = 1.0;

  Matrix system = Matrix::Zero(2 * kk, n + 2);
  Vector target = Vector::Zero(2 * kk);
  Matrix power = Matrix::Identity(n, n);
  for (Eigen::Index c = 0; c < 2; ++c) {
    system.block(c * kk, 0, kk, n) = q.transpose() * power;
    system.block(c * kk, n + c, kk, 1) = -Vector::Ones(kk);
    target(c * kk + c) = 1.0;
    power = shift * power;
  }
  const Vector solution = system.completeOrthogonalDecomposition().solve(target);
  if ((system * solution - target).norm() > 1e-8) {
    throw std::invalid_argument("planted circulant net: no kernel separates the two blobs");
  }
  return solution.head(n);
}

void check_common(const NetSpec& spec) {
  if (spec.depth < 2) throw std::invalid_argument("gen: depth must be at least 2");
  if (spec.width == 0 || spec.output_dim == 0) throw std::invalid_argument("gen: empty dimensions");
  if (spec.planted && (spec.output_dim < 2 || spec.output_dim > spec.width)) {
    throw std::invalid_argument("gen: planted nets need 2 <= K <= h");
  }
}

}  // namespace

net::Network make_network(const NetSpec& spec) {
  check_common(spec);
  Rng rng(spec.seed);
  const auto h = static_cast<Eigen::Index>(spec.width);
  const auto kout = static_cast<Eigen::Index>(spec.output_dim);
  const double noise = spec.planted_noise;

  switch (spec.kind) {
    case net::LayerKind::dense:
    case net::LayerKind::residual: {
      const bool residual = spec.kind == net::LayerKind::residual;
      const auto n = residual ? h : static_cast<Eigen::Index>(spec.input_dim);
      if (spec.planted && n < 2) throw std::invalid_argument("gen: planted nets need input_dim >= 2");
      std::vector<Matrix> weights;
      for (std::size_t l = 0; l < spec.depth; ++l) {
        const Eigen::Index rows = l + 1 == spec.depth ? kout : h;
        const Eigen::Index cols = l == 0 ? n : h;
        const double fan = std::sqrt(static_cast<double>(cols));
        if (!spec.planted) {
          weights.push_back(gaussian_matrix(rows, cols, spec.scale / fan, rng));
          continue;
        }
        Matrix w = gaussian_matrix(rows, cols, noise / fan, rng);
        if (!residual || l + 1 == spec.depth) w += Matrix::Identity(rows, cols);
        weights.push_back(std::move(w));
      }
      return residual ? net::Network::residual(std::move(weights))
                      : net::Network::dense(std::move(weights));
    }
    case net::LayerKind::circulant: {
      if (spec.output_dim > spec.width) throw std::invalid_argument("gen: circulant nets need K <= h");
      const double fan = std::sqrt(static_cast<double>(h));
      std::vector<Vector> kernels;
      const Vector last = spec.planted ? circulant_separator(spec.width, spec.output_dim) : Vector();
      for (std::size_t l = 0; l < spec.depth; ++l) {
        if (!spec.planted) {
          kernels.push_back(gaussian_vector(h, spec.scale / fan, rng));
          continue;
        }
        Vector w = gaussian_vector(h, noise / fan, rng);
        w += l + 1 == spec.depth ? last : unit_impulse(h);
        kernels.push_back(std::move(w));
      }
      return net::Network::circulant(std::move(kernels), spec.output_dim);
    }
    case net::LayerKind::toeplitz: {
      if (spec.kernel == 0 || spec.kernel > spec.width) {
        throw std::invalid_argument("gen: Toeplitz kernels need 1 <= k <= h");
      }
      const auto k = static_cast<Eigen::Index>(spec.kernel);
      const double fan = std::sqrt(static_cast<double>(k));
      std::vector<Vector> kernels;
      for (std::size_t l = 0; l < spec.depth; ++l) {
        if (!spec.planted) {
          kernels.push_back(gaussian_vector(k, spec.scale / fan, rng));
          continue;
        }
        kernels.push_back(unit_impulse(k) + gaussian_vector(k, noise / fan, rng));
      }
      return net::Network::toeplitz(std::move(kernels), spec.width, spec.output_dim);
    }
  }
  throw std::invalid_argument("gen: unknown network kind");
}

net::Dataset make_blobs(const BlobSpec& spec) {
  if (spec.dim < 2) throw std::invalid_argument("gen: blobs need at least two dimensions");
  if (spec.m == 0) throw std::invalid_argument("gen: blobs need at least one sample");
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.dim);
  Matrix xs(n, static_cast<Eigen::Index>(spec.m));
  std::vector<int> labels(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i) {
    const int label = static_cast<int>(i % 2) + 1;
    labels[i] = label;
    const auto col = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < n; ++r) xs(r, col) = spec.noise * normal(rng);
    xs(label - 1, col) += spec.separation;
  }
  return net::Dataset::with_max_norm_radius(std::move(xs), std::move(labels));
}

}  // namespace pacb::gen
