#pragma once

// Independent reference implementations used as test oracles. They work on
// plain std::vector storage and avoid the library's own routines.

#include "pacb/linalg.hpp"
#include "pacb/network.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const Eigen::MatrixXd& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  }
  return g;
}

inline std::vector<double> matvec(const Grid& a, const std::vector<double>& x) {
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < x.size(); ++c) y[r] += a[r][c] * x[c];
  }
  return y;
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Grid a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

/// Largest singular value from the Jacobi eigenvalues of MᵀM.
inline double spectral_norm(const Eigen::MatrixXd& m) {
  const Grid g = to_grid(m);
  const std::size_t cols = g.empty() ? 0 : g[0].size();
  Grid gram(cols, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < cols; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t r = 0; r < g.size(); ++r) gram[i][j] += g[r][i] * g[r][j];
    }
  }
  return std::sqrt(std::max(0.0, jacobi_eigenvalues(gram).back()));
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) { return jacobi_eigenvalues(to_grid(sym)).front(); }

/// Unnormalized DFT by direct summation.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t h = x.size();
  std::vector<std::complex<double>> out(h);
  for (std::size_t k = 0; k < h; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(h);
      acc += x[j] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

/// Circular convolution (circ(w)·x)[r] = Σ_c w[(r − c) mod h]·x[c].
inline std::vector<double> circular_apply(const std::vector<double>& w, const std::vector<double>& x) {
  const std::size_t h = w.size();
  std::vector<double> y(h, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < h; ++c) y[r] += w[(r + h - c) % h] * x[c];
  }
  return y;
}

/// Banded Toeplitz product: (T·x)[i] = Σ_{0 ≤ j−i < k} w[j − i]·x[j].
inline std::vector<double> banded_apply(const std::vector<double>& w, const std::vector<double>& x) {
  const std::size_t h = x.size();
  std::vector<double> y(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t q = 0; q < w.size() && i + q < h; ++q) y[i] += w[q] * x[i + q];
  }
  return y;
}

inline std::vector<double> relu(std::vector<double> v) {
  for (double& x : v) x = std::max(0.0, x);
  return v;
}

inline std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Straight-line forward pass from the stored layer parameters.
inline std::vector<double> forward(const pacb::net::Network& net, const Eigen::VectorXd& x_in) {
  using pacb::net::LayerKind;
  std::vector<double> z = as_std(x_in);
  const std::size_t d = net.depth();
  for (std::size_t l = 0; l < d; ++l) {
    const auto& layer = net.layer(l);
    const bool raw_input = l == 0 && net.kind() != LayerKind::residual;
    const std::vector<double> a = raw_input ? z : relu(z);
    std::vector<double> next;
    switch (net.kind()) {
      case LayerKind::dense:
      case LayerKind::residual: next = matvec(to_grid(layer.weight), a); break;
      case LayerKind::circulant: next = circular_apply(as_std(layer.kernel), a); break;
      case LayerKind::toeplitz: next = banded_apply(as_std(layer.kernel), a); break;
    }
    if (net.kind() == LayerKind::residual && l + 1 < d) {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += z[i];
    }
    z = std::move(next);
  }
  if (net.is_structured()) z = matvec(to_grid(net.readout()), z);
  return z;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_pd(std::size_t n, std::mt19937_64& rng, double lo = 0.1, double hi = 2.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(lo, hi);
  Eigen::MatrixXd g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd e(n);
  for (std::size_t i = 0; i < n; ++i) e(i) = uni(rng);
  return q * e.asDiagonal() * q.transpose();
}

inline Eigen::MatrixXd random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                     double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline Eigen::VectorXd random_vector(std::size_t n, std::mt19937_64& rng, double stddev = 1.0) {
  return random_matrix(n, 1, rng, stddev).col(0);
}

}  // namespace oracle
