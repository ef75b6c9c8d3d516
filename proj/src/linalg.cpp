#include "pacb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace pacb::linalg {

namespace {

constexpr std::uint64_t kRestartSeed = 0x9e3779b97f4a7c15ULL;

struct PowerRun {
  double value = 0.0;
  int iterations = 0;
  bool collapsed = false;
  bool converged = false;
  Vector vector;
};

/// Power iteration on a symmetric PSD matrix b; value is the Rayleigh quotient.
/// Stops once the eigen-residual ‖bv − λv‖ falls below tol·λ.
PowerRun power_run(const Matrix& b, Vector v, double tol, int max_iter) {
  v.normalize();
  PowerRun run;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector w = b * v;
    const double current = v.dot(w);
    const double norm = w.norm();
    run.iterations = it;
    if (norm == 0.0 || !std::isfinite(norm)) {
      run.collapsed = true;
      run.converged = true;
      run.vector = v;
      return run;
    }
    const double residual = (w - current * v).norm();
    v = w / norm;
    run.value = std::max(current, 0.0);
    if (it > 1 && residual <= tol * current) {
      run.converged = true;
      break;
    }
  }
  run.vector = v;
  return run;
}

/// Largest eigenvalue of the PSD matrix b: all-ones start, fixed-seed random
/// restart when that start collapses or stalls within two steps.
PowerRun top_eigen(const Matrix& b, double tol, int max_iter) {
  const auto n = b.cols();
  PowerRun first = power_run(b, Vector::Ones(n), tol, max_iter);
  if (first.converged && !first.collapsed && first.iterations > 2) return first;
  Rng rng(kRestartSeed);
  PowerRun second = power_run(b, standard_normal(static_cast<std::size_t>(n), rng), tol, max_iter);
  if (first.collapsed || !first.converged) return second;
  if (!second.converged) return first;
  return second.value > first.value ? second : first;
}

}  // namespace

double spectral_norm(const Matrix& m, double tol, int max_iter) {
  if (m.size() == 0) throw std::invalid_argument("spectral_norm: empty matrix");
  if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
  if (!m.allFinite()) throw std::invalid_argument("spectral_norm: non-finite entries");
  if (max_iter <= 0) max_iter = 10 * static_cast<int>(std::max(m.rows(), m.cols())) + 200;
  if (m.isZero(0.0)) return 0.0;

  const Matrix gram = m.rows() < m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  PowerRun run = top_eigen(gram, tol, max_iter);
  if (run.converged) return std::sqrt(run.value);

  // Budget exhausted: iterate on gram^(2^s) and evaluate the Rayleigh
  // quotient of gram at the converged vector.
  Matrix power = gram;
  double last = run.value;
  for (int s = 1; s <= 40; ++s) {
    power = power * power;
    const double scale = power.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !std::isfinite(scale)) break;
    power /= scale;
    power = 0.5 * (power + power.transpose());
    run = top_eigen(power, tol, max_iter);
    const Vector v = run.vector.normalized();
    last = std::max(v.dot(gram * v), 0.0);
    if (run.converged) return std::sqrt(last);
  }
  throw ConvergenceError("spectral_norm: power iteration did not converge", std::sqrt(last));
}

double frobenius(const Matrix& m) { return m.norm(); }

double trace(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("trace: matrix is not square");
  return m.trace();
}

FrobeniusTrace frobenius_and_trace(const Matrix& m) { return {frobenius(m), trace(m)}; }

ComplexMatrix dft_matrix(std::size_t h) {
  if (h == 0) throw std::invalid_argument("dft_matrix: h must be at least 1");
  const auto n = static_cast<Eigen::Index>(h);
  ComplexMatrix v(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto phase = static_cast<double>((j * k) % n);
      const double angle = -2.0 * std::numbers::pi * phase / static_cast<double>(h);
      v(j, k) = std::polar(scale, angle);
    }
  }
  return v;
}

ComplexVector dft(const Vector& x) {
  const auto n = x.size();
  ComplexVector out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto phase = static_cast<double>((j * k) % n);
      acc += x(j) * std::polar(1.0, -2.0 * std::numbers::pi * phase / static_cast<double>(n));
    }
    out(k) = acc;
  }
  return out;
}

Matrix circulant_from_kernel(const Vector& w) {
  const auto h = w.size();
  if (h == 0) throw std::invalid_argument("circulant_from_kernel: empty kernel");
  Matrix c(h, h);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index col = 0; col < h; ++col) c(r, col) = w((r - col + h) % h);
  }
  return c;
}

Matrix toeplitz_from_kernel(const Vector& w, std::size_t h) {
  const auto k = static_cast<std::size_t>(w.size());
  if (k == 0) throw std::invalid_argument("toeplitz_from_kernel: empty kernel");
  if (k > h) throw std::invalid_argument("toeplitz_from_kernel: kernel longer than size");
  const auto n = static_cast<Eigen::Index>(h);
  Matrix t = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index off = 0; off < w.size() && i + off < n; ++off) t(i, i + off) = w(off);
  }
  return t;
}

Matrix kernel_vec_map(std::size_t h, std::size_t k) {
  if (k == 0 || k > h) throw std::invalid_argument("kernel_vec_map: need 1 <= k <= h");
  const auto n = static_cast<Eigen::Index>(h);
  Matrix p = Matrix::Zero(n * n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k) && i + j < n; ++j) {
      p(i * n + i + j, j) = 1.0;
    }
  }
  return p;
}

Vector vec(const Matrix& m) {
  Vector out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
  }
  return out;
}

Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(v.size()) != rows * cols) {
    throw std::invalid_argument("unvec: size mismatch");
  }
  Matrix m(rows, cols);
  const auto c = static_cast<Eigen::Index>(cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = v(i * c + j);
  }
  return m;
}

std::vector<std::size_t> fourier_modes(std::size_t h, std::size_t k) {
  if (k == 0 || k > h) throw std::invalid_argument("fourier_modes: need 1 <= K <= h");
  std::vector<std::size_t> modes{0};
  std::size_t j = 1;
  while (modes.size() < h && j <= h - j) {
    if (j == h - j) {
      modes.push_back(j);
    } else {
      modes.push_back(j);
      modes.push_back(h - j);
    }
    ++j;
  }
  if (k == h) return modes;

  std::vector<std::size_t> out{0};
  j = 1;
  while (out.size() + 2 <= k && j < h - j) {
    out.push_back(j);
    out.push_back(h - j);
    ++j;
  }
  if (out.size() < k) {
    if (h % 2 == 0) {
      out.push_back(h / 2);
    } else {
      out.erase(out.begin());
      out.push_back(j);
      out.push_back(h - j);
    }
  }
  return out;
}

Matrix real_fourier_basis(std::size_t h, std::size_t k) {
  const auto modes = fourier_modes(h, k);
  const auto n = static_cast<Eigen::Index>(h);
  const double hd = static_cast<double>(h);
  Matrix q(n, static_cast<Eigen::Index>(modes.size()));
  for (std::size_t c = 0; c < modes.size(); ++c) {
    const std::size_t m = modes[c];
    const auto col = static_cast<Eigen::Index>(c);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (m == 0) {
        q(j, col) = 1.0 / std::sqrt(hd);
      } else if (2 * m == h) {
        q(j, col) = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(hd);
      } else {
        const std::size_t freq = m < h - m ? m : h - m;
        const auto phase = static_cast<double>((static_cast<std::size_t>(j) * freq) % h);
        const double angle = 2.0 * std::numbers::pi * phase / hd;
        q(j, col) = std::sqrt(2.0 / hd) * (m < h - m ? std::cos(angle) : std::sin(angle));
      }
    }
  }
  return q;
}

SpectralForm::SpectralForm(std::size_t dim, Matrix basis, Vector eigenvalues, double complement)
    : dim_(dim), basis_(std::move(basis)), eigenvalues_(std::move(eigenvalues)),
      complement_(complement) {
  if (basis_.cols() != eigenvalues_.size()) {
    throw std::invalid_argument("SpectralForm: basis/eigenvalue count mismatch");
  }
  if (basis_.cols() > 0 && static_cast<std::size_t>(basis_.rows()) != dim_) {
    throw std::invalid_argument("SpectralForm: basis row count must equal dim");
  }
  if (static_cast<std::size_t>(basis_.cols()) > dim_) {
    throw std::invalid_argument("SpectralForm: rank exceeds dim");
  }
  if (basis_.cols() == 0) basis_.resize(static_cast<Eigen::Index>(dim_), 0);
  if (complement_multiplicity() == 0) complement_ = 0.0;
}

SpectralForm SpectralForm::scalar(std::size_t dim, double value) {
  return SpectralForm(dim, Matrix(static_cast<Eigen::Index>(dim), 0), Vector(0), value);
}

SpectralForm SpectralForm::from_symmetric(const Matrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("SpectralForm: matrix not square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success) throw std::runtime_error("SpectralForm: eigensolver failed");
  return SpectralForm(static_cast<std::size_t>(s.rows()), eig.eigenvectors(), eig.eigenvalues(),
                      0.0);
}

Vector SpectralForm::apply(const Vector& v) const {
  const Vector y = basis_.transpose() * v;
  const Vector scaled = (eigenvalues_.array() - complement_).matrix().cwiseProduct(y);
  return complement_ * v + basis_ * scaled;
}

Vector SpectralForm::apply_sqrt(const Vector& v) const {
  if (min_eigenvalue() < 0.0) throw std::domain_error("SpectralForm: negative eigenvalue");
  const double c = std::sqrt(complement_);
  const Vector y = basis_.transpose() * v;
  const Vector scaled = (eigenvalues_.array().sqrt() - c).matrix().cwiseProduct(y);
  return c * v + basis_ * scaled;
}

double SpectralForm::quadratic(const Vector& v) const {
  const Vector y = basis_.transpose() * v;
  double q = eigenvalues_.dot(y.cwiseAbs2());
  if (complement_multiplicity() > 0) q += complement_ * (v.squaredNorm() - y.squaredNorm());
  return q;
}

double SpectralForm::trace() const {
  return eigenvalues_.sum() + static_cast<double>(complement_multiplicity()) * complement_;
}

double SpectralForm::log_det() const {
  double total = eigenvalues_.array().log().sum();
  if (complement_multiplicity() > 0) {
    total += static_cast<double>(complement_multiplicity()) * std::log(complement_);
  }
  return total;
}

double SpectralForm::frobenius() const {
  return std::sqrt(eigenvalues_.squaredNorm() +
                   static_cast<double>(complement_multiplicity()) * complement_ * complement_);
}

double SpectralForm::max_eigenvalue() const {
  double best = complement_multiplicity() > 0 ? complement_ : -INFINITY;
  if (eigenvalues_.size() > 0) best = std::max(best, eigenvalues_.maxCoeff());
  return best;
}

double SpectralForm::min_eigenvalue() const {
  double best = complement_multiplicity() > 0 ? complement_ : INFINITY;
  if (eigenvalues_.size() > 0) best = std::min(best, eigenvalues_.minCoeff());
  return best;
}

Matrix SpectralForm::dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Matrix out = complement_ * Matrix::Identity(n, n);
  out += basis_ * (eigenvalues_.array() - complement_).matrix().asDiagonal() *
         basis_.transpose();
  return out;
}

bool SpectralForm::shares_basis(const SpectralForm& other) const {
  return dim_ == other.dim_ && basis_.rows() == other.basis_.rows() &&
         basis_.cols() == other.basis_.cols() && basis_ == other.basis_;
}

Vector standard_normal(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return z;
}

Vector sample_gaussian(std::size_t dim, const SpectralForm& cov, double sigma2, Rng& rng) {
  if (cov.dim() != dim) throw std::invalid_argument("sample_gaussian: dimension mismatch");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sample_gaussian: negative variance");
  if (!(cov.min_eigenvalue() > 0.0)) {
    throw std::domain_error("sample_gaussian: covariance is not positive definite");
  }
  const Vector z = standard_normal(dim, rng);
  return std::sqrt(sigma2) * cov.apply_sqrt(z);
}

Vector sample_gaussian(std::size_t dim, const SpectralForm& cov, double sigma2, RngSeed seed) {
  Rng rng(seed.value);
  return sample_gaussian(dim, cov, sigma2, rng);
}

}  // namespace pacb::linalg
