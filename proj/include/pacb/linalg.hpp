#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacb::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Rng = std::mt19937_64;

struct RngSeed {
  std::uint64_t value = 0;

  RngSeed offset(std::uint64_t index) const { return RngSeed{value + index}; }
};

/// Thrown when power iteration exhausts its budget; carries the last estimate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_value)
      : std::runtime_error(what), last_value_(last_value) {}

  double last_value() const noexcept { return last_value_; }

 private:
  double last_value_;
};

/// Largest singular value by power iteration on MᵀM.
///
/// Starts from the normalized all-ones vector. If that start collapses or is
/// already stationary after two steps, the run is repeated from a fixed-seed
/// random vector and the larger estimate is kept. A max_iter of zero selects
/// 10·max(rows, cols) + 200.
double spectral_norm(const Matrix& m, double tol = 1e-10, int max_iter = 0);

struct FrobeniusTrace {
  double fro = 0.0;
  double trace = 0.0;
};

double frobenius(const Matrix& m);
double trace(const Matrix& m);
FrobeniusTrace frobenius_and_trace(const Matrix& m);

/// Normalized DFT matrix, entry (j, k) = exp(-2πi·jk/h)/√h.
ComplexMatrix dft_matrix(std::size_t h);

/// Unnormalized DFT: X_k = Σ_j x_j exp(-2πi·jk/h).
ComplexVector dft(const Vector& x);

/// Circulant matrix whose first column is w; C(r, c) = w[(r - c) mod h].
Matrix circulant_from_kernel(const Vector& w);

/// Banded Toeplitz matrix with T(i, j) = w[j - i] for 0 ≤ j - i < k.
Matrix toeplitz_from_kernel(const Vector& w, std::size_t h);

/// Binary (h²)×k map with vec(toeplitz_from_kernel(w, h)) = P·w.
Matrix kernel_vec_map(std::size_t h, std::size_t k);

/// Row-major vectorization: vec(M)[i·cols + j] = M(i, j).
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols);

/// Conjugate-closed set of K Fourier mode indices of length-h signals, lowest
/// frequencies first: the DC mode, then pairs (j, h-j), with the Nyquist mode
/// filling an odd slot when h is even.
std::vector<std::size_t> fourier_modes(std::size_t h, std::size_t k);

/// Real orthonormal h×K basis spanning the modes of fourier_modes(h, K).
Matrix real_fourier_basis(std::size_t h, std::size_t k);

/**
 * Symmetric matrix kept as Q·diag(e)·Qᵀ + c·(I - Q·Qᵀ) with orthonormal Q.
 *
 * The complement value c applies to the (dim - rank) directions orthogonal to
 * Q and is ignored when Q spans the whole space.
 */
class SpectralForm {
 public:
  SpectralForm() = default;
  SpectralForm(std::size_t dim, Matrix basis, Vector eigenvalues, double complement);

  static SpectralForm scalar(std::size_t dim, double value);
  static SpectralForm from_symmetric(const Matrix& s);

  std::size_t dim() const { return dim_; }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  std::size_t complement_multiplicity() const { return dim_ - rank(); }
  const Matrix& basis() const { return basis_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  double complement() const { return complement_; }

  template <class F>
  SpectralForm map(F f) const {
    Vector e = eigenvalues_.unaryExpr([&](double x) { return f(x); });
    return SpectralForm(dim_, basis_, std::move(e), f(complement_));
  }

  Vector apply(const Vector& v) const;
  Vector apply_sqrt(const Vector& v) const;
  double quadratic(const Vector& v) const;

  double trace() const;
  double log_det() const;
  double frobenius() const;
  double max_eigenvalue() const;
  double min_eigenvalue() const;
  Matrix dense() const;

  bool shares_basis(const SpectralForm& other) const;

 private:
  std::size_t dim_ = 0;
  Matrix basis_;
  Vector eigenvalues_;
  double complement_ = 0.0;
};

Vector standard_normal(std::size_t dim, Rng& rng);

/// Draws σ·R^{1/2}·z with z standard normal from a generator seeded with seed.
Vector sample_gaussian(std::size_t dim, const SpectralForm& cov, double sigma2, RngSeed seed);
Vector sample_gaussian(std::size_t dim, const SpectralForm& cov, double sigma2, Rng& rng);

}  // namespace pacb::linalg
