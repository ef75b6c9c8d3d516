#include "oracles.hpp"
#include "pacb/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace pacb::linalg;

TEST_SUITE("linalg") {
  TEST_CASE("spectral norm of the identity is one") {
    CHECK(std::abs(spectral_norm(Matrix::Identity(5, 5)) - 1.0) < 1e-12);
  }

  TEST_CASE("spectral norm of a diagonal matrix is its largest absolute entry") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = -2.0;
    CHECK(std::abs(spectral_norm(m) - 3.0) < 1e-10);
  }

  TEST_CASE("spectral norm matches a Jacobi eigensolve of the Gram matrix") {
    std::mt19937_64 rng(11);
    const Matrix m = oracle::random_matrix(8, 8, rng);
    const double expected = oracle::spectral_norm(m);
    CHECK(std::abs(spectral_norm(m) - expected) < 1e-8 * expected);
  }

  TEST_CASE("spectral norm of rectangular and rank-deficient matrices") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
      const Matrix a = oracle::random_matrix(3 + t % 5, 9 - t % 4, rng);
      CHECK(std::abs(spectral_norm(a) - oracle::spectral_norm(a)) < 1e-8 * oracle::spectral_norm(a));
    }
    const Vector u = oracle::random_vector(6, rng);
    const Vector v = oracle::random_vector(4, rng);
    const Matrix rank1 = u * v.transpose();
    CHECK(std::abs(spectral_norm(rank1) - u.norm() * v.norm()) < 1e-9 * u.norm() * v.norm());
  }

  TEST_CASE("spectral norm handles clustered top singular values") {
    Matrix m = Matrix::Identity(12, 12);
    m(0, 0) = 1.0 + 1e-7;
    std::mt19937_64 rng(13);
    m += 1e-9 * oracle::random_matrix(12, 12, rng);
    CHECK(std::abs(spectral_norm(m) - oracle::spectral_norm(m)) < 1e-8);
  }

  TEST_CASE("spectral norm reports non-convergence with the last estimate") {
    std::mt19937_64 rng(14);
    const Matrix m = oracle::random_matrix(30, 30, rng);
    bool thrown = false;
    try {
      spectral_norm(m, 1e-15, 1);
    } catch (const ConvergenceError& e) {
      thrown = true;
      CHECK(e.last_value() > 0.0);
    }
    CHECK(thrown);
  }

  TEST_CASE("spectral norm rejects empty input and non-positive tolerance") {
    CHECK_THROWS(spectral_norm(Matrix(0, 0)));
    CHECK_THROWS(spectral_norm(Matrix::Identity(2, 2), 0.0));
  }

  TEST_CASE("frobenius and trace of small matrices") {
    const auto id = frobenius_and_trace(Matrix::Identity(4, 4));
    CHECK(std::abs(id.fro - 2.0) < 1e-15);
    CHECK(id.trace == 4.0);
    const auto zero = frobenius_and_trace(Matrix::Zero(3, 3));
    CHECK(zero.fro == 0.0);
    CHECK(zero.trace == 0.0);
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    const auto ft = frobenius_and_trace(m);
    CHECK(std::abs(ft.fro - std::sqrt(30.0)) < 1e-14);
    CHECK(ft.trace == 5.0);
    CHECK_THROWS(trace(Matrix::Zero(2, 3)));
    CHECK(std::abs(frobenius(Matrix::Ones(2, 3)) - std::sqrt(6.0)) < 1e-15);
  }

  TEST_CASE("norm chain on random PSD matrices") {
    std::mt19937_64 rng(15);
    for (int t = 0; t < 100; ++t) {
      const auto n = static_cast<std::size_t>(2 + t % 7);
      const Matrix g = oracle::random_matrix(n, 1 + static_cast<std::size_t>(t % 4), rng);
      const Matrix psd = g * g.transpose();
      const auto ft = frobenius_and_trace(psd);
      const double spec = spectral_norm(psd);
      CHECK(spec <= ft.fro * (1.0 + 1e-12));
      CHECK(ft.fro <= ft.trace * (1.0 + 1e-12));
    }
  }

  TEST_CASE("dft matrix for h = 1 and h = 2") {
    const ComplexMatrix v1 = dft_matrix(1);
    CHECK(v1.rows() == 1);
    CHECK(std::abs(v1(0, 0) - std::complex<double>(1.0, 0.0)) < 1e-15);
    const ComplexMatrix v2 = dft_matrix(2);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(v2(0, 0) - s) < 1e-15);
    CHECK(std::abs(v2(0, 1) - s) < 1e-15);
    CHECK(std::abs(v2(1, 0) - s) < 1e-15);
    CHECK(std::abs(v2(1, 1) + s) < 1e-15);
  }

  TEST_CASE("dft matrix is unitary") {
    CHECK((dft_matrix(4).adjoint() * dft_matrix(4) - ComplexMatrix::Identity(4, 4)).norm() < 1e-12);
    for (std::size_t h : {3u, 5u, 8u, 16u, 31u}) {
      const ComplexMatrix v = dft_matrix(h);
      CHECK((v.adjoint() * v - ComplexMatrix::Identity(h, h)).norm() < 1e-10);
    }
  }

  TEST_CASE("dft agrees with direct summation") {
    std::mt19937_64 rng(16);
    for (std::size_t h : {1u, 2u, 7u, 12u}) {
      const Vector x = oracle::random_vector(h, rng);
      const ComplexVector got = dft(x);
      const auto expected = oracle::naive_dft(oracle::as_std(x));
      for (std::size_t k = 0; k < h; ++k) CHECK(std::abs(got(k) - expected[k]) < 1e-12);
    }
  }

  TEST_CASE("circulant constructor examples") {
    CHECK(circulant_from_kernel(Vector::Unit(3, 0)) == Matrix::Identity(3, 3));
    Vector w(2);
    w << 0, 1;
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    CHECK(circulant_from_kernel(w) == swap);
  }

  TEST_CASE("circulant eigenvalues are the unnormalized DFT of the kernel") {
    Vector w(3);
    w << 1, 2, 3;
    const Eigen::ComplexEigenSolver<ComplexMatrix> solver(circulant_from_kernel(w).cast<std::complex<double>>());
    auto eig = solver.eigenvalues();
    auto expected = oracle::naive_dft(oracle::as_std(w));
    std::vector<bool> used(3, false);
    for (Eigen::Index i = 0; i < 3; ++i) {
      bool matched = false;
      for (std::size_t j = 0; j < 3 && !matched; ++j) {
        if (!used[j] && std::abs(eig(i) - expected[j]) < 1e-8) used[j] = matched = true;
      }
      CHECK(matched);
    }
  }

  TEST_CASE("circulant matrices are diagonalized by the DFT matrix") {
    std::mt19937_64 rng(17);
    for (std::size_t h : {2u, 5u, 8u, 13u}) {
      const Vector w = oracle::random_vector(h, rng);
      const ComplexMatrix v = dft_matrix(h);
      ComplexMatrix d = v.adjoint() * circulant_from_kernel(w).cast<std::complex<double>>() * v;
      d.diagonal().setZero();
      CHECK(d.norm() < 1e-8);
    }
  }

  TEST_CASE("circulant apply matches circular convolution") {
    std::mt19937_64 rng(18);
    const Vector w = oracle::random_vector(6, rng);
    const Vector x = oracle::random_vector(6, rng);
    const Vector got = circulant_from_kernel(w) * x;
    const auto expected = oracle::circular_apply(oracle::as_std(w), oracle::as_std(x));
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(got(i) - expected[i]) < 1e-12);
  }

  TEST_CASE("toeplitz constructor examples") {
    CHECK(toeplitz_from_kernel(Vector::Ones(1), 3) == Matrix::Identity(3, 3));
    Vector w(2);
    w << 1, 2;
    Matrix expected(2, 2);
    expected << 1, 2, 0, 1;
    CHECK(toeplitz_from_kernel(w, 2) == expected);
    CHECK(toeplitz_from_kernel(Vector::Constant(1, 5.0), 4) == 5.0 * Matrix::Identity(4, 4));
    CHECK_THROWS(toeplitz_from_kernel(Vector::Ones(4), 3));
  }

  TEST_CASE("toeplitz apply matches the banded index rule") {
    std::mt19937_64 rng(19);
    const Vector w = oracle::random_vector(3, rng);
    const Vector x = oracle::random_vector(7, rng);
    const Vector got = toeplitz_from_kernel(w, 7) * x;
    const auto expected = oracle::banded_apply(oracle::as_std(w), oracle::as_std(x));
    for (Eigen::Index i = 0; i < 7; ++i) CHECK(std::abs(got(i) - expected[i]) < 1e-12);
  }

  TEST_CASE("kernel vec map examples") {
    Vector expected(4);
    expected << 1, 0, 0, 1;
    CHECK(kernel_vec_map(2, 1).col(0) == expected);
    Vector w(2);
    w << 1, 2;
    Matrix t(2, 2);
    t << 1, 2, 0, 1;
    CHECK(kernel_vec_map(2, 2) * w == vec(t));
  }

  TEST_CASE("kernel vec map is binary with one entry per band position") {
    for (std::size_t h = 1; h <= 6; ++h) {
      for (std::size_t k = 1; k <= h; ++k) {
        const Matrix p = kernel_vec_map(h, k);
        CHECK(p.rows() == static_cast<Eigen::Index>(h * h));
        CHECK(p.cols() == static_cast<Eigen::Index>(k));
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          for (Eigen::Index c = 0; c < p.cols(); ++c) CHECK((p(r, c) == 0.0 || p(r, c) == 1.0));
          CHECK(p.row(r).sum() <= 1.0);
        }
        for (std::size_t q = 0; q < k; ++q) CHECK(p.col(static_cast<Eigen::Index>(q)).sum() == double(h - q));
      }
    }
  }

  TEST_CASE("kernel vec map reproduces vec of the Toeplitz matrix exactly") {
    std::mt19937_64 rng(20);
    std::uniform_int_distribution<std::size_t> hd(1, 12);
    for (int t = 0; t < 50; ++t) {
      const std::size_t h = hd(rng);
      const std::size_t k = 1 + hd(rng) % h;
      const Vector w = oracle::random_vector(k, rng);
      CHECK((vec(toeplitz_from_kernel(w, h)) - kernel_vec_map(h, k) * w).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("vec and unvec are row-major inverses") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const Vector v = vec(m);
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(v(i) == double(i + 1));
    CHECK(unvec(v, 2, 3) == m);
  }

  TEST_CASE("fourier modes are conjugate closed and lowest first") {
    CHECK(fourier_modes(8, 1) == std::vector<std::size_t>{0});
    CHECK(fourier_modes(8, 3) == std::vector<std::size_t>{0, 1, 7});
    CHECK(fourier_modes(8, 8).size() == 8);
    for (std::size_t h : {4u, 5u, 8u, 9u}) {
      for (std::size_t k = 1; k <= h; ++k) {
        const Matrix q = real_fourier_basis(h, k);
        CHECK((q.transpose() * q - Matrix::Identity(k, k)).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("real fourier basis spans circulant invariant subspaces") {
    std::mt19937_64 rng(21);
    const Vector w = oracle::random_vector(8, rng);
    const Matrix c = circulant_from_kernel(w);
    for (std::size_t k : {1u, 2u, 3u, 5u, 8u}) {
      const Matrix q = real_fourier_basis(8, k);
      const Matrix proj = q * q.transpose();
      CHECK(((Matrix::Identity(8, 8) - proj) * c * q).norm() < 1e-10);
    }
  }

  TEST_CASE("spectral form algebra matches dense computations") {
    std::mt19937_64 rng(22);
    const Matrix s = oracle::random_pd(6, rng);
    const SpectralForm f = SpectralForm::from_symmetric(s);
    CHECK((f.dense() - s).norm() < 1e-10);
    CHECK(std::abs(f.trace() - s.trace()) < 1e-10);
    CHECK(std::abs(f.log_det() - std::log(s.determinant())) < 1e-10);
    CHECK(std::abs(f.frobenius() - s.norm()) < 1e-10);
    const Vector v = oracle::random_vector(6, rng);
    CHECK((f.apply(v) - s * v).norm() < 1e-10);
    CHECK(std::abs(f.quadratic(v) - v.dot(s * v)) < 1e-9);
    const Vector r = f.apply_sqrt(f.apply_sqrt(v));
    CHECK((r - s * v).norm() < 1e-9);

    const Matrix basis = real_fourier_basis(6, 2);
    Vector e(2);
    e << 4.0, 9.0;
    const SpectralForm partial(6, basis, e, 0.5);
    const Matrix dense = basis * e.asDiagonal() * basis.transpose() +
                         0.5 * (Matrix::Identity(6, 6) - basis * basis.transpose());
    CHECK((partial.dense() - dense).norm() < 1e-12);
    CHECK(std::abs(partial.trace() - dense.trace()) < 1e-12);
    CHECK(std::abs(partial.log_det() - std::log(dense.determinant())) < 1e-10);
    CHECK(partial.max_eigenvalue() == 9.0);
    CHECK(partial.min_eigenvalue() == 0.5);
  }

  TEST_CASE("gaussian sampling scale, determinism and degenerate limits") {
    const auto id = SpectralForm::scalar(100000, 1.0);
    const Vector u = sample_gaussian(100000, id, 1.0, RngSeed{5});
    const double mean_sq = u.squaredNorm() / 100000.0;
    CHECK(mean_sq >= 0.99);
    CHECK(mean_sq <= 1.01);
    const Vector tiny = sample_gaussian(50, SpectralForm::scalar(50, 1.0), 1e-30, RngSeed{6});
    CHECK(tiny.norm() < 1e-12);
    CHECK(sample_gaussian(50, SpectralForm::scalar(50, 2.0), 0.3, RngSeed{7}) ==
          sample_gaussian(50, SpectralForm::scalar(50, 2.0), 0.3, RngSeed{7}));
    CHECK(sample_gaussian(50, SpectralForm::scalar(50, 2.0), 0.3, RngSeed{7}) !=
          sample_gaussian(50, SpectralForm::scalar(50, 2.0), 0.3, RngSeed{8}));
  }

  TEST_CASE("gaussian sampling follows the requested covariance") {
    std::mt19937_64 rng(23);
    const Matrix r = oracle::random_pd(3, rng);
    const SpectralForm f = SpectralForm::from_symmetric(r);
    Matrix acc = Matrix::Zero(3, 3);
    Rng gen(24);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const Vector u = sample_gaussian(3, f, 0.5, gen);
      acc += u * u.transpose();
    }
    acc /= n;
    CHECK((acc - 0.5 * r).norm() < 0.02 * r.norm());
  }

  TEST_CASE("gaussian sampling rejects indefinite covariances") {
    Matrix s = Matrix::Identity(3, 3);
    s(2, 2) = -1.0;
    CHECK_THROWS(sample_gaussian(3, SpectralForm::from_symmetric(s), 1.0, RngSeed{1}));
  }
}
