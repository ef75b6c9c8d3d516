#include "oracles.hpp"
#include "pacb/bounds.hpp"
#include "pacb/generate.hpp"
#include "pacb/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

using namespace pacb;
using linalg::Matrix;
using linalg::RngSeed;
using linalg::Vector;
using sensitivity::Structure;
using verify::McResult;

namespace {

struct Problem {
  net::Network net;
  net::Dataset data;
  double gamma;
};

Problem planted_problem(net::LayerKind kind, std::size_t m = 1000) {
  gen::NetSpec spec;
  spec.kind = kind;
  spec.depth = 3;
  spec.width = 8;
  spec.input_dim = 8;
  spec.output_dim = 2;
  spec.planted = true;
  spec.seed = 1;
  auto net = gen::make_network(spec);
  gen::BlobSpec blobs;
  blobs.dim = 8;
  blobs.m = m;
  blobs.noise = 0.25;
  blobs.seed = 2;
  auto data = gen::make_blobs(blobs);
  const double gamma = 0.5 * net::min_margin(net, data);
  return {std::move(net), std::move(data), gamma};
}

net::Network random_dense(std::size_t d, std::uint64_t seed, std::size_t h = 6, std::size_t in = 5) {
  gen::NetSpec spec;
  spec.depth = d;
  spec.width = h;
  spec.input_dim = in;
  spec.output_dim = 3;
  spec.seed = seed;
  return gen::make_network(spec);
}

double min_abs_preactivation(const net::Network& net, const Vector& x) {
  double smallest = std::numeric_limits<double>::infinity();
  Vector z = net.weight(0) * x;
  for (std::size_t l = 1; l < net.depth(); ++l) {
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    z = net.weight(l) * z.cwiseMax(0.0);
  }
  return smallest;
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("binomial result bookkeeping") {
    const auto r = verify::make_result("x", 1000, 450, 0.5, McResult::Direction::at_least, 9);
    CHECK(r.frequency == doctest::Approx(0.45));
    CHECK(r.binomial_std_err == doctest::Approx(std::sqrt(0.45 * 0.55 / 1000.0)));
    CHECK_FALSE(r.pass);
    CHECK(r.seed == 9);
    CHECK(verify::make_result("x", 1000, 480, 0.5, McResult::Direction::at_least, 0).pass);
    CHECK(verify::make_result("x", 1000, 520, 0.5, McResult::Direction::at_most, 0).pass);
    CHECK_FALSE(verify::make_result("x", 1000, 560, 0.5, McResult::Direction::at_most, 0).pass);
    CHECK(verify::make_result("x", 500, 0, 0.0, McResult::Direction::none_allowed, 0).pass);
    CHECK_FALSE(verify::make_result("x", 500, 1, 0.0, McResult::Direction::none_allowed, 0).pass);
  }

  TEST_CASE("perturbation condition at the pipeline sigma squared") {
    const auto p = planted_problem(net::LayerKind::dense);
    const auto state = bounds::prepare_pipeline(p.net, p.data, p.gamma, Structure::diagonal);
    REQUIRE(state.posterior.has_value());
    const auto r = verify::mc_perturbation_condition(state.network, p.data, *state.posterior, state.sens, p.gamma,
                                                     1000, RngSeed{3}, 200);
    CHECK(r.surrogate.frequency >= 0.5 - 3.0 * r.surrogate.binomial_std_err);
    CHECK(r.surrogate.pass);
    CHECK(r.direct.pass);
    CHECK(r.pass);
    CHECK(r.surrogate.n_samples == 1000);
  }

  TEST_CASE("vanishing posterior variance always satisfies the condition") {
    const auto p = planted_problem(net::LayerKind::dense, 200);
    auto state = bounds::prepare_pipeline(p.net, p.data, p.gamma, Structure::diagonal);
    REQUIRE(state.posterior.has_value());
    auto post = *state.posterior;
    post.sigma2 *= 1e-8;
    const auto r = verify::mc_perturbation_condition(state.network, p.data, post, state.sens, p.gamma, 1000,
                                                     RngSeed{4});
    CHECK(r.direct.frequency == 1.0);
    CHECK(r.surrogate.frequency == 1.0);

    const auto wide = verify::mc_perturbation_condition(state.network, p.data, *state.posterior, state.sens, 1e12,
                                                        1000, RngSeed{4});
    CHECK(wide.direct.frequency == 1.0);
    CHECK(wide.surrogate.frequency == 1.0);
  }

  TEST_CASE("zero perturbation satisfies the perturbation bound with equality") {
    const auto net = random_dense(3, 1);
    net::Perturbation u;
    for (std::size_t l = 0; l < 3; ++l) u.push_back(Vector::Zero(net.parameter_count(l)));
    const auto sens = sensitivity::build_diagonal(net, 1.0);
    double rhs = 0.0;
    for (std::size_t l = 0; l < 3; ++l) rhs += sens[l].apply(u[l]).squaredNorm();
    CHECK(rhs == 0.0);
    CHECK((net::perturb(net, u).forward(Vector::Ones(5)) - net.forward(Vector::Ones(5))).norm() == 0.0);
  }

  TEST_CASE("diagonal perturbation bound has no violations") {
    const auto p = planted_problem(net::LayerKind::dense, 200);
    const auto norm = net::spectral_normalize(p.net).network;
    const auto sens = sensitivity::build_diagonal(norm, p.data.radius());
    const auto r = verify::mc_perturbation_bound(norm, p.data, sens, 500, RngSeed{5},
                                                 verify::default_validity(Structure::diagonal, 0));
    CHECK(r.n_samples == 500);
    CHECK(r.success_count == 0);
    CHECK(r.pass);
    CHECK(r.worst_ratio <= 1.0);
  }

  TEST_CASE("oversized perturbations are out of contract") {
    const auto p = planted_problem(net::LayerKind::dense, 200);
    const auto norm = net::spectral_normalize(p.net).network;
    const auto sens = sensitivity::build_diagonal(norm, p.data.radius());
    verify::ValidityCondition big;
    big.fraction = 50.0;
    const auto r = verify::mc_perturbation_bound(norm, p.data, sens, 200, RngSeed{6}, big);
    CHECK(r.n_samples == 200);
    CHECK(r.worst_ratio > 0.0);
  }

  TEST_CASE("concentration tail examples") {
    const auto p = planted_problem(net::LayerKind::dense, 200);
    const auto state = bounds::prepare_pipeline(p.net, p.data, p.gamma, Structure::lowrank);
    REQUIRE(state.posterior.has_value());
    const auto half = verify::mc_concentration(state.sens, *state.posterior, std::numbers::ln2, 10000, RngSeed{7});
    CHECK(half.frequency <= 0.5 + 3.0 * half.binomial_std_err);
    CHECK(half.pass);
    const auto far = verify::mc_concentration(state.sens, *state.posterior, 4.0, 100000, RngSeed{8});
    CHECK(far.frequency <= std::exp(-4.0) + 3.0 * far.binomial_std_err);
    CHECK(far.pass);

    const sensitivity::SensitivitySet zero{sensitivity::SensitivityMatrix::scalar_identity(0, 4, 0.0)};
    pacbayes::PosteriorSpec post;
    post.sigma2 = 1.0;
    post.covariances = {linalg::SpectralForm::scalar(4, 1.0)};
    const auto none = verify::mc_concentration(zero, post, std::numbers::ln2, 1000, RngSeed{9});
    CHECK(none.success_count == 0);
  }

  TEST_CASE("Monte Carlo results are reproducible and carry their seed") {
    const auto p = planted_problem(net::LayerKind::dense, 200);
    const auto state = bounds::prepare_pipeline(p.net, p.data, p.gamma, Structure::diagonal);
    REQUIRE(state.posterior.has_value());
    const auto a = verify::mc_concentration(state.sens, *state.posterior, 1.0, 2000, RngSeed{10});
    const auto b = verify::mc_concentration(state.sens, *state.posterior, 1.0, 2000, RngSeed{10});
    CHECK(a.success_count == b.success_count);
    CHECK(a.seed == 10);
    const auto c = verify::mc_perturbation_condition(state.network, p.data, *state.posterior, state.sens, p.gamma,
                                                     1000, RngSeed{11}, 50);
    const auto d = verify::mc_perturbation_condition(state.network, p.data, *state.posterior, state.sens, p.gamma,
                                                     1000, RngSeed{11}, 50);
    CHECK(c.direct.success_count == d.direct.success_count);
    CHECK(c.surrogate.success_count == d.surrogate.success_count);
    CHECK(c.surrogate.seed == 11);
  }

  TEST_CASE("oracle minimizer of the D objective") {
    const Matrix zero = Matrix::Zero(4, 4);
    CHECK((verify::oracle_min_D(zero, 3.0) - Matrix::Identity(4, 4)).norm() < 1e-8);

    std::mt19937_64 rng(71);
    for (int t = 0; t < 5; ++t) {
      const Matrix a = oracle::random_matrix(5, 5, rng);
      const double eta2 = 0.5 + t;
      const Matrix closed = (Matrix::Identity(5, 5) + eta2 * a.transpose() * a).inverse();
      const Matrix numeric = verify::oracle_min_D(a, eta2);
      CHECK((numeric - closed).norm() < 1e-6);
      CHECK(pacbayes::objective_D(a, closed, eta2) <= pacbayes::objective_D(a, numeric, eta2) + 1e-8);
    }

    Matrix diag = Matrix::Zero(4, 4);
    diag.diagonal() << 0.5, 1.0, 2.0, 3.0;
    const Matrix r = verify::oracle_min_D(diag, 1.5);
    CHECK((r - Matrix(r.diagonal().asDiagonal())).norm() < 1e-8);
  }

  TEST_CASE("oracle minimizer reports non-convergence") {
    std::mt19937_64 rng(72);
    const Matrix a = 10.0 * oracle::random_matrix(5, 5, rng);
    bool thrown = false;
    try {
      (void)verify::oracle_min_D(a, 2.0, 1, 1e-10);
    } catch (const linalg::ConvergenceError& e) {
      thrown = true;
      CHECK(std::isfinite(e.last_value()));
    }
    CHECK(thrown);
  }

  TEST_CASE("finite differences in the linear regime") {
    std::mt19937_64 rng(73);
    std::vector<Matrix> ws{oracle::random_matrix(4, 3, rng).cwiseAbs(), oracle::random_matrix(2, 4, rng).cwiseAbs()};
    const auto net = net::Network::dense(ws);
    const Vector x = Vector::Ones(3);
    for (std::size_t l = 0; l < 2; ++l) {
      const Matrix fd = verify::finite_diff_jacobian(net, x, l, 1e-5);
      CHECK((fd - net::layer_jacobian(net, x, l)).norm() < 1e-6);
    }
  }

  TEST_CASE("finite differences vanish on a dead layer") {
    const auto net = net::Network::dense({-Matrix::Identity(3, 3), Matrix::Identity(2, 3)});
    CHECK(verify::finite_diff_jacobian(net, Vector::Ones(3), 1, 1e-4).isZero(0.0));
  }

  TEST_CASE("halving the step keeps the central difference within its error order") {
    std::mt19937_64 rng(74);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 20 && checked < 10; ++seed) {
      const auto net = random_dense(3, seed);
      const Vector x = oracle::random_vector(5, rng);
      if (min_abs_preactivation(net, x) < 1e-2) continue;
      const Matrix exact = net::layer_jacobian(net, x, 1);
      const double e1 = (verify::finite_diff_jacobian(net, x, 1, 1e-4) - exact).norm();
      const double e2 = (verify::finite_diff_jacobian(net, x, 1, 5e-5) - exact).norm();
      const double roundoff = 1e-15 / 5e-5 * std::max(1.0, exact.norm()) * 10.0;
      CHECK(e2 <= e1 / 4.0 + roundoff);
      ++checked;
    }
    CHECK(checked >= 5);
  }

  TEST_CASE("finite difference step is range checked") {
    const auto net = random_dense(2, 1);
    CHECK_THROWS(verify::finite_diff_jacobian(net, Vector::Ones(5), 0, 1e-9));
    CHECK_THROWS(verify::finite_diff_jacobian(net, Vector::Ones(5), 0, 1e-1));
  }

  TEST_CASE("analytic jacobian agrees with finite differences in the median") {
    std::mt19937_64 rng(75);
    std::vector<double> errors;
    for (std::uint64_t seed = 0; errors.size() < 50 && seed < 1000; ++seed) {
      const auto net = random_dense(2 + seed % 3, seed);
      const Vector x = oracle::random_vector(5, rng);
      if (min_abs_preactivation(net, x) <= 1e-3) continue;
      const std::size_t l = seed % net.depth();
      const Matrix a = net::layer_jacobian(net, x, l);
      const Matrix fd = verify::finite_diff_jacobian(net, x, l, 1e-6);
      errors.push_back((a - fd).norm() / std::max(a.norm(), 1e-300));
    }
    REQUIRE(errors.size() == 50);
    std::nth_element(errors.begin(), errors.begin() + 25, errors.end());
    CHECK(errors[25] < 1e-5);
  }

  TEST_CASE("layer perturbation lemma holds on random nets") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto net = random_dense(2 + seed % 3, 80 + seed);
      gen::BlobSpec blobs;
      blobs.dim = 5;
      blobs.m = 50;
      blobs.seed = seed;
      const auto data = gen::make_blobs(blobs);
      const auto r = verify::check_neyshabur_perturbation(net, data, 500, RngSeed{seed});
      CHECK(r.n_samples == 500);
      CHECK(r.success_count == 0);
      CHECK(r.pass);
    }
  }

  TEST_CASE("single-layer reduction of the perturbation lemma has slack e") {
    std::mt19937_64 rng(76);
    for (int t = 0; t < 50; ++t) {
      const Matrix w1 = oracle::random_matrix(4, 4, rng);
      const auto net = net::Network::dense({w1, Matrix::Identity(4, 4)});
      const Vector x = oracle::random_vector(4, rng);
      const double b = x.norm();
      Matrix u1 = oracle::random_matrix(4, 4, rng);
      u1 *= linalg::spectral_norm(w1) / (2.0 * linalg::spectral_norm(u1));
      const net::Perturbation u{linalg::vec(u1), Vector::Zero(16)};
      const double change = (net::perturb(net, u).forward(x) - net.forward(x)).norm();
      const double bound = std::numbers::e * b * linalg::spectral_norm(u1);
      CHECK(change <= (u1 * x).norm() + 1e-12);
      CHECK(change * std::numbers::e <= bound * (1.0 + 1e-12));
    }
  }
}
