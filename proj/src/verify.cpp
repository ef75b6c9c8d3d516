#include "pacb/verify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pacb::verify {

namespace {

using linalg::Rng;

double relative_slack(double rhs) { return rhs * 1e-9 + 1e-12; }

Matrix outputs(const net::Network& net, const Matrix& xs) { return net.forward_batch(xs); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

Vector column_norms(const Matrix& m) { return m.colwise().norm().transpose(); }

std::vector<double> validity_gains(const net::Network& net) {
  auto g = net::layer_spectral_norms(net);
  if (net.kind() == net::LayerKind::residual) {
    for (double& v : g) v += 1.0;
  }
  return g;
}

/// Isotropic direction per layer rescaled to expanded spectral norm r·ball_l.
net::Perturbation sample_in_balls(const net::Network& net, const std::vector<double>& balls, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  net::Perturbation u;
  u.reserve(net.depth());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    u.push_back(linalg::standard_normal(net.parameter_count(l), rng));
  }
  const net::Network direction = net.with_parameters(u);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const double r = 1.0 - unit(rng);
    const double norm = net::layer_spectral_norm(direction, l);
    if (norm > 0.0) u[l] *= r * balls[l] / norm;
  }
  return u;
}

}  // namespace

McResult make_result(std::string name, std::size_t n, std::size_t count, double threshold,
                     McResult::Direction direction, std::uint64_t seed) {
  McResult r;
  r.name = std::move(name);
  r.n_samples = n;
  r.success_count = count;
  r.frequency = n > 0 ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
  r.binomial_std_err =
      n > 0 ? std::sqrt(r.frequency * (1.0 - r.frequency) / static_cast<double>(n)) : 0.0;
  r.threshold = threshold;
  r.direction = direction;
  r.seed = seed;
  switch (direction) {
    case McResult::Direction::at_least:
      r.pass = n > 0 && r.frequency >= threshold - 3.0 * r.binomial_std_err;
      break;
    case McResult::Direction::at_most:
      r.pass = n > 0 && r.frequency <= threshold + 3.0 * r.binomial_std_err;
      break;
    case McResult::Direction::none_allowed: r.pass = count == 0; break;
  }
  return r;
}

PerturbationConditionResult mc_perturbation_condition(const net::Network& net, const net::Dataset& data,
                                                      const pacbayes::PosteriorSpec& post,
                                                      const sensitivity::SensitivitySet& sens,
                                                      double gamma, std::size_t n, RngSeed seed,
                                                      std::size_t direct_samples) {
  if (sens.size() != net.depth() || post.covariances.size() != net.depth()) {
    throw std::invalid_argument("mc_perturbation_condition: layer count mismatch");
  }
  const std::size_t n_direct = direct_samples == 0 ? n : std::min(n, direct_samples);
  const Matrix base = outputs(net, data.inputs());
  const double surrogate_level = gamma * gamma / 16.0;
  const double direct_level = gamma / 4.0;

  std::size_t direct_hits = 0;
  std::size_t surrogate_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed.offset(i).value);
    net::Perturbation u;
    u.reserve(net.depth());
    double quad = 0.0;
    for (std::size_t l = 0; l < net.depth(); ++l) {
      u.push_back(linalg::sample_gaussian(net.parameter_count(l), post.covariances[l], post.sigma2, rng));
      quad += sens[l].gram().quadratic(u.back());
    }
    if (quad < surrogate_level) ++surrogate_hits;
    if (i < n_direct) {
      const Matrix moved = outputs(net::perturb(net, u), data.inputs());
      if (max_abs_diff(moved, base) < direct_level) ++direct_hits;
    }
  }

  PerturbationConditionResult out;
  out.direct = make_result("perturbation_condition_direct", n_direct, direct_hits, 0.5,
                           McResult::Direction::at_least, seed.value);
  out.surrogate = make_result("perturbation_condition_surrogate", n, surrogate_hits, 0.5,
                              McResult::Direction::at_least, seed.value);
  out.chain_slack = out.direct.pass && !out.surrogate.pass;
  out.pass = out.direct.pass;
  return out;
}

ValidityCondition default_validity(sensitivity::Structure s, std::size_t anchor_index) {
  ValidityCondition v;
  v.anchor_index = anchor_index;
  if (s == sensitivity::Structure::lowrank) {
    v.fraction = 1e-4;
    v.anchor_only = true;
  }
  return v;
}

McResult mc_perturbation_bound(const net::Network& net, const net::Dataset& data,
                               const sensitivity::SensitivitySet& sens, std::size_t n, RngSeed seed,
                               const ValidityCondition& validity) {
  if (sens.size() != net.depth()) throw std::invalid_argument("mc_perturbation_bound: layer count mismatch");
  if (!(validity.fraction > 0.0)) throw std::invalid_argument("mc_perturbation_bound: fraction must be positive");
  Matrix xs = data.inputs();
  if (validity.anchor_only) {
    if (validity.anchor_index >= data.size()) throw std::out_of_range("mc_perturbation_bound: anchor index");
    xs = data.inputs().col(static_cast<Eigen::Index>(validity.anchor_index));
  }
  const Matrix base = outputs(net, xs);
  auto balls = validity_gains(net);
  const double d = static_cast<double>(net.depth());
  for (double& b : balls) b *= validity.fraction / d;

  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed.offset(i).value);
    const net::Perturbation u = sample_in_balls(net, balls, rng);
    double rhs = 0.0;
    for (std::size_t l = 0; l < net.depth(); ++l) rhs += sens[l].gram().quadratic(u[l]);
    const double diff = max_abs_diff(outputs(net::perturb(net, u), xs), base);
    const double lhs = diff * diff;
    if (lhs > rhs + relative_slack(rhs)) ++violations;
    if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
  }
  McResult r = make_result("perturbation_bound", n, violations, 0.0, McResult::Direction::none_allowed,
                           seed.value);
  r.worst_ratio = worst;
  return r;
}

McResult mc_concentration(const sensitivity::SensitivitySet& sens, const pacbayes::PosteriorSpec& post,
                          double t, std::size_t n, RngSeed seed) {
  if (!(t > 0.0)) throw std::invalid_argument("mc_concentration: t must be positive");
  if (sens.size() != post.covariances.size()) {
    throw std::invalid_argument("mc_concentration: layer count mismatch");
  }
  std::vector<pacbayes::PsdSummary> blocks;
  for (std::size_t l = 0; l < sens.size(); ++l) {
    blocks.push_back(pacbayes::covariance_summary(sens[l], post.covariances[l]));
  }
  const pacbayes::PsdSummary m = pacbayes::block_summary(blocks);
  const double level =
      post.sigma2 * (m.trace + std::sqrt(4.0 * t) * m.fro + 2.0 * t * m.spec);

  std::size_t exceed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed.offset(i).value);
    double quad = 0.0;
    for (std::size_t l = 0; l < sens.size(); ++l) {
      const Vector u = linalg::sample_gaussian(sens[l].dim(), post.covariances[l], post.sigma2, rng);
      quad += sens[l].gram().quadratic(u);
    }
    if (quad > level) ++exceed;
  }
  return make_result("concentration", n, exceed, std::exp(-t), McResult::Direction::at_most, seed.value);
}

Matrix oracle_min_D(const Matrix& a, double eta2, int max_iter, double tol) {
  if (!(eta2 >= 0.0)) throw std::invalid_argument("oracle_min_D: eta2 must be >= 0");
  const auto n = a.cols();
  const Matrix c = eta2 * a.transpose() * a + Matrix::Identity(n, n);

  auto objective = [&](const Matrix& r) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return (c * r).trace() - eig.eigenvalues().array().log().sum();
  };
  auto sym_fn = [](const Matrix& s, auto f) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
    return Matrix(eig.eigenvectors() * eig.eigenvalues().unaryExpr(f).asDiagonal() *
                  eig.eigenvectors().transpose());
  };

  Matrix r = Matrix::Identity(n, n);
  double value = objective(r);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix gradient = c - r.inverse();
    if (gradient.norm() < tol) return r;
    const Matrix root = sym_fn(r, [](double x) { return std::sqrt(x); });
    const Matrix h = root * c * root - Matrix::Identity(n, n);
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      const Matrix candidate = root * sym_fn(h, [step](double x) { return std::exp(-step * x); }) * root;
      const Matrix sym = 0.5 * (candidate + candidate.transpose());
      const double v = objective(sym);
      if (v <= value + 1e-13 * std::max(1.0, std::abs(value))) {
        r = sym;
        value = v;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  const Matrix gradient = c - r.inverse();
  if (gradient.norm() < tol) return r;
  throw linalg::ConvergenceError("oracle_min_D: gradient norm did not fall below tolerance", value);
}

Matrix finite_diff_jacobian(const net::Network& net, const Vector& x, std::size_t l, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("finite_diff_jacobian: eps out of range");
  if (l >= net.depth()) throw std::out_of_range("finite_diff_jacobian: layer index");
  const std::size_t q = net.parameter_count(l);
  Matrix jac(static_cast<Eigen::Index>(net.output_dim()), static_cast<Eigen::Index>(q));
  net::Perturbation u;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    u.push_back(Vector::Zero(static_cast<Eigen::Index>(net.parameter_count(i))));
  }
  for (std::size_t j = 0; j < q; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    u[l](jj) = eps;
    const Vector plus = net::perturb(net, u).forward(x);
    u[l](jj) = -eps;
    const Vector minus = net::perturb(net, u).forward(x);
    u[l](jj) = 0.0;
    jac.col(jj) = (plus - minus) / (2.0 * eps);
  }
  return jac;
}

McResult check_neyshabur_perturbation(const net::Network& net, const net::Dataset& data, std::size_t n,
                                      RngSeed seed) {
  if (net.kind() != net::LayerKind::dense) {
    throw std::invalid_argument("check_neyshabur_perturbation: expects a dense network");
  }
  const auto norms = net::layer_spectral_norms(net);
  for (double v : norms) {
    if (v == 0.0) throw std::invalid_argument("check_neyshabur_perturbation: zero layer norm");
  }
  double product = 1.0;
  for (double v : norms) product *= v;
  const double d = static_cast<double>(net.depth());
  std::vector<double> balls;
  for (double v : norms) balls.push_back(v / d);
  const Matrix base = outputs(net, data.inputs());
  const double prefactor = std::numbers::e * data.radius() * product;

  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed.offset(i).value);
    const net::Perturbation u = sample_in_balls(net, balls, rng);
    const net::Network moved = net::perturb(net, u);
    const net::Network delta = net.with_parameters(u);
    double sum = 0.0;
    for (std::size_t l = 0; l < net.depth(); ++l) sum += net::layer_spectral_norm(delta, l) / norms[l];
    const double rhs = prefactor * sum;
    const double lhs = column_norms(outputs(moved, data.inputs()) - base).maxCoeff();
    if (lhs > rhs + relative_slack(rhs)) ++violations;
    if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
  }
  McResult r = make_result("neyshabur_perturbation", n, violations, 0.0,
                           McResult::Direction::none_allowed, seed.value);
  r.worst_ratio = worst;
  return r;
}

}  // namespace pacb::verify
