#include "pacb/pacbayes.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pacb::pacbayes {

namespace {

constexpr double kLn2 = std::numbers::ln2;

bool within(double lo, double hi) { return lo <= hi * (1.0 + 1e-12) + 1e-300; }

PsdSummary summarize(const Vector& eigenvalues, double complement, std::size_t multiplicity) {
  PsdSummary s;
  const double mult = static_cast<double>(multiplicity);
  s.trace = eigenvalues.sum() + mult * complement;
  s.fro = std::sqrt(eigenvalues.squaredNorm() + mult * complement * complement);
  s.spec = eigenvalues.size() > 0 ? eigenvalues.maxCoeff() : 0.0;
  if (multiplicity > 0) s.spec = std::max(s.spec, complement);
  s.spec = std::max(s.spec, 0.0);
  return s;
}

}  // namespace

double kappa() { return 1.0 + 2.0 * kLn2 + std::sqrt(4.0 * kLn2); }

double gamma_functional(double tr, double fro, double spec) {
  if (!(spec >= 0.0) || !within(spec, fro) || !within(fro, tr)) {
    throw std::invalid_argument("gamma_functional: expected 0 <= spec <= fro <= tr");
  }
  return tr + std::sqrt(4.0 * kLn2) * fro + 2.0 * kLn2 * spec;
}

PsdSummary covariance_summary(const SensitivityMatrix& sens, const SpectralForm& r) {
  const SpectralForm& g = sens.gram();
  if (g.dim() != r.dim()) throw std::invalid_argument("covariance_summary: dimension mismatch");
  if (r.rank() == 0) {
    return summarize(g.eigenvalues() * r.complement(), g.complement() * r.complement(),
                     g.complement_multiplicity());
  }
  if (g.rank() == 0) {
    return summarize(r.eigenvalues() * g.complement(), r.complement() * g.complement(),
                     r.complement_multiplicity());
  }
  if (g.shares_basis(r)) {
    return summarize(g.eigenvalues().cwiseProduct(r.eigenvalues()), g.complement() * r.complement(),
                     g.complement_multiplicity());
  }
  const Matrix root = SpectralForm(r.dim(), r.basis(), r.eigenvalues().cwiseSqrt(),
                                   std::sqrt(r.complement()))
                          .dense();
  const Matrix m = root * g.dense() * root;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return summarize(eig.eigenvalues().cwiseMax(0.0), 0.0, 0);
}

PsdSummary block_summary(const std::vector<PsdSummary>& blocks) {
  PsdSummary out;
  double fro2 = 0.0;
  for (const auto& b : blocks) {
    out.trace += b.trace;
    fro2 += b.fro * b.fro;
    out.spec = std::max(out.spec, b.spec);
  }
  out.fro = std::sqrt(fro2);
  return out;
}

double choose_sigma2(const SensitivitySet& approx, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("choose_sigma2: gamma must be positive");
  double total = 0.0;
  for (const auto& a : approx) total += a.trace_gram();
  if (!(total > 0.0)) throw std::invalid_argument("choose_sigma2: total sensitivity trace is zero");
  const double e2 = std::numbers::e * std::numbers::e;
  return gamma * gamma / (16.0 * e2 * kappa() * total);
}

double eta_squared(double w_norm2, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("eta_squared: gamma must be positive");
  return 16.0 * kappa() * w_norm2 / (gamma * gamma);
}

SpectralForm optimal_posterior(const SensitivityMatrix& sens, double eta2) {
  if (!(eta2 >= 0.0)) throw std::invalid_argument("optimal_posterior: eta2 must be >= 0");
  return sens.gram().map([eta2](double x) { return 1.0 / (1.0 + eta2 * std::max(x, 0.0)); });
}

double delta_fn(double x) {
  const double x2 = x * x;
  return std::log1p(x2) - x2 / (1.0 + x2);
}

PosteriorSpec make_posterior(const SensitivitySet& sens, const SensitivitySet& approx, double gamma,
                             double w_norm2) {
  PosteriorSpec post;
  post.sigma2 = choose_sigma2(approx, gamma);
  post.eta2 = eta_squared(w_norm2, gamma);
  post.covariances.reserve(sens.size());
  for (const auto& s : sens) post.covariances.push_back(optimal_posterior(s, post.eta2));
  return post;
}

KlBreakdown kl_divergence(double w_norm2, double sigma2, const std::vector<SpectralForm>& posts) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("kl_divergence: sigma2 must be positive");
  KlBreakdown kl;
  kl.weight_term = w_norm2 / (2.0 * sigma2);
  for (const auto& r : posts) {
    if (!(r.min_eigenvalue() > 0.0)) {
      throw std::invalid_argument("kl_divergence: posterior covariance is not positive definite");
    }
    kl.trace_term += r.trace();
    kl.logdet_term += r.log_det();
    kl.dim_term += static_cast<double>(r.dim());
  }
  const double rest = std::max(0.0, kl.trace_term - kl.logdet_term - kl.dim_term);
  kl.total = kl.weight_term + 0.5 * rest;
  return kl;
}

KlBreakdown relaxed_kl(double w_norm2, double sigma2, const SensitivitySet& sens, double eta2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("relaxed_kl: sigma2 must be positive");
  KlBreakdown kl;
  kl.weight_term = w_norm2 / (2.0 * sigma2);
  double trace = 0.0;
  for (const auto& s : sens) {
    trace += s.trace_gram();
    kl.dim_term += static_cast<double>(s.dim());
  }
  kl.trace_term = eta2 * trace;
  kl.total = kl.weight_term + 0.5 * kl.trace_term;
  return kl;
}

double objective_D(const Matrix& a, const Matrix& r, double eta2) {
  if (r.rows() != r.cols() || a.cols() != r.rows()) {
    throw std::invalid_argument("objective_D: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("objective_D: R is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return eta2 * (a * r * a.transpose()).trace() + r.trace() - logdet;
}

}  // namespace pacb::pacbayes
