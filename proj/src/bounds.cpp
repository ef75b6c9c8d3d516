#include "pacb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pacb::bounds {

namespace {

double square(double x) { return x * x; }

struct Core {
  double beta = 0.0;
  double beta_hat = 0.0;
  bool in_range = false;
  double sigma2 = 0.0;
  double eta2 = 0.0;
  pacbayes::PosteriorSpec post;
  pacbayes::KlBreakdown kl;
  pacbayes::KlBreakdown kl_relaxed;
  double final_bound = 1.0;
  double final_bound_relaxed = 1.0;
};

Core run_core(const net::Network& net, const sensitivity::SensitivitySet& sens, const BetaGrid& grid,
              double margin_loss, std::size_t m, double gamma, double delta, Structure structure,
              CircGain circ) {
  Core core;
  const bool residual = structure == Structure::residual;
  const double s = grid_variable(net);
  core.beta = residual ? s - 1.0 : s;
  const auto idx = grid.nearest(s);
  if (!idx) return core;
  core.in_range = true;
  const double s_hat = grid.points[*idx];
  core.beta_hat = residual ? s_hat - 1.0 : s_hat;

  sensitivity::ApproxContext ctx;
  ctx.depth = net.depth();
  ctx.structure = structure;
  if (structure == Structure::circulant && circ == CircGain::normalized) {
    ctx.gain_scale = 1.0 / std::sqrt(static_cast<double>(net.input_dim()));
  }
  const auto approx = sensitivity::approximate(sens, core.beta_hat, ctx);
  const double w_norm2 = net.parameter_norm2();
  core.post = pacbayes::make_posterior(sens, approx, gamma, w_norm2);
  core.sigma2 = core.post.sigma2;
  core.eta2 = core.post.eta2;
  core.kl = pacbayes::kl_divergence(w_norm2, core.sigma2, core.post.covariances);
  core.kl_relaxed = pacbayes::relaxed_kl(w_norm2, core.sigma2, sens, core.eta2);
  core.final_bound = pac_bayes_bound(margin_loss, core.kl.total, m, grid.points.size(), delta);
  core.final_bound_relaxed =
      pac_bayes_bound(margin_loss, core.kl_relaxed.total, m, grid.points.size(), delta);
  return core;
}

}  // namespace

std::string_view to_string(ComplexityKind k) {
  switch (k) {
    case ComplexityKind::phi: return "phi";
    case ComplexityKind::phi_rn: return "phi_rn";
    case ComplexityKind::phi_circ: return "phi_circ";
    case ComplexityKind::phi_toep: return "phi_toep";
  }
  return "unknown";
}

ComplexityKind complexity_kind_for(Structure s) {
  switch (s) {
    case Structure::diagonal:
    case Structure::lowrank: return ComplexityKind::phi;
    case Structure::residual: return ComplexityKind::phi_rn;
    case Structure::circulant: return ComplexityKind::phi_circ;
    case Structure::toeplitz: return ComplexityKind::phi_toep;
  }
  return ComplexityKind::phi;
}

ComplexityValue complexity(const net::Network& net, ComplexityKind kind, const ToeplitzSymbol& symbol,
                           CircGain circ) {
  ComplexityValue out;
  out.kind = kind;
  std::vector<double> gains;
  std::vector<double> numerators;
  switch (kind) {
    case ComplexityKind::phi:
    case ComplexityKind::phi_rn:
      if (net.is_structured()) throw std::invalid_argument("complexity: phi needs a dense or residual net");
      gains = net::layer_spectral_norms(net);
      if (kind == ComplexityKind::phi_rn) {
        for (double& g : gains) g += 1.0;
      }
      for (std::size_t l = 0; l < net.depth(); ++l) numerators.push_back(net.weight(l).squaredNorm());
      break;
    case ComplexityKind::phi_circ:
      if (net.kind() != net::LayerKind::circulant) {
        throw std::invalid_argument("complexity: phi_circ needs a circulant net");
      }
      gains = sensitivity::layer_gains(net, Structure::circulant, circ);
      for (std::size_t l = 0; l < net.depth(); ++l) numerators.push_back(net.parameters(l).squaredNorm());
      break;
    case ComplexityKind::phi_toep: {
      if (net.kind() != net::LayerKind::toeplitz) {
        throw std::invalid_argument("complexity: phi_toep needs a Toeplitz net");
      }
      for (std::size_t l = 0; l < net.depth(); ++l) {
        const auto w = net.parameters(l);
        gains.push_back(w.lpNorm<1>());
        numerators.push_back(w.squaredNorm());
      }
      const auto ext = sensitivity::symbol_extrema(symbol);
      if (ext.singular) throw std::invalid_argument("complexity: Toeplitz symbol is singular");
      out.ratio = square(ext.psi_max / ext.psi_min);
      break;
    }
  }
  out.product = 1.0;
  out.sum = 0.0;
  for (std::size_t l = 0; l < gains.size(); ++l) {
    if (gains[l] == 0.0) throw std::invalid_argument("complexity: zero layer norm");
    out.product *= square(gains[l]);
    out.sum += numerators[l] / square(gains[l]);
  }
  out.value = out.product * out.sum * out.ratio;
  return out;
}

double delta_factor(const net::Network& net, Structure s, const ToeplitzSymbol& symbol, CircGain circ) {
  if (net.kind() != sensitivity::required_kind(s)) {
    throw std::invalid_argument("delta_factor: structure does not match network kind");
  }
  const double d2 = square(static_cast<double>(net.depth()));
  const double phi = complexity(net, complexity_kind_for(s), symbol, circ).value;
  switch (s) {
    case Structure::diagonal:
    case Structure::residual: return d2 * square(static_cast<double>(net.max_width())) * phi;
    case Structure::lowrank:
    case Structure::circulant: return d2 * static_cast<double>(net.output_dim()) * phi;
    case Structure::toeplitz: return d2 * static_cast<double>(net.kernel_length()) * phi;
  }
  return 0.0;
}

bool BetaGrid::in_range(double beta) const {
  return beta >= beta_min * (1.0 - 1e-12) && beta <= beta_max * (1.0 + 1e-12);
}

std::optional<std::size_t> BetaGrid::nearest(double beta) const {
  if (points.empty() || !in_range(beta)) return std::nullopt;
  if (points.size() == 1 || radius <= 0.0) return 0;
  const double pos = std::max(0.0, (beta - beta_min) / (2.0 * radius));
  auto idx = static_cast<std::size_t>(std::floor(pos));
  if (pos - std::floor(pos) > 0.5) ++idx;
  return std::min(idx, points.size() - 1);
}

BetaGrid beta_grid(double gamma, double radius, std::size_t depth, std::size_t m) {
  if (!(gamma > 0.0) || !(radius > 0.0)) throw std::invalid_argument("beta_grid: gamma and B must be positive");
  if (depth == 0 || m == 0) throw std::invalid_argument("beta_grid: depth and m must be positive");
  const double d = static_cast<double>(depth);
  BetaGrid g;
  g.beta_min = std::pow(gamma / (2.0 * radius), 1.0 / d);
  g.beta_max = std::pow(gamma * std::sqrt(static_cast<double>(m)) / (2.0 * radius), 1.0 / d);
  g.radius = g.beta_min / d;
  const double span = (g.beta_max - g.beta_min) / (2.0 * g.radius);
  const auto steps = static_cast<std::size_t>(std::max(0.0, std::ceil(span - 1e-12)));
  for (std::size_t i = 0; i <= steps; ++i) {
    g.points.push_back(g.beta_min + 2.0 * g.radius * static_cast<double>(i));
  }
  return g;
}

double pac_bayes_bound(double margin_loss, double kl, std::size_t m, std::size_t grid_size, double delta) {
  if (m < 2) throw std::invalid_argument("pac_bayes_bound: need m >= 2");
  if (!(delta > 0.0)) throw std::invalid_argument("pac_bayes_bound: delta must be positive");
  const double md = static_cast<double>(m);
  const double log_term = std::log(6.0 * md * static_cast<double>(grid_size) / delta);
  return margin_loss + 4.0 * std::sqrt((kl + log_term) / (md - 1.0));
}

double grid_variable(const net::Network& net) {
  if (net.depth() < 2) throw std::invalid_argument("grid_variable: need depth >= 2");
  auto gains = net::layer_spectral_norms(net);
  if (net.kind() == net::LayerKind::residual) {
    for (double& g : gains) g += 1.0;
  }
  const auto products = sensitivity::leave_one_out_products(gains);
  const double exponent = 1.0 / static_cast<double>(net.depth() - 1);
  double best = 0.0;
  for (double p : products) best = std::max(best, std::pow(p, exponent));
  return best;
}

sensitivity::SensitivitySet build_sensitivities(const net::Network& net, const net::Dataset& data,
                                                Structure structure, const CertifyConfig& config,
                                                std::vector<std::size_t>* lowrank_ranks) {
  const double b = data.radius();
  switch (structure) {
    case Structure::diagonal: return sensitivity::build_diagonal(net, b);
    case Structure::residual: return sensitivity::build_residual(net, b);
    case Structure::lowrank: {
      const std::size_t anchor = config.anchor_index.value_or(data.max_norm_index());
      if (anchor >= data.size()) throw std::out_of_range("certify: anchor index out of range");
      sensitivity::LowRankInfo info;
      auto out = sensitivity::build_lowrank(net, b, data.input(anchor), &info);
      if (lowrank_ranks) *lowrank_ranks = info.ranks;
      return out;
    }
    case Structure::circulant: return sensitivity::build_circulant(net, b, config.circ_gain);
    case Structure::toeplitz: return sensitivity::build_toeplitz(net, b, config.symbol);
  }
  throw std::invalid_argument("certify: unknown structure");
}

namespace {

void check_inputs(const net::Network& net, const net::Dataset& data, double gamma, Structure structure) {
  if (net.kind() != sensitivity::required_kind(structure)) {
    throw std::invalid_argument("certify: structure " + std::string(sensitivity::to_string(structure)) +
                                " needs a " +
                                std::string(net::to_string(sensitivity::required_kind(structure))) +
                                " network");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("certify: gamma must be positive");
  if (data.size() < 2) throw std::invalid_argument("certify: need at least two samples");
  if (data.input_dim() != net.input_dim()) throw std::invalid_argument("certify: input dimension mismatch");
}

}  // namespace

PipelineState prepare_pipeline(const net::Network& net, const net::Dataset& data, double gamma,
                               Structure structure, const CertifyConfig& config) {
  check_inputs(net, data, gamma, structure);
  auto normalized = net::spectral_normalize(net);
  const net::Network& w = normalized.network;
  auto sens = build_sensitivities(w, data, structure, config);
  const auto grid = beta_grid(gamma, data.radius(), w.depth(), data.size());
  const double loss = net::empirical_margin_loss(w, data, gamma);
  const Core core = run_core(w, sens, grid, loss, data.size(), gamma, 0.05, structure, config.circ_gain);
  std::optional<pacbayes::PosteriorSpec> post;
  if (core.in_range) post = core.post;
  std::optional<std::size_t> anchor;
  if (structure == Structure::lowrank) anchor = config.anchor_index.value_or(data.max_norm_index());
  return PipelineState{std::move(normalized.network), std::move(sens), std::move(post), anchor};
}

BoundReport certify(const net::Network& net, const net::Dataset& data, double gamma, double delta,
                    Structure structure, const CertifyConfig& config) {
  check_inputs(net, data, gamma, structure);
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("certify: delta must lie in (0, 1)");

  BoundReport rep;
  rep.structure = structure;
  rep.m = data.size();
  rep.depth = net.depth();
  rep.gamma = gamma;
  rep.delta = delta;
  rep.radius = data.radius();
  rep.seed = config.seed;
  rep.circ_gain = config.circ_gain;

  const auto normalized = net::spectral_normalize(net);
  const net::Network& w = normalized.network;
  rep.normalized = normalized.rescaled;
  rep.empirical_margin_loss = net::empirical_margin_loss(w, data, gamma);
  rep.w_norm2 = w.parameter_norm2();
  rep.grid = beta_grid(gamma, data.radius(), w.depth(), data.size());

  if (structure == Structure::lowrank) {
    rep.anchor_index = config.anchor_index.value_or(data.max_norm_index());
  }
  if (structure == Structure::toeplitz) rep.symbol = sensitivity::symbol_extrema(config.symbol);

  rep.complexity = complexity(w, complexity_kind_for(structure), config.symbol, config.circ_gain);
  rep.asymptotic_delta_factor = delta_factor(w, structure, config.symbol, config.circ_gain);

  const auto sens = build_sensitivities(w, data, structure, config, &rep.lowrank_ranks);
  const Core core = run_core(w, sens, rep.grid, rep.empirical_margin_loss, rep.m, gamma, delta,
                             structure, config.circ_gain);
  rep.beta = core.beta;
  rep.in_range = core.in_range;
  if (!core.in_range) {
    rep.trivial_flag = true;
    rep.vacuous = true;
    rep.final_bound = 1.0;
    rep.final_bound_relaxed = 1.0;
    rep.notes.push_back("spectral scale outside the nontrivial range; certificate set to 1");
  } else {
    rep.beta_hat = core.beta_hat;
    rep.sigma2 = core.sigma2;
    rep.eta2 = core.eta2;
    rep.kl = core.kl;
    rep.kl_relaxed = core.kl_relaxed;
    rep.final_bound = core.final_bound;
    rep.final_bound_relaxed = core.final_bound_relaxed;
    rep.vacuous = rep.final_bound >= 1.0;
  }

  if (structure == Structure::circulant) {
    CertifyConfig other = config;
    other.circ_gain = config.circ_gain == CircGain::normalized ? CircGain::exact : CircGain::normalized;
    const auto other_sens = build_sensitivities(w, data, structure, other);
    const Core alt = run_core(w, other_sens, rep.grid, rep.empirical_margin_loss, rep.m, gamma, delta,
                              structure, other.circ_gain);
    CircAlternative a;
    a.gain = other.circ_gain;
    a.beta_hat = alt.beta_hat;
    a.sigma2 = alt.sigma2;
    a.kl_total = alt.kl.total;
    a.final_bound = alt.final_bound;
    a.trivial_flag = !alt.in_range;
    rep.circ_alternative = a;
    rep.notes.push_back(
        "layer gains use the leave-one-out product over i != l; the complexity uses prod g_l^2 * "
        "sum ||w_l||^2 / g_l^2");
  }
  if (structure == Structure::residual) {
    rep.notes.push_back("residual grid runs over beta + 1; the last layer has no skip connection");
  }
  if (net.is_structured()) {
    double expanded = 0.0;
    for (std::size_t l = 0; l < w.depth(); ++l) expanded += w.weight(l).squaredNorm();
    rep.notes.push_back("weight term uses kernel-space ||w||^2; expanded-weight alternative ||W||_F^2 = " +
                        std::to_string(expanded));
  }
  if (structure == Structure::lowrank && !rep.lowrank_ranks.empty()) {
    for (std::size_t r : rep.lowrank_ranks) {
      if (r < w.output_dim()) {
        rep.notes.push_back("a layer Jacobian at the anchor has rank below K");
        break;
      }
    }
  }

  if (config.run_mc && core.in_range) {
    rep.mc_diagnostics.ran = true;
    const linalg::RngSeed seed{config.seed};
    rep.mc_diagnostics.condition = verify::mc_perturbation_condition(
        w, data, core.post, sens, gamma, config.mc_samples, seed, config.direct_samples);
    rep.mc_diagnostics.concentration = verify::mc_concentration(
        sens, core.post, std::numbers::ln2, config.mc_samples, seed.offset(0x100000000ULL));
    rep.mc_diagnostics.pass = rep.mc_diagnostics.condition.pass && rep.mc_diagnostics.concentration.pass;
    if (rep.mc_diagnostics.condition.chain_slack) rep.notes.push_back("surrogate-chain slack");
  }
  return rep;
}

}  // namespace pacb::bounds
