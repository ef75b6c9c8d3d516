#include "pacb/report.hpp"

#include <sstream>

namespace pacb::report {

namespace {

using io::format_number;
using io::Json;

std::string_view direction_name(verify::McResult::Direction d) {
  switch (d) {
    case verify::McResult::Direction::at_least: return "at_least";
    case verify::McResult::Direction::at_most: return "at_most";
    case verify::McResult::Direction::none_allowed: return "none_allowed";
  }
  return "unknown";
}

Json kl_json(const pacbayes::KlBreakdown& kl) {
  Json j;
  j["weight_term"] = kl.weight_term;
  j["trace_term"] = kl.trace_term;
  j["logdet_term"] = kl.logdet_term;
  j["dim_term"] = kl.dim_term;
  j["total"] = kl.total;
  return j;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string delta_formula(sensitivity::Structure s) {
  switch (s) {
    case sensitivity::Structure::diagonal: return "d^2 h^2 Phi";
    case sensitivity::Structure::residual: return "d^2 h^2 Phi_rn";
    case sensitivity::Structure::lowrank: return "d^2 K Phi";
    case sensitivity::Structure::circulant: return "d^2 K Phi_circ";
    case sensitivity::Structure::toeplitz: return "d^2 k Phi_toep";
  }
  return "";
}

constexpr sensitivity::Structure kAll[] = {
    sensitivity::Structure::diagonal, sensitivity::Structure::residual, sensitivity::Structure::lowrank,
    sensitivity::Structure::circulant, sensitivity::Structure::toeplitz};

void mc_row(std::ostringstream& md, const verify::McResult& r) {
  md << "| " << r.name << " | " << r.n_samples << " | " << format_number(r.frequency) << " | "
     << format_number(r.binomial_std_err) << " | " << direction_name(r.direction) << ' '
     << format_number(r.threshold) << " | " << (r.pass ? "pass" : "FAIL") << " |\n";
}

}  // namespace

Json mc_to_json(const verify::McResult& r) {
  Json j;
  j["name"] = r.name;
  j["n_samples"] = r.n_samples;
  j["success_count"] = r.success_count;
  j["frequency"] = r.frequency;
  j["binomial_std_err"] = r.binomial_std_err;
  j["threshold"] = r.threshold;
  j["direction"] = std::string(direction_name(r.direction));
  j["pass"] = r.pass;
  j["seed"] = r.seed;
  if (r.direction == verify::McResult::Direction::none_allowed) j["worst_ratio"] = r.worst_ratio;
  return j;
}

Json report_to_json(const bounds::BoundReport& r) {
  Json j;
  j["structure"] = std::string(sensitivity::to_string(r.structure));
  j["m"] = r.m;
  j["depth"] = r.depth;
  j["gamma"] = r.gamma;
  j["delta"] = r.delta;
  j["radius"] = r.radius;
  j["seed"] = r.seed;
  j["spectrally_normalized"] = r.normalized;
  j["empirical_margin_loss"] = r.empirical_margin_loss;
  j["beta"] = r.beta;
  j["beta_hat"] = r.beta_hat;
  Json grid;
  grid["beta_min"] = r.grid.beta_min;
  grid["beta_max"] = r.grid.beta_max;
  grid["radius"] = r.grid.radius;
  grid["size"] = r.grid.points.size();
  j["beta_grid"] = std::move(grid);
  j["in_range"] = r.in_range;
  j["sigma2"] = r.sigma2;
  j["eta2"] = r.eta2;
  j["w_norm2"] = r.w_norm2;
  Json kl;
  kl["exact"] = kl_json(r.kl);
  kl["relaxed"] = kl_json(r.kl_relaxed);
  j["kl"] = std::move(kl);
  Json cx;
  cx["kind"] = std::string(bounds::to_string(r.complexity.kind));
  cx["value"] = r.complexity.value;
  cx["product"] = r.complexity.product;
  cx["sum"] = r.complexity.sum;
  cx["ratio"] = r.complexity.ratio;
  j["complexity"] = std::move(cx);
  j["final_bound"] = r.final_bound;
  j["final_bound_relaxed"] = r.final_bound_relaxed;
  j["asymptotic_delta_factor"] = r.asymptotic_delta_factor;
  j["trivial_flag"] = r.trivial_flag;
  j["vacuous"] = r.vacuous;

  Json mc;
  mc["ran"] = r.mc_diagnostics.ran;
  if (r.mc_diagnostics.ran) {
    mc["perturbation_condition_direct"] = mc_to_json(r.mc_diagnostics.condition.direct);
    mc["perturbation_condition_surrogate"] = mc_to_json(r.mc_diagnostics.condition.surrogate);
    mc["surrogate_chain_slack"] = r.mc_diagnostics.condition.chain_slack;
    mc["concentration"] = mc_to_json(r.mc_diagnostics.concentration);
  }
  mc["pass"] = r.mc_diagnostics.pass;
  j["mc_diagnostics"] = std::move(mc);

  if (r.structure == sensitivity::Structure::circulant) {
    j["circ_gain"] = std::string(sensitivity::to_string(r.circ_gain));
  }
  if (r.circ_alternative) {
    Json alt;
    alt["circ_gain"] = std::string(sensitivity::to_string(r.circ_alternative->gain));
    alt["beta_hat"] = r.circ_alternative->beta_hat;
    alt["sigma2"] = r.circ_alternative->sigma2;
    alt["kl_total"] = r.circ_alternative->kl_total;
    alt["final_bound"] = r.circ_alternative->final_bound;
    alt["trivial_flag"] = r.circ_alternative->trivial_flag;
    j["circ_alternative"] = std::move(alt);
  }
  if (r.anchor_index) j["anchor_index"] = *r.anchor_index;
  if (!r.lowrank_ranks.empty()) j["lowrank_ranks"] = r.lowrank_ranks;
  if (r.symbol) {
    Json s;
    s["psi_min"] = r.symbol->psi_min;
    s["psi_max"] = r.symbol->psi_max;
    s["argmin"] = r.symbol->argmin;
    s["argmax"] = r.symbol->argmax;
    j["toeplitz_symbol"] = std::move(s);
  }
  j["notes"] = r.notes;
  return j;
}

std::string report_to_markdown(const bounds::BoundReport& r) {
  std::ostringstream md;
  md << "# Generalization certificate: " << sensitivity::to_string(r.structure) << "\n\n";
  md << "| field | value |\n|---|---|\n";
  md << "| samples m | " << r.m << " |\n";
  md << "| depth d | " << r.depth << " |\n";
  md << "| gamma | " << format_number(r.gamma) << " |\n";
  md << "| delta | " << format_number(r.delta) << " |\n";
  md << "| input radius B | " << format_number(r.radius) << " |\n";
  md << "| empirical margin loss | " << format_number(r.empirical_margin_loss) << " |\n";
  md << "| beta | " << format_number(r.beta) << " |\n";
  md << "| beta_hat | " << format_number(r.beta_hat) << " |\n";
  md << "| grid size | " << r.grid.points.size() << " |\n";
  md << "| sigma2 | " << format_number(r.sigma2) << " |\n";
  md << "| eta2 | " << format_number(r.eta2) << " |\n";
  md << "| KL (exact) | " << format_number(r.kl.total) << " |\n";
  md << "| KL (relaxed) | " << format_number(r.kl_relaxed.total) << " |\n";
  md << "| complexity " << bounds::to_string(r.complexity.kind) << " | " << format_number(r.complexity.value)
     << " |\n";
  md << "| final bound | " << format_number(r.final_bound) << " |\n";
  md << "| final bound (relaxed KL) | " << format_number(r.final_bound_relaxed) << " |\n";
  md << "| trivial | " << yes_no(r.trivial_flag) << " |\n";
  md << "| vacuous (bound >= 1) | " << yes_no(r.vacuous) << " |\n";
  if (r.circ_alternative) {
    md << "| circulant gain | " << sensitivity::to_string(r.circ_gain) << " |\n";
    md << "| bound with " << sensitivity::to_string(r.circ_alternative->gain) << " gain | "
       << format_number(r.circ_alternative->final_bound) << " |\n";
  }

  md << "\n## Asymptotic factor\n\n| structure | Delta(d, h, w) | value |\n|---|---|---|\n";
  for (auto s : kAll) {
    md << "| " << sensitivity::to_string(s) << " | " << delta_formula(s) << " | "
       << (s == r.structure ? format_number(r.asymptotic_delta_factor) : std::string("-")) << " |\n";
  }

  md << "\n## Monte Carlo diagnostics\n\n";
  if (!r.mc_diagnostics.ran) {
    md << "not run\n";
  } else {
    md << "| check | samples | frequency | std err | criterion | result |\n|---|---|---|---|---|---|\n";
    mc_row(md, r.mc_diagnostics.condition.direct);
    mc_row(md, r.mc_diagnostics.condition.surrogate);
    mc_row(md, r.mc_diagnostics.concentration);
    md << "\noverall: " << (r.mc_diagnostics.pass ? "pass" : "FAIL") << "\n";
  }
  if (!r.notes.empty()) {
    md << "\n## Notes\n\n";
    for (const auto& n : r.notes) md << "- " << n << "\n";
  }
  return md.str();
}

std::string comparison_markdown(const std::vector<bounds::BoundReport>& reports) {
  std::ostringstream md;
  md << "# Structure comparison\n\n";
  md << "| structure | Delta(d, h, w) | Delta value | KL (exact) | final bound | trivial | mc |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    md << "| " << sensitivity::to_string(r.structure) << " | " << delta_formula(r.structure) << " | "
       << format_number(r.asymptotic_delta_factor) << " | " << format_number(r.kl.total) << " | "
       << format_number(r.final_bound) << " | " << yes_no(r.trivial_flag) << " | "
       << (r.mc_diagnostics.ran ? (r.mc_diagnostics.pass ? "pass" : "FAIL") : "not run") << " |\n";
  }
  return md.str();
}

}  // namespace pacb::report
