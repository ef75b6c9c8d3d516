#pragma once

#include "pacb/network.hpp"
#include "pacb/pacbayes.hpp"
#include "pacb/sensitivity.hpp"
#include "pacb/verify.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pacb::bounds {

using sensitivity::CircGain;
using sensitivity::Structure;
using sensitivity::ToeplitzSymbol;

enum class ComplexityKind { phi, phi_rn, phi_circ, phi_toep };

std::string_view to_string(ComplexityKind k);
ComplexityKind complexity_kind_for(Structure s);

/// value = product · sum · ratio.
struct ComplexityValue {
  ComplexityKind kind = ComplexityKind::phi;
  double value = 0.0;
  double product = 0.0;
  double sum = 0.0;
  double ratio = 1.0;
};

/**
 * Spectral complexity of a network.
 *
 * phi:      ∏‖W_l‖₂² · Σ ‖W_l‖_F²/‖W_l‖₂²
 * phi_rn:   ∏(‖W_l‖₂+1)² · Σ ‖W_l‖_F²/(‖W_l‖₂+1)²
 * phi_circ: ∏g_l² · Σ ‖w_l‖₂²/g_l² with g_l the circulant gain
 * phi_toep: (ψ_max/ψ_min)² · ∏‖w_l‖₁² · Σ ‖w_l‖₂²/‖w_l‖₁²
 */
ComplexityValue complexity(const net::Network& net, ComplexityKind kind,
                           const ToeplitzSymbol& symbol = ToeplitzSymbol::identity(),
                           CircGain circ = CircGain::normalized);

/// Asymptotic factor Δ(d, h, w): d²h²Φ (diagonal), d²h²Φ^rn (residual),
/// d²KΦ (low-rank), d²KΦ^circ (circulant), d²kΦ^toep (Toeplitz), with h the
/// widest layer, K the output count and k the kernel length.
double delta_factor(const net::Network& net, Structure s,
                    const ToeplitzSymbol& symbol = ToeplitzSymbol::identity(),
                    CircGain circ = CircGain::normalized);

/// Uniform cover of [(γ/2B)^{1/d}, (γ√m/2B)^{1/d}] at spacing 2·radius with
/// radius = (1/d)(γ/2B)^{1/d}.
struct BetaGrid {
  double beta_min = 0.0;
  double beta_max = 0.0;
  double radius = 0.0;
  std::vector<double> points;

  bool in_range(double beta) const;
  /// Nearest grid point index, ties toward the smaller point; empty when
  /// beta lies outside [beta_min, beta_max].
  std::optional<std::size_t> nearest(double beta) const;
};

BetaGrid beta_grid(double gamma, double radius, std::size_t depth, std::size_t m);

/// L̂ + 4√((KL + ln(6m·grid_size/δ))/(m−1)).
double pac_bayes_bound(double margin_loss, double kl, std::size_t m, std::size_t grid_size, double delta);

/// max_l (∏_{i≠l} g_i)^{1/(d−1)} over the grid gains: spectral norms, or
/// ‖W_l‖₂ + 1 for residual nets.
double grid_variable(const net::Network& net);

struct CertifyConfig {
  CircGain circ_gain = CircGain::normalized;
  ToeplitzSymbol symbol = ToeplitzSymbol::identity();
  std::optional<std::size_t> anchor_index;
  std::size_t mc_samples = 1000;
  std::uint64_t seed = 0;
  bool run_mc = true;
  /// Cap on samples evaluated through the network in the direct check; zero
  /// means every sample.
  std::size_t direct_samples = 0;
};

struct McDiagnostics {
  bool ran = false;
  verify::PerturbationConditionResult condition;
  verify::McResult concentration;
  bool pass = false;
};

/// Certificate recomputed under the other circulant gain convention.
struct CircAlternative {
  CircGain gain = CircGain::exact;
  double beta_hat = 0.0;
  double sigma2 = 0.0;
  double kl_total = 0.0;
  double final_bound = 0.0;
  bool trivial_flag = false;
};

struct BoundReport {
  Structure structure = Structure::diagonal;
  std::size_t m = 0;
  std::size_t depth = 0;
  double gamma = 0.0;
  double delta = 0.0;
  double radius = 0.0;
  std::uint64_t seed = 0;
  bool normalized = false;

  double empirical_margin_loss = 0.0;
  double beta = 0.0;
  double beta_hat = 0.0;
  BetaGrid grid;
  bool in_range = false;
  double sigma2 = 0.0;
  double eta2 = 0.0;
  double w_norm2 = 0.0;
  pacbayes::KlBreakdown kl;
  pacbayes::KlBreakdown kl_relaxed;
  ComplexityValue complexity;
  double final_bound = 1.0;
  double final_bound_relaxed = 1.0;
  double asymptotic_delta_factor = 0.0;
  bool trivial_flag = false;
  bool vacuous = false;
  McDiagnostics mc_diagnostics;

  CircGain circ_gain = CircGain::normalized;
  std::optional<CircAlternative> circ_alternative;
  std::optional<std::size_t> anchor_index;
  std::vector<std::size_t> lowrank_ranks;
  std::optional<sensitivity::SymbolExtrema> symbol;
  std::vector<std::string> notes;
};

BoundReport certify(const net::Network& net, const net::Dataset& data, double gamma, double delta,
                    Structure structure, const CertifyConfig& config = {});

/// Learned sensitivities A_l of the given structure for an already
/// normalized network.
sensitivity::SensitivitySet build_sensitivities(const net::Network& net, const net::Dataset& data,
                                                Structure structure, const CertifyConfig& config,
                                                std::vector<std::size_t>* lowrank_ranks = nullptr);

/// Normalized network, learned sensitivities and the posterior at the chosen
/// grid point; posterior is empty when the grid variable is out of range.
struct PipelineState {
  net::Network network;
  sensitivity::SensitivitySet sens;
  std::optional<pacbayes::PosteriorSpec> posterior;
  std::optional<std::size_t> anchor_index;
};

PipelineState prepare_pipeline(const net::Network& net, const net::Dataset& data, double gamma,
                               Structure structure, const CertifyConfig& config = {});

}  // namespace pacb::bounds
