#pragma once

#include "pacb/linalg.hpp"
#include "pacb/sensitivity.hpp"

#include <cstddef>
#include <vector>

namespace pacb::pacbayes {

using linalg::Matrix;
using linalg::SpectralForm;
using linalg::Vector;
using sensitivity::SensitivityMatrix;
using sensitivity::SensitivitySet;

/// κ = 1 + 2 ln 2 + √(4 ln 2).
double kappa();

/// Tr + √(4 ln 2)·‖·‖_F + 2 ln 2·‖·‖₂ for a PSD matrix summarized by its three
/// norms. Throws std::invalid_argument unless 0 ≤ spec ≤ fro ≤ tr.
double gamma_functional(double tr, double fro, double spec);

/// Trace, Frobenius norm and spectral norm of a PSD matrix.
struct PsdSummary {
  double trace = 0.0;
  double fro = 0.0;
  double spec = 0.0;
};

/// Summary of A·R·Aᵀ. Uses the shared eigenbasis of AᵀA and R when there is
/// one, otherwise forms R^{1/2}·AᵀA·R^{1/2} densely.
PsdSummary covariance_summary(const SensitivityMatrix& sens, const SpectralForm& r);
/// Summary of the block-diagonal matrix with the given blocks.
PsdSummary block_summary(const std::vector<PsdSummary>& blocks);

/// σ² = γ² / (16e²κ Σ_l Tr(Â_lᵀÂ_l)).
double choose_sigma2(const SensitivitySet& approx, double gamma);

/// η² = 16κ‖w‖₂²/γ².
double eta_squared(double w_norm2, double gamma);

/// R* = (I + η²AᵀA)⁻¹ in the eigenbasis of AᵀA.
SpectralForm optimal_posterior(const SensitivityMatrix& sens, double eta2);

/// δ(x) = log(1 + x²) − x²/(1 + x²).
double delta_fn(double x);

struct PosteriorSpec {
  double sigma2 = 0.0;
  double eta2 = 0.0;
  std::vector<SpectralForm> covariances;
};

/// σ² from the approximated sensitivities, R*_l from the learned ones.
PosteriorSpec make_posterior(const SensitivitySet& sens, const SensitivitySet& approx, double gamma,
                             double w_norm2);

struct KlBreakdown {
  double weight_term = 0.0;
  double trace_term = 0.0;
  double logdet_term = 0.0;
  double dim_term = 0.0;
  double total = 0.0;
};

/// KL(N(w, σ²R) ‖ N(0, σ²I)) with per-layer R_l.
KlBreakdown kl_divergence(double w_norm2, double sigma2, const std::vector<SpectralForm>& posts);

/// Upper bound using δ(x) ≤ x²: ‖w‖²/(2σ²) + ½η² Σ Tr(A_lᵀA_l).
KlBreakdown relaxed_kl(double w_norm2, double sigma2, const SensitivitySet& sens, double eta2);

/// 𝒟(R) = η²·Tr(A R Aᵀ) + Tr(R) − log det R for dense A and symmetric PD R.
double objective_D(const Matrix& a, const Matrix& r, double eta2);

}  // namespace pacb::pacbayes
