#pragma once

#include "pacb/linalg.hpp"
#include "pacb/network.hpp"
#include "pacb/pacbayes.hpp"
#include "pacb/sensitivity.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace pacb::verify {

using linalg::Matrix;
using linalg::RngSeed;
using linalg::Vector;

/// Binomial Monte Carlo outcome.
///
/// at_least: pass iff frequency ≥ threshold − 3·std_err.
/// at_most: pass iff frequency ≤ threshold + 3·std_err.
/// none_allowed: pass iff success_count == 0 (violation counting).
struct McResult {
  enum class Direction { at_least, at_most, none_allowed };

  std::string name;
  std::size_t n_samples = 0;
  std::size_t success_count = 0;
  double frequency = 0.0;
  double binomial_std_err = 0.0;
  double threshold = 0.0;
  Direction direction = Direction::at_least;
  bool pass = false;
  std::uint64_t seed = 0;
  /// Largest lhs/rhs ratio observed by inequality checks; zero otherwise.
  double worst_ratio = 0.0;
};

McResult make_result(std::string name, std::size_t n, std::size_t count, double threshold,
                     McResult::Direction direction, std::uint64_t seed);

struct PerturbationConditionResult {
  /// Event max_x ‖f_{w+u}(x) − f_w(x)‖_∞ < γ/4.
  McResult direct;
  /// Event Σ_l ‖A_l u_l‖₂² < γ²/16.
  McResult surrogate;
  bool chain_slack = false;
  bool pass = false;
};

/// Samples u_l ~ N(0, σ²R_l). A direct_samples value of zero evaluates the
/// direct event on every sample; otherwise only on the first direct_samples.
PerturbationConditionResult mc_perturbation_condition(const net::Network& net, const net::Dataset& data,
                                                      const pacbayes::PosteriorSpec& post,
                                                      const sensitivity::SensitivitySet& sens,
                                                      double gamma, std::size_t n, RngSeed seed,
                                                      std::size_t direct_samples = 0);

/// Region of weight perturbations a perturbation-bound check samples from.
///
/// Each U_l is drawn from an isotropic Gaussian direction in the layer's own
/// parameterization and rescaled so that its expanded spectral norm equals
/// r·fraction·gain_l/d with r ~ U(0, 1], where gain_l is ‖W_l‖₂ (‖W_l‖₂ + 1
/// for residual layers). anchor_only restricts the inequality to one input.
struct ValidityCondition {
  double fraction = 1.0;
  bool anchor_only = false;
  std::size_t anchor_index = 0;
};

ValidityCondition default_validity(sensitivity::Structure s, std::size_t anchor_index);

/// Counts violations of max_x ‖f_{w+u}(x) − f_w(x)‖_∞² ≤ Σ_l ‖A_l u_l‖₂².
McResult mc_perturbation_bound(const net::Network& net, const net::Dataset& data,
                               const sensitivity::SensitivitySet& sens, std::size_t n, RngSeed seed,
                               const ValidityCondition& validity);

/// Exceedance frequency of ‖Au‖₂² > Tr M + √(4t)‖M‖_F + 2t‖M‖₂ with
/// u ~ N(0, σ²R) and M = σ²·blockdiag(A_l R_l A_lᵀ), against e^{−t}.
McResult mc_concentration(const sensitivity::SensitivitySet& sens, const pacbayes::PosteriorSpec& post,
                          double t, std::size_t n, RngSeed seed);

/// Minimizes 𝒟(R) = η²Tr(ARAᵀ) + Tr R − log det R over symmetric PD R by
/// geodesic gradient steps with backtracking. Stops once the gradient
/// η²AᵀA + I − R⁻¹ has Frobenius norm below tol; throws
/// linalg::ConvergenceError carrying the last objective otherwise.
Matrix oracle_min_D(const Matrix& a, double eta2, int max_iter = 500, double tol = 1e-10);

/// Central differences of the network output with respect to vec(W_l).
Matrix finite_diff_jacobian(const net::Network& net, const Vector& x, std::size_t l, double eps);

/// Counts violations of ‖f_{w+u}(x) − f_w(x)‖₂ ≤ eB∏‖W_l‖₂ Σ‖U_l‖₂/‖W_l‖₂
/// over samples with ‖U_l‖₂ ≤ ‖W_l‖₂/d.
McResult check_neyshabur_perturbation(const net::Network& net, const net::Dataset& data, std::size_t n,
                                      RngSeed seed);

}  // namespace pacb::verify
