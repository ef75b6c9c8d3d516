#pragma once

#include "pacb/linalg.hpp"
#include "pacb/network.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace pacb::sensitivity {

using linalg::Matrix;
using linalg::SpectralForm;
using linalg::Vector;

enum class Structure { diagonal, residual, lowrank, circulant, toeplitz };

std::string_view to_string(Structure s);
Structure parse_structure(std::string_view text);
/// Network kind each structure is defined for.
net::LayerKind required_kind(Structure s);

/// Gain convention for circulant layers: ‖V^H w‖_∞ with normalized V
/// or the exact spectral norm ‖circ(w)‖₂ = √h·‖V^H w‖_∞ (exact).
enum class CircGain { normalized, exact };

std::string_view to_string(CircGain g);
CircGain parse_circ_gain(std::string_view text);

/**
 * Generating function ψ(ω) of the Toeplitz matrix T used by the Toeplitz
 * sensitivity.
 *
 * Three families are supported: finite one-sided coefficients with
 * ψ(ω) = Σ t_i e^{-jiω}; the one-sided geometric sequence t_i = ρ^i with
 * ψ(ω) = 1/(1 - ρe^{-jω}); and the symmetric geometric sequence t_i = ρ^{|i|}
 * with ψ(ω) = (1 - ρ²)/(1 - 2ρ cos ω + ρ²).
 */
class ToeplitzSymbol {
 public:
  enum class Family { coefficients, geometric, symmetric_geometric };

  static ToeplitzSymbol identity();
  static ToeplitzSymbol from_coefficients(std::vector<double> t, std::size_t grid = 4096);
  static ToeplitzSymbol geometric(double rho, std::size_t grid = 4096);
  static ToeplitzSymbol symmetric_geometric(double rho, std::size_t grid = 4096);

  Family family() const { return family_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  double rho() const { return rho_; }
  std::size_t grid_resolution() const { return grid_; }

  std::complex<double> operator()(double omega) const;
  /// Entry T(r, c) of the generated Toeplitz matrix.
  double entry(std::ptrdiff_t r, std::ptrdiff_t c) const;
  /// Dense n×n section of T.
  Matrix matrix(std::size_t n) const;

 private:
  Family family_ = Family::coefficients;
  std::vector<double> coefficients_{1.0};
  double rho_ = 0.0;
  std::size_t grid_ = 4096;
};

struct SymbolExtrema {
  double psi_min = 0.0;
  double psi_max = 0.0;
  double argmin = 0.0;
  double argmax = 0.0;
  bool singular = false;
};

SymbolExtrema symbol_extrema(const ToeplitzSymbol& symbol);

/**
 * Structured per-layer sensitivity matrix A_l.
 *
 * Every form exposes its Gram matrix AᵀA as a SpectralForm in the layer's
 * parameter space, which is all the posterior and KL computations need.
 * weight_product() is the learned-weight factor ∏_{i≠l}(gain_i) folded into
 * the gains, so approximate() can swap it for β̂^{d-1}.
 */
class SensitivityMatrix {
 public:
  enum class Form { scalar_identity, lowrank, circulant_freq, toeplitz_factor, general };

  static SensitivityMatrix scalar_identity(std::size_t layer, std::size_t dim, double gain);
  /// A = V·diag(gains)·Vᵀ with orthonormal V (dim × r).
  static SensitivityMatrix lowrank(std::size_t layer, Matrix basis, Vector gains);
  /// A = gain·Q·Qᵀ with Q the real Fourier basis of K modes.
  static SensitivityMatrix circulant_freq(std::size_t layer, std::size_t size, std::size_t rank,
                                          double gain);
  /// A = scale·(T·P) where tp holds the product T·P.
  static SensitivityMatrix toeplitz_factor(std::size_t layer, double scale, Matrix tp);
  /// Arbitrary dense A.
  static SensitivityMatrix general(std::size_t layer, Matrix a);

  Form form() const { return form_; }
  std::size_t layer() const { return layer_; }
  std::size_t dim() const { return gram_.dim(); }
  std::size_t output_dim() const { return output_dim_; }
  double gain() const { return gain_; }
  const Vector& gains() const { return gains_; }
  const Matrix& basis() const { return basis_; }
  const Matrix& factor() const { return factor_; }
  double weight_product() const { return weight_product_; }
  const SpectralForm& gram() const { return gram_; }

  SensitivityMatrix with_weight_product(double product) const;
  SensitivityMatrix scaled(double factor) const;
  /// Records the weight product already folded into the gains.
  SensitivityMatrix tagged(double product) const {
    SensitivityMatrix s = *this;
    s.weight_product_ = product;
    return s;
  }

  Vector apply(const Vector& u) const;
  double trace_gram() const { return gram_.trace(); }
  Matrix dense() const;

 private:
  SensitivityMatrix() = default;

  Form form_ = Form::general;
  std::size_t layer_ = 0;
  std::size_t output_dim_ = 0;
  double gain_ = 0.0;
  Vector gains_;
  Matrix basis_;
  Matrix factor_;
  double weight_product_ = 1.0;
  SpectralForm gram_;
};

using SensitivitySet = std::vector<SensitivityMatrix>;

/// Per-layer gain g_l entering the ∏_{i≠l} products for a structure.
std::vector<double> layer_gains(const net::Network& net, Structure s, CircGain circ = CircGain::normalized);
/// ∏_{i≠l} gains_i for each l.
std::vector<double> leave_one_out_products(const std::vector<double>& gains);

SensitivitySet build_diagonal(const net::Network& net, double radius);
SensitivitySet build_residual(const net::Network& net, double radius);

struct LowRankInfo {
  std::vector<std::size_t> ranks;
};
SensitivitySet build_lowrank(const net::Network& net, double radius, const Vector& anchor,
                             LowRankInfo* info = nullptr);
SensitivitySet build_circulant(const net::Network& net, double radius,
                               CircGain circ = CircGain::normalized);
SensitivitySet build_toeplitz(const net::Network& net, double radius, const ToeplitzSymbol& symbol);

/// T·P for a size-h Toeplitz layer with kernel length k, without forming T.
Matrix toeplitz_times_vec_map(const ToeplitzSymbol& symbol, std::size_t h, std::size_t k);

struct ApproxContext {
  std::size_t depth = 2;
  Structure structure = Structure::diagonal;
  /// Multiplier turning β̂ into the layer gain (1/√h for normalized circulant gains).
  double gain_scale = 1.0;
};

/// Replaces the learned-weight product by (gain_scale·β̂)^{d-1}, or (β̂+1)^{d-1}
/// for residual nets.
SensitivityMatrix approximate(const SensitivityMatrix& sens, double beta_hat, const ApproxContext& ctx);
SensitivitySet approximate(const SensitivitySet& sens, double beta_hat, const ApproxContext& ctx);

}  // namespace pacb::sensitivity
