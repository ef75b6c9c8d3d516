#include "pacb/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pacb::sensitivity {

namespace {

constexpr double kE = std::numbers::e;

double golden_section(auto&& f, double lo, double hi, double tol) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

void require_kind(const net::Network& net, net::LayerKind kind, std::string_view who) {
  if (net.kind() != kind) {
    throw std::invalid_argument(std::string(who) + ": expects a " + std::string(net::to_string(kind)) +
                                " network, got " + std::string(net::to_string(net.kind())));
  }
}

void require_nonzero(const std::vector<double>& norms, std::string_view who) {
  for (std::size_t l = 0; l < norms.size(); ++l) {
    if (norms[l] == 0.0) {
      throw std::invalid_argument(std::string(who) + ": layer " + std::to_string(l) +
                                  " has zero spectral norm");
    }
  }
}

}  // namespace

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::diagonal: return "diagonal";
    case Structure::residual: return "residual";
    case Structure::lowrank: return "lowrank";
    case Structure::circulant: return "circulant";
    case Structure::toeplitz: return "toeplitz";
  }
  return "unknown";
}

Structure parse_structure(std::string_view text) {
  if (text == "diagonal") return Structure::diagonal;
  if (text == "residual") return Structure::residual;
  if (text == "lowrank" || text == "low-rank") return Structure::lowrank;
  if (text == "circulant") return Structure::circulant;
  if (text == "toeplitz") return Structure::toeplitz;
  throw std::invalid_argument("unknown structure: " + std::string(text));
}

net::LayerKind required_kind(Structure s) {
  switch (s) {
    case Structure::diagonal:
    case Structure::lowrank: return net::LayerKind::dense;
    case Structure::residual: return net::LayerKind::residual;
    case Structure::circulant: return net::LayerKind::circulant;
    case Structure::toeplitz: return net::LayerKind::toeplitz;
  }
  return net::LayerKind::dense;
}

std::string_view to_string(CircGain g) { return g == CircGain::normalized ? "normalized" : "exact"; }

CircGain parse_circ_gain(std::string_view text) {
  if (text == "normalized") return CircGain::normalized;
  if (text == "exact") return CircGain::exact;
  throw std::invalid_argument("unknown circulant gain convention: " + std::string(text));
}

ToeplitzSymbol ToeplitzSymbol::identity() { return from_coefficients({1.0}); }

ToeplitzSymbol ToeplitzSymbol::from_coefficients(std::vector<double> t, std::size_t grid) {
  if (t.empty()) throw std::invalid_argument("ToeplitzSymbol: empty coefficient list");
  ToeplitzSymbol s;
  s.family_ = Family::coefficients;
  s.coefficients_ = std::move(t);
  s.grid_ = grid;
  return s;
}

ToeplitzSymbol ToeplitzSymbol::geometric(double rho, std::size_t grid) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("ToeplitzSymbol: need 0 <= rho < 1");
  ToeplitzSymbol s;
  s.family_ = Family::geometric;
  s.coefficients_.clear();
  s.rho_ = rho;
  s.grid_ = grid;
  return s;
}

ToeplitzSymbol ToeplitzSymbol::symmetric_geometric(double rho, std::size_t grid) {
  ToeplitzSymbol s = geometric(rho, grid);
  s.family_ = Family::symmetric_geometric;
  return s;
}

std::complex<double> ToeplitzSymbol::operator()(double omega) const {
  switch (family_) {
    case Family::coefficients: {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < coefficients_.size(); ++i) {
        acc += coefficients_[i] * std::polar(1.0, -static_cast<double>(i) * omega);
      }
      return acc;
    }
    case Family::geometric: return 1.0 / (1.0 - rho_ * std::polar(1.0, -omega));
    case Family::symmetric_geometric:
      return (1.0 - rho_ * rho_) / (1.0 - 2.0 * rho_ * std::cos(omega) + rho_ * rho_);
  }
  return 0.0;
}

double ToeplitzSymbol::entry(std::ptrdiff_t r, std::ptrdiff_t c) const {
  const std::ptrdiff_t off = c - r;
  switch (family_) {
    case Family::coefficients:
      if (off < 0 || off >= static_cast<std::ptrdiff_t>(coefficients_.size())) return 0.0;
      return coefficients_[static_cast<std::size_t>(off)];
    case Family::geometric: return off < 0 ? 0.0 : std::pow(rho_, static_cast<double>(off));
    case Family::symmetric_geometric: return std::pow(rho_, static_cast<double>(std::abs(off)));
  }
  return 0.0;
}

Matrix ToeplitzSymbol::matrix(std::size_t n) const {
  const auto size = static_cast<Eigen::Index>(n);
  Matrix t(size, size);
  for (Eigen::Index r = 0; r < size; ++r) {
    for (Eigen::Index c = 0; c < size; ++c) t(r, c) = entry(r, c);
  }
  return t;
}

SymbolExtrema symbol_extrema(const ToeplitzSymbol& symbol) {
  const std::size_t n = symbol.grid_resolution();
  if (n < 4096) throw std::invalid_argument("symbol_extrema: grid resolution must be >= 4096");
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  auto magnitude = [&](double w) { return std::abs(symbol(w)); };

  std::size_t imin = 0;
  std::size_t imax = 0;
  double vmin = INFINITY;
  double vmax = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = magnitude(step * static_cast<double>(i));
    if (v < vmin) {
      vmin = v;
      imin = i;
    }
    if (v > vmax) {
      vmax = v;
      imax = i;
    }
  }

  SymbolExtrema out;
  out.psi_min = vmin;
  out.argmin = step * static_cast<double>(imin);
  out.psi_max = vmax;
  out.argmax = step * static_cast<double>(imax);

  const double wmin = golden_section(magnitude, out.argmin - step, out.argmin + step, 1e-8);
  if (magnitude(wmin) < out.psi_min) {
    out.psi_min = magnitude(wmin);
    out.argmin = wmin;
  }
  auto negated = [&](double w) { return -magnitude(w); };
  const double wmax = golden_section(negated, out.argmax - step, out.argmax + step, 1e-8);
  if (magnitude(wmax) > out.psi_max) {
    out.psi_max = magnitude(wmax);
    out.argmax = wmax;
  }
  out.singular = out.psi_min < 1e-12;
  return out;
}

SensitivityMatrix SensitivityMatrix::scalar_identity(std::size_t layer, std::size_t dim, double gain) {
  if (!(gain >= 0.0)) throw std::invalid_argument("scalar_identity: gain must be >= 0");
  SensitivityMatrix s;
  s.form_ = Form::scalar_identity;
  s.layer_ = layer;
  s.output_dim_ = dim;
  s.gain_ = gain;
  s.gram_ = SpectralForm::scalar(dim, gain * gain);
  return s;
}

SensitivityMatrix SensitivityMatrix::lowrank(std::size_t layer, Matrix basis, Vector gains) {
  if (basis.cols() != gains.size()) throw std::invalid_argument("lowrank: basis/gain mismatch");
  if (gains.size() > 0 && gains.minCoeff() < 0.0) throw std::invalid_argument("lowrank: negative gain");
  SensitivityMatrix s;
  s.form_ = Form::lowrank;
  s.layer_ = layer;
  const auto dim = static_cast<std::size_t>(basis.rows());
  s.output_dim_ = dim;
  s.gains_ = std::move(gains);
  s.basis_ = std::move(basis);
  s.gram_ = SpectralForm(dim, s.basis_, s.gains_.cwiseAbs2(), 0.0);
  return s;
}

SensitivityMatrix SensitivityMatrix::circulant_freq(std::size_t layer, std::size_t size,
                                                    std::size_t rank, double gain) {
  if (!(gain >= 0.0)) throw std::invalid_argument("circulant_freq: gain must be >= 0");
  SensitivityMatrix s;
  s.form_ = Form::circulant_freq;
  s.layer_ = layer;
  s.output_dim_ = size;
  s.gain_ = gain;
  s.basis_ = linalg::real_fourier_basis(size, rank);
  s.gram_ = SpectralForm(size, s.basis_, Vector::Constant(s.basis_.cols(), gain * gain), 0.0);
  return s;
}

SensitivityMatrix SensitivityMatrix::toeplitz_factor(std::size_t layer, double scale, Matrix tp) {
  if (!(scale >= 0.0)) throw std::invalid_argument("toeplitz_factor: scale must be >= 0");
  SensitivityMatrix s;
  s.form_ = Form::toeplitz_factor;
  s.layer_ = layer;
  s.output_dim_ = static_cast<std::size_t>(tp.rows());
  s.gain_ = scale;
  s.factor_ = std::move(tp);
  s.gram_ = SpectralForm::from_symmetric(scale * scale * (s.factor_.transpose() * s.factor_));
  return s;
}

SensitivityMatrix SensitivityMatrix::general(std::size_t layer, Matrix a) {
  SensitivityMatrix s;
  s.form_ = Form::general;
  s.layer_ = layer;
  s.output_dim_ = static_cast<std::size_t>(a.rows());
  s.gain_ = 1.0;
  s.factor_ = std::move(a);
  s.gram_ = SpectralForm::from_symmetric(s.factor_.transpose() * s.factor_);
  return s;
}

SensitivityMatrix SensitivityMatrix::scaled(double factor) const {
  if (!(factor >= 0.0)) throw std::invalid_argument("SensitivityMatrix: negative scale");
  SensitivityMatrix s = *this;
  s.gain_ *= factor;
  s.gains_ *= factor;
  const double f2 = factor * factor;
  s.gram_ = gram_.map([f2](double x) { return f2 * x; });
  return s;
}

SensitivityMatrix SensitivityMatrix::with_weight_product(double product) const {
  if (weight_product_ == 0.0) {
    throw std::invalid_argument("SensitivityMatrix: cannot rescale a zero weight product");
  }
  SensitivityMatrix s = scaled(product / weight_product_);
  s.weight_product_ = product;
  return s;
}

Vector SensitivityMatrix::apply(const Vector& u) const {
  if (static_cast<std::size_t>(u.size()) != dim()) {
    throw std::invalid_argument("SensitivityMatrix::apply: dimension mismatch");
  }
  switch (form_) {
    case Form::scalar_identity: return gain_ * u;
    case Form::lowrank: return basis_ * gains_.cwiseProduct(basis_.transpose() * u);
    case Form::circulant_freq: return gain_ * (basis_ * (basis_.transpose() * u));
    case Form::toeplitz_factor:
    case Form::general: return gain_ * (factor_ * u);
  }
  return {};
}

Matrix SensitivityMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(dim());
  switch (form_) {
    case Form::scalar_identity: return gain_ * Matrix::Identity(n, n);
    case Form::lowrank: return basis_ * gains_.asDiagonal() * basis_.transpose();
    case Form::circulant_freq: return gain_ * basis_ * basis_.transpose();
    case Form::toeplitz_factor:
    case Form::general: return gain_ * factor_;
  }
  return {};
}

std::vector<double> layer_gains(const net::Network& net, Structure s, CircGain circ) {
  auto norms = net::layer_spectral_norms(net);
  if (s == Structure::residual) {
    for (double& n : norms) n += 1.0;
  } else if (s == Structure::circulant && circ == CircGain::normalized) {
    const double root_h = std::sqrt(static_cast<double>(net.input_dim()));
    for (double& n : norms) n /= root_h;
  }
  return norms;
}

std::vector<double> leave_one_out_products(const std::vector<double>& gains) {
  std::vector<double> out(gains.size(), 1.0);
  for (std::size_t l = 0; l < gains.size(); ++l) {
    for (std::size_t i = 0; i < gains.size(); ++i) {
      if (i != l) out[l] *= gains[i];
    }
  }
  return out;
}

SensitivitySet build_diagonal(const net::Network& net, double radius) {
  require_kind(net, net::LayerKind::dense, "build_diagonal");
  if (!(radius >= 0.0)) throw std::invalid_argument("build_diagonal: radius must be >= 0");
  const auto gains = layer_gains(net, Structure::diagonal);
  require_nonzero(gains, "build_diagonal");
  const auto products = leave_one_out_products(gains);
  const double prefactor = kE * std::sqrt(static_cast<double>(net.depth())) * radius;
  SensitivitySet out;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto s = SensitivityMatrix::scalar_identity(l, net.parameter_count(l), prefactor * products[l]);
    out.push_back(s.tagged(products[l]));
  }
  return out;
}

SensitivitySet build_residual(const net::Network& net, double radius) {
  require_kind(net, net::LayerKind::residual, "build_residual");
  if (!(radius >= 0.0)) throw std::invalid_argument("build_residual: radius must be >= 0");
  const auto products = leave_one_out_products(layer_gains(net, Structure::residual));
  const double prefactor = kE * std::sqrt(static_cast<double>(net.depth())) * radius;
  SensitivitySet out;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto s = SensitivityMatrix::scalar_identity(l, net.parameter_count(l), prefactor * products[l]);
    out.push_back(s.tagged(products[l]));
  }
  return out;
}

SensitivitySet build_lowrank(const net::Network& net, double radius, const Vector& anchor,
                             LowRankInfo* info) {
  require_kind(net, net::LayerKind::dense, "build_lowrank");
  if (!(radius >= 0.0)) throw std::invalid_argument("build_lowrank: radius must be >= 0");
  if (static_cast<std::size_t>(anchor.size()) != net.input_dim()) {
    throw std::invalid_argument("build_lowrank: anchor dimension mismatch");
  }
  if (anchor.norm() > radius * (1.0 + 1e-12)) {
    throw std::invalid_argument("build_lowrank: anchor lies outside the input ball");
  }
  const auto gains = layer_gains(net, Structure::lowrank);
  require_nonzero(gains, "build_lowrank");
  const auto products = leave_one_out_products(gains);
  const double prefactor = std::sqrt(static_cast<double>(net.depth())) * radius;
  if (info) info->ranks.clear();

  SensitivitySet out;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix jac = net::layer_jacobian(net, anchor, l);
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff =
        top * 1e-12 * static_cast<double>(std::max(jac.rows(), jac.cols()));
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff && top > 0.0) ++rank;
    rank = std::min<Eigen::Index>(rank, static_cast<Eigen::Index>(net.output_dim()));

    Matrix basis = svd.matrixV().leftCols(rank);
    Vector g = Vector::Constant(rank, prefactor * products[l]);
    auto s = SensitivityMatrix::lowrank(l, std::move(basis), std::move(g));
    out.push_back(s.tagged(products[l]));
    if (info) info->ranks.push_back(static_cast<std::size_t>(rank));
  }
  return out;
}

SensitivitySet build_circulant(const net::Network& net, double radius, CircGain circ) {
  require_kind(net, net::LayerKind::circulant, "build_circulant");
  if (!(radius >= 0.0)) throw std::invalid_argument("build_circulant: radius must be >= 0");
  const auto products = leave_one_out_products(layer_gains(net, Structure::circulant, circ));
  const double prefactor = std::sqrt(static_cast<double>(net.depth())) * radius;
  SensitivitySet out;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto s = SensitivityMatrix::circulant_freq(l, net.input_dim(), net.output_dim(),
                                               prefactor * products[l]);
    out.push_back(s.tagged(products[l]));
  }
  return out;
}

Matrix toeplitz_times_vec_map(const ToeplitzSymbol& symbol, std::size_t h, std::size_t k) {
  if (k == 0 || k > h) throw std::invalid_argument("toeplitz_times_vec_map: need 1 <= k <= h");
  const auto n = static_cast<Eigen::Index>(h);
  const auto cols = static_cast<Eigen::Index>(k);
  Matrix tp = Matrix::Zero(n * n, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i + j < n; ++i) {
      const Eigen::Index c = i * n + i + j;
      for (Eigen::Index r = 0; r < n * n; ++r) tp(r, j) += symbol.entry(r, c);
    }
  }
  return tp;
}

SensitivitySet build_toeplitz(const net::Network& net, double radius, const ToeplitzSymbol& symbol) {
  require_kind(net, net::LayerKind::toeplitz, "build_toeplitz");
  if (!(radius >= 0.0)) throw std::invalid_argument("build_toeplitz: radius must be >= 0");
  const SymbolExtrema ext = symbol_extrema(symbol);
  if (ext.singular) {
    throw std::invalid_argument("build_toeplitz: symbol has min |psi| below 1e-12");
  }
  const auto products = leave_one_out_products(layer_gains(net, Structure::toeplitz));
  const double prefactor =
      kE * std::sqrt(static_cast<double>(net.depth())) * radius / ext.psi_min;
  const std::size_t h = net.input_dim();
  SensitivitySet out;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const std::size_t k = net.parameter_count(l);
    auto s = SensitivityMatrix::toeplitz_factor(l, prefactor * products[l],
                                                toeplitz_times_vec_map(symbol, h, k));
    out.push_back(s.tagged(products[l]));
  }
  return out;
}

SensitivityMatrix approximate(const SensitivityMatrix& sens, double beta_hat, const ApproxContext& ctx) {
  if (ctx.depth == 0) throw std::invalid_argument("approximate: depth must be positive");
  const double base =
      ctx.structure == Structure::residual ? beta_hat + 1.0 : ctx.gain_scale * beta_hat;
  if (!(base > 0.0)) throw std::domain_error("approximate: grid value gives a non-positive layer gain");
  const double product = std::pow(base, static_cast<double>(ctx.depth - 1));
  return sens.with_weight_product(product);
}

SensitivitySet approximate(const SensitivitySet& sens, double beta_hat, const ApproxContext& ctx) {
  SensitivitySet out;
  out.reserve(sens.size());
  for (const auto& s : sens) out.push_back(approximate(s, beta_hat, ctx));
  return out;
}

}  // namespace pacb::sensitivity
