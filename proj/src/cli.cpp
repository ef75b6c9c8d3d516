#include "pacb/cli.hpp"

#include "pacb/bounds.hpp"
#include "pacb/generate.hpp"
#include "pacb/linalg.hpp"
#include "pacb/pacbayes.hpp"
#include "pacb/report.hpp"
#include "pacb/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pacb::cli {

namespace {

using bounds::Structure;
using io::format_number;
using io::Json;
using linalg::Matrix;
using linalg::RngSeed;

constexpr Structure kAllStructures[] = {Structure::diagonal, Structure::residual, Structure::lowrank,
                                        Structure::circulant, Structure::toeplitz};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<int> parse(CLI::App& app, const std::vector<std::string>& args, std::ostream& out,
                         std::ostream& err) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }
  return std::nullopt;
}

Structure natural_structure(net::LayerKind kind) {
  switch (kind) {
    case net::LayerKind::dense: return Structure::diagonal;
    case net::LayerKind::residual: return Structure::residual;
    case net::LayerKind::circulant: return Structure::circulant;
    case net::LayerKind::toeplitz: return Structure::toeplitz;
  }
  return Structure::diagonal;
}

/// Flags shared by certify and verify; each one overrides the config when given.
struct CommonFlags {
  std::optional<std::string> config_path;
  std::vector<std::string> nets;
  std::vector<std::string> data;
  std::optional<double> gamma;
  std::optional<double> gamma_from_margin;
  std::optional<double> delta;
  std::optional<std::string> structure;
  std::optional<std::string> circ_gain;
  std::optional<double> toeplitz_rho;
  std::optional<std::string> toeplitz_family;
  std::vector<double> toeplitz_coefficients;
  std::optional<std::size_t> anchor;
  std::optional<std::size_t> mc_samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> radius;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--net", nets, "Network JSON file (repeatable)");
    app.add_option("--data", data, "Dataset CSV file (one, or one per network)");
    app.add_option("--gamma", gamma, "Margin gamma");
    app.add_option("--gamma-from-margin", gamma_from_margin,
                   "Set gamma to this fraction of the smallest training margin");
    app.add_option("--delta", delta, "Confidence parameter");
    app.add_option("--structure", structure, "diagonal, residual, lowrank, circulant, toeplitz or all");
    app.add_option("--circ-gain", circ_gain, "Circulant gain convention: normalized or exact");
    app.add_option("--toeplitz-rho", toeplitz_rho, "Geometric Toeplitz symbol parameter");
    app.add_option("--toeplitz-family", toeplitz_family, "geometric or symmetric_geometric");
    app.add_option("--toeplitz-coefficients", toeplitz_coefficients, "Toeplitz symbol coefficients t_0,t_1,...")
        ->delimiter(',');
    app.add_option("--anchor", anchor, "Low-rank anchor sample index");
    app.add_option("--mc-samples", mc_samples, "Monte Carlo samples per diagnostic");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--radius", radius, "Input radius B (defaults to the largest input norm)");
  }

  Config resolve() const {
    Config cfg;
    if (config_path) apply_config(cfg, io::read_json(*config_path));
    if (auto env = seed_from_env()) cfg.seed = *env;
    if (gamma) cfg.gamma = *gamma;
    if (gamma_from_margin) {
      if (gamma) throw UsageError("--gamma and --gamma-from-margin are mutually exclusive");
      cfg.gamma.reset();
      cfg.gamma_from_margin = *gamma_from_margin;
    }
    if (delta) cfg.delta = *delta;
    if (structure) cfg.structure = *structure;
    if (circ_gain) cfg.circ_gain = sensitivity::parse_circ_gain(*circ_gain);
    if (toeplitz_rho && !toeplitz_coefficients.empty()) {
      throw UsageError("--toeplitz-rho and --toeplitz-coefficients are mutually exclusive");
    }
    if (toeplitz_family && !toeplitz_rho) throw UsageError("--toeplitz-family needs --toeplitz-rho");
    if (toeplitz_rho) {
      Json doc;
      doc["family"] = toeplitz_family.value_or("geometric");
      doc["rho"] = *toeplitz_rho;
      cfg.symbol = parse_symbol(doc);
    }
    if (!toeplitz_coefficients.empty()) {
      cfg.symbol = sensitivity::ToeplitzSymbol::from_coefficients(toeplitz_coefficients);
    }
    if (anchor) cfg.anchor = *anchor;
    if (mc_samples) cfg.mc_samples = *mc_samples;
    if (seed) cfg.seed = *seed;
    if (radius) cfg.radius = *radius;
    return cfg;
  }
};

struct Problem {
  std::vector<net::Network> nets;
  std::vector<net::Dataset> data;

  const net::Dataset& data_for(std::size_t net_index) const {
    return data.size() == 1 ? data.front() : data.at(net_index);
  }
};

Problem load_problem(const CommonFlags& flags, const Config& cfg) {
  if (flags.nets.empty()) throw UsageError("at least one --net is required");
  if (flags.data.empty()) throw UsageError("--data is required");
  if (flags.data.size() != 1 && flags.data.size() != flags.nets.size()) {
    throw UsageError("give one --data file, or one per --net");
  }
  Problem p;
  for (const auto& path : flags.nets) p.nets.push_back(io::read_network(path));
  for (const auto& path : flags.data) p.data.push_back(io::read_dataset(path, cfg.radius));
  for (std::size_t i = 0; i < p.nets.size(); ++i) {
    const auto& d = p.data_for(i);
    if (d.input_dim() != p.nets[i].input_dim()) {
      throw UsageError("network " + flags.nets[i] + " takes inputs of dimension " +
                       std::to_string(p.nets[i].input_dim()) + " but the dataset has dimension " +
                       std::to_string(d.input_dim()));
    }
  }
  return p;
}

double resolve_gamma(const Config& cfg, const net::Network& net, const net::Dataset& data) {
  if (cfg.gamma) return *cfg.gamma;
  const double mm = net::min_margin(net, data);
  if (!(mm > 0.0)) {
    throw UsageError("the smallest training margin is " + format_number(mm) +
                     "; pass an explicit --gamma");
  }
  return cfg.gamma_from_margin * mm;
}

bounds::CertifyConfig certify_config(const Config& cfg) {
  bounds::CertifyConfig cc;
  cc.circ_gain = cfg.circ_gain;
  cc.symbol = cfg.symbol;
  cc.anchor_index = cfg.anchor;
  cc.mc_samples = cfg.mc_samples;
  cc.seed = cfg.seed;
  cc.run_mc = cfg.run_mc;
  cc.direct_samples = cfg.direct_samples;
  return cc;
}

std::optional<std::size_t> find_net(const Problem& p, Structure s) {
  for (std::size_t i = 0; i < p.nets.size(); ++i) {
    if (p.nets[i].kind() == sensitivity::required_kind(s)) return i;
  }
  return std::nullopt;
}

template <class T>
T get_as(const Json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------- verify

enum class Status { pass, fail, skip };

struct CheckOutcome {
  std::string name;
  Status status = Status::skip;
  std::string detail;
};

constexpr const char* kCheckNames[] = {"perturbation_condition", "perturbation_bound", "concentration",
                                       "oracle",                 "jacobian",           "neyshabur"};

std::string mc_detail(const verify::McResult& r) {
  std::string s = "n=" + std::to_string(r.n_samples) + " frequency=" + format_number(r.frequency) +
                  " threshold=" + format_number(r.threshold);
  if (r.direction == verify::McResult::Direction::none_allowed) {
    s = "n=" + std::to_string(r.n_samples) + " violations=" + std::to_string(r.success_count) +
        " worst_ratio=" + format_number(r.worst_ratio);
  }
  return s;
}

CheckOutcome from_mc(std::string name, const verify::McResult& r) {
  return {std::move(name), r.pass ? Status::pass : Status::fail, mc_detail(r)};
}

CheckOutcome oracle_check(RngSeed seed) {
  linalg::Rng rng(seed.value);
  std::uniform_real_distribution<double> eta_dist(0.1, 10.0);
  double worst = 0.0;
  constexpr int kTrials = 3;
  for (int t = 0; t < kTrials; ++t) {
    Matrix a(5, 5);
    for (Eigen::Index j = 0; j < 5; ++j) a.col(j) = linalg::standard_normal(5, rng);
    const double eta2 = eta_dist(rng);
    const Matrix analytic =
        pacbayes::optimal_posterior(sensitivity::SensitivityMatrix::general(0, a), eta2).dense();
    const Matrix oracle = verify::oracle_min_D(a, eta2);
    worst = std::max(worst, (analytic - oracle).norm());
  }
  const bool ok = worst < 1e-6;
  return {"oracle", ok ? Status::pass : Status::fail,
          std::to_string(kTrials) + " random 5x5 problems, worst Frobenius gap " + format_number(worst)};
}

CheckOutcome jacobian_check(const net::Network& w, const net::Dataset& data) {
  if (w.kind() != net::LayerKind::dense) return {"jacobian", Status::skip, "dense networks only"};
  const auto norms = net::layer_spectral_norms(w);
  std::vector<double> errors;
  double worst_ratio = 0.0;
  const std::size_t probes = std::min<std::size_t>(50, data.size());
  for (std::size_t i = 0; i < probes; ++i) {
    const auto x = data.input(i);
    for (std::size_t l = 0; l < w.depth(); ++l) {
      const Matrix analytic = net::layer_jacobian(w, x, l);
      const Matrix fd = verify::finite_diff_jacobian(w, x, l, 1e-5);
      const double scale = analytic.norm();
      errors.push_back(scale > 0.0 ? (analytic - fd).norm() / scale : (analytic - fd).norm());
      double bound = data.radius();
      for (std::size_t k = 0; k < w.depth(); ++k) {
        if (k != l) bound *= norms[k];
      }
      worst_ratio = std::max(worst_ratio, linalg::spectral_norm(analytic) / bound);
    }
  }
  auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
  std::nth_element(errors.begin(), mid, errors.end());
  const double median = *mid;
  const bool ok = median < 1e-5 && worst_ratio <= 1.0 + 1e-9;
  return {"jacobian", ok ? Status::pass : Status::fail,
          "median relative error " + format_number(median) + ", worst ||J||/bound " +
              format_number(worst_ratio)};
}

std::pair<net::Network, net::Dataset> toy_problem() {
  gen::NetSpec spec;
  spec.kind = net::LayerKind::dense;
  spec.depth = 3;
  spec.width = 8;
  spec.input_dim = 8;
  spec.output_dim = 2;
  spec.planted = true;
  spec.seed = 7;
  gen::BlobSpec blobs;
  blobs.dim = 8;
  blobs.m = 200;
  blobs.noise = 0.25;
  blobs.seed = 8;
  return {gen::make_network(spec), gen::make_blobs(blobs)};
}

// ---------------------------------------------------------------- sweep

std::vector<double> numbers_at(const Json& doc, const char* key, std::vector<double> fallback) {
  if (!doc.contains(key)) return fallback;
  const Json& v = doc.at(key);
  if (!v.is_array()) throw UsageError(std::string("sweep key '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw UsageError(std::string("sweep key '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::size_t> sizes_at(const Json& doc, const char* key, std::vector<std::size_t> fallback) {
  if (!doc.contains(key)) return fallback;
  std::vector<std::size_t> out;
  for (double x : numbers_at(doc, key, {})) {
    if (x < 0.0 || x != static_cast<double>(static_cast<std::size_t>(x))) {
      throw UsageError(std::string("sweep key '") + key + "' must hold non-negative integers");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

}  // namespace

void Config::validate() const {
  if (gamma && !(*gamma > 0.0)) throw UsageError("gamma must be positive");
  if (!(gamma_from_margin > 0.0)) throw UsageError("gamma_from_margin must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
  if (run_mc && mc_samples < 1000) throw UsageError("mc_samples must be at least 1000");
  if (radius && !(*radius > 0.0)) throw UsageError("radius must be positive");
  if (structure && *structure != "all") sensitivity::parse_structure(*structure);
}

sensitivity::ToeplitzSymbol parse_symbol(const Json& doc) {
  if (!doc.is_object()) throw UsageError("toeplitz config must be an object");
  if (doc.contains("coefficients")) {
    if (doc.contains("rho")) throw UsageError("toeplitz config takes coefficients or rho, not both");
    return sensitivity::ToeplitzSymbol::from_coefficients(get_as<std::vector<double>>(doc, "coefficients"));
  }
  if (!doc.contains("rho")) throw UsageError("toeplitz config needs 'coefficients' or 'rho'");
  const double rho = get_as<double>(doc, "rho");
  const std::string family = doc.contains("family") ? get_as<std::string>(doc, "family") : "geometric";
  if (family == "geometric") return sensitivity::ToeplitzSymbol::geometric(rho);
  if (family == "symmetric_geometric") return sensitivity::ToeplitzSymbol::symmetric_geometric(rho);
  throw UsageError("unknown Toeplitz family '" + family + "'");
}

void apply_config(Config& cfg, const Json& doc) {
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "gamma") {
      cfg.gamma = get_as<double>(doc, "gamma");
    } else if (key == "gamma_from_margin") {
      cfg.gamma_from_margin = get_as<double>(doc, "gamma_from_margin");
    } else if (key == "delta") {
      cfg.delta = get_as<double>(doc, "delta");
    } else if (key == "mc_samples") {
      cfg.mc_samples = get_as<std::size_t>(doc, "mc_samples");
    } else if (key == "seed") {
      cfg.seed = get_as<std::uint64_t>(doc, "seed");
    } else if (key == "structure") {
      cfg.structure = get_as<std::string>(doc, "structure");
    } else if (key == "toeplitz") {
      cfg.symbol = parse_symbol(value);
    } else if (key == "circ_gain") {
      cfg.circ_gain = sensitivity::parse_circ_gain(get_as<std::string>(doc, "circ_gain"));
    } else if (key == "anchor") {
      if (value.is_string() && value.get<std::string>() == "max_norm") {
        cfg.anchor.reset();
      } else {
        cfg.anchor = get_as<std::size_t>(doc, "anchor");
      }
    } else if (key == "out_dir") {
      cfg.out_dir = get_as<std::string>(doc, "out_dir");
    } else if (key == "radius") {
      cfg.radius = get_as<double>(doc, "radius");
    } else if (key == "run_mc") {
      cfg.run_mc = get_as<bool>(doc, "run_mc");
    } else if (key == "direct_samples") {
      cfg.direct_samples = get_as<std::size_t>(doc, "direct_samples");
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("PACB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("PACB_SEED must be a non-negative integer, got '" + text + "'");
  }
  return value;
}

int cmd_certify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compute generalization certificates for trained networks", "certify"};
  CommonFlags flags;
  flags.add_to(app);
  std::optional<std::string> out_dir;
  bool skip_mc = false;
  std::optional<std::size_t> direct_samples;
  app.add_option("--out-dir", out_dir, "Directory for report files");
  app.add_flag("--skip-mc", skip_mc, "Skip the Monte Carlo diagnostics");
  app.add_option("--direct-samples", direct_samples,
                 "Cap on perturbations pushed through the network in the direct check");
  if (auto code = parse(app, args, out, err)) return *code;

  return guarded(err, [&] {
    Config cfg = flags.resolve();
    if (out_dir) cfg.out_dir = *out_dir;
    if (skip_mc) cfg.run_mc = false;
    if (direct_samples) cfg.direct_samples = *direct_samples;
    cfg.validate();
    const Problem problem = load_problem(flags, cfg);
    const bool all = cfg.structure == "all";
    std::vector<Structure> structures;
    if (all) {
      structures.assign(std::begin(kAllStructures), std::end(kAllStructures));
    } else if (cfg.structure) {
      structures.push_back(sensitivity::parse_structure(*cfg.structure));
    } else {
      structures.push_back(natural_structure(problem.nets.front().kind()));
    }

    const auto cc = certify_config(cfg);
    std::vector<bounds::BoundReport> reports;
    for (Structure s : structures) {
      const auto idx = find_net(problem, s);
      const std::string name(sensitivity::to_string(s));
      if (!idx) {
        const std::string msg = "no " + std::string(net::to_string(sensitivity::required_kind(s))) +
                                " network given for structure " + name;
        if (!all) throw UsageError(msg);
        err << "warning: " << msg << "; skipped\n";
        continue;
      }
      const auto& net = problem.nets[*idx];
      const auto& data = problem.data_for(*idx);
      auto rep = bounds::certify(net, data, resolve_gamma(cfg, net, data), cfg.delta, s, cc);
      io::write_text(cfg.out_dir / ("report_" + name + ".json"), io::dump(report::report_to_json(rep)));
      io::write_text(cfg.out_dir / ("report_" + name + ".md"), report::report_to_markdown(rep));
      out << name << ": bound " << format_number(rep.final_bound);
      if (rep.trivial_flag) {
        out << " (trivial)";
      } else if (rep.vacuous) {
        out << " (vacuous)";
      }
      if (rep.mc_diagnostics.ran) out << ", mc " << (rep.mc_diagnostics.pass ? "pass" : "FAIL");
      out << "\n";
      reports.push_back(std::move(rep));
    }
    if (reports.empty()) throw UsageError("no network matches the requested structures");
    if (all) io::write_text(cfg.out_dir / "comparison.md", report::comparison_markdown(reports));
    const bool trivial = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.trivial_flag; });
    return trivial ? 2 : 0;
  });
}

int cmd_verify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run the Monte Carlo and oracle verification suite", "verify"};
  CommonFlags flags;
  flags.add_to(app);
  std::vector<std::string> checks;
  double sigma_scale = 1.0;
  std::size_t bound_samples = 500;
  app.add_option("--checks", checks, "Comma-separated subset of checks to run")->delimiter(',');
  app.add_option("--sigma-scale", sigma_scale, "Multiply the pipeline sigma^2 by this factor");
  app.add_option("--bound-samples", bound_samples, "Samples for the perturbation-bound checks");
  if (auto code = parse(app, args, out, err)) return *code;

  std::vector<CheckOutcome> outcomes;
  const int setup = guarded(err, [&] {
    Config cfg = flags.resolve();
    if (!(sigma_scale > 0.0)) throw UsageError("--sigma-scale must be positive");
    for (const auto& c : checks) {
      if (std::find(std::begin(kCheckNames), std::end(kCheckNames), c) == std::end(kCheckNames)) {
        throw UsageError("unknown check '" + c + "'");
      }
    }
    if (checks.empty()) checks.assign(std::begin(kCheckNames), std::end(kCheckNames));
    const auto wanted = [&](std::string_view c) {
      return std::find(checks.begin(), checks.end(), c) != checks.end();
    };

    std::optional<std::pair<net::Network, net::Dataset>> bundled;
    Problem problem;
    if (flags.nets.empty() && flags.data.empty()) {
      bundled = toy_problem();
      problem.nets.push_back(bundled->first);
      problem.data.push_back(cfg.radius ? net::Dataset(bundled->second.inputs(), bundled->second.labels(),
                                                       *cfg.radius)
                                        : bundled->second);
    } else {
      problem = load_problem(flags, cfg);
      if (problem.nets.size() != 1) throw UsageError("verify takes exactly one --net");
    }
    const auto& net = problem.nets.front();
    const auto& data = problem.data_for(0);
    cfg.validate();
    if (cfg.structure == "all") throw UsageError("verify takes a single structure");
    const Structure s = cfg.structure ? sensitivity::parse_structure(*cfg.structure) : natural_structure(net.kind());
    const double gamma = resolve_gamma(cfg, net, data);
    const auto cc = certify_config(cfg);
    const auto state = bounds::prepare_pipeline(net, data, gamma, s, cc);
    const RngSeed seed{cfg.seed};
    out << "structure " << sensitivity::to_string(s) << ", gamma " << format_number(gamma) << ", seed " << cfg.seed
        << "\n";

    std::optional<pacbayes::PosteriorSpec> post = state.posterior;
    if (post) post->sigma2 *= sigma_scale;
    const std::string out_of_range = "grid variable outside the nontrivial range; no posterior";

    if (wanted("perturbation_condition")) {
      if (!post) {
        outcomes.push_back({"perturbation_condition", Status::fail, out_of_range});
      } else {
        const auto r = verify::mc_perturbation_condition(state.network, data, *post, state.sens, gamma,
                                                         cfg.mc_samples, seed, cfg.direct_samples);
        const bool ok = r.direct.pass && r.surrogate.pass;
        outcomes.push_back({"perturbation_condition", ok ? Status::pass : Status::fail,
                            "direct " + mc_detail(r.direct) + "; surrogate " + mc_detail(r.surrogate)});
      }
    }
    if (wanted("perturbation_bound")) {
      const auto validity = verify::default_validity(s, state.anchor_index.value_or(0));
      outcomes.push_back(from_mc("perturbation_bound",
                                 verify::mc_perturbation_bound(state.network, data, state.sens, bound_samples,
                                                               seed.offset(0x200000000ULL), validity)));
    }
    if (wanted("concentration")) {
      if (!post) {
        outcomes.push_back({"concentration", Status::fail, out_of_range});
      } else {
        outcomes.push_back(from_mc("concentration",
                                   verify::mc_concentration(state.sens, *post, std::numbers::ln2,
                                                            cfg.mc_samples, seed.offset(0x100000000ULL))));
      }
    }
    if (wanted("oracle")) outcomes.push_back(oracle_check(seed.offset(0x300000000ULL)));
    if (wanted("jacobian")) outcomes.push_back(jacobian_check(state.network, data));
    if (wanted("neyshabur")) {
      if (net.kind() != net::LayerKind::dense) {
        outcomes.push_back({"neyshabur", Status::skip, "dense networks only"});
      } else {
        outcomes.push_back(from_mc("neyshabur", verify::check_neyshabur_perturbation(
                                                    state.network, data, bound_samples,
                                                    seed.offset(0x400000000ULL))));
      }
    }
    return 0;
  });
  if (setup != 0) return setup;

  std::vector<std::string> failing;
  for (const auto& o : outcomes) {
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    out << tag << " " << o.name << ": " << o.detail << "\n";
    if (o.status == Status::fail) failing.push_back(o.name);
  }
  if (failing.empty()) return 0;
  for (const auto& f : failing) err << "failing check: " << f << "\n";
  return 3;
}

int cmd_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generate a random network and a two-blob dataset", "gen"};
  app.set_help_flag("--help", "Print this help message and exit");
  std::string kind = "dense";
  gen::NetSpec net_spec;
  gen::BlobSpec blob_spec;
  std::optional<std::size_t> input_dim;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> data_seed;
  std::string out_net = "net.json";
  std::string out_data = "data.csv";
  app.add_option("--kind", kind, "dense, residual, circulant or toeplitz");
  app.add_option("--d", net_spec.depth, "Depth");
  app.add_option("--h", net_spec.width, "Hidden width, or signal length for structured nets");
  app.add_option("--n", input_dim, "Input dimension of dense nets (defaults to h)");
  app.add_option("--K", net_spec.output_dim, "Number of classes");
  app.add_option("--k", net_spec.kernel, "Toeplitz kernel length");
  app.add_option("--scale", net_spec.scale, "Weight scale s: entries N(0, s^2/fan_in)");
  app.add_option("--seed", seed, "Seed for the network");
  app.add_option("--data-seed", data_seed, "Seed for the dataset (defaults to seed + 1)");
  app.add_flag("--planted", net_spec.planted, "Near-identity weights that separate the two blobs");
  app.add_option("--planted-noise", net_spec.planted_noise, "Relative noise on planted weights");
  app.add_option("--m", blob_spec.m, "Number of samples");
  app.add_option("--separation", blob_spec.separation, "Distance of each blob centre from the origin");
  app.add_option("--noise", blob_spec.noise, "Per-coordinate standard deviation of the blobs");
  app.add_option("--out-net", out_net, "Network output path");
  app.add_option("--out-data", out_data, "Dataset output path");
  if (auto code = parse(app, args, out, err)) return *code;

  return guarded(err, [&] {
    net_spec.kind = net::parse_layer_kind(kind);
    const auto env = seed_from_env();
    net_spec.seed = seed ? *seed : env.value_or(0);
    net_spec.input_dim = input_dim.value_or(net_spec.width);
    const auto network = gen::make_network(net_spec);
    blob_spec.dim = network.input_dim();
    blob_spec.seed = data_seed.value_or(net_spec.seed + 1);
    const auto data = gen::make_blobs(blob_spec);
    io::write_network(out_net, network);
    io::write_dataset(out_data, data);
    out << "wrote " << out_net << " and " << out_data << " (B = " << format_number(data.radius()) << ")\n";
    return 0;
  });
}

int cmd_sweep(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sweep asymptotic factors and certificates over network shapes", "sweep"};
  std::string config_path;
  std::optional<std::string> out_path;
  app.add_option("--config", config_path, "JSON file with the sweep ranges")->required();
  app.add_option("--out", out_path, "CSV output path (defaults to stdout)");
  if (auto code = parse(app, args, out, err)) return *code;

  return guarded(err, [&] {
    const Json doc = io::read_json(config_path);
    if (!doc.is_object()) throw UsageError("sweep config must be a JSON object");
    static const char* const known[] = {"structures", "d", "h", "k", "K", "rho", "m", "gamma",
                                        "gamma_from_margin", "delta", "scale", "seed", "separation",
                                        "noise", "planted", "circ_gain"};
    for (const auto& [key, value] : doc.items()) {
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
          std::end(known)) {
        throw UsageError("unknown sweep key '" + key + "'");
      }
    }

    std::vector<Structure> structures(std::begin(kAllStructures), std::end(kAllStructures));
    if (doc.contains("structures")) {
      const Json& v = doc.at("structures");
      if (v.is_string() && v.get<std::string>() == "all") {
      } else if (v.is_array()) {
        structures.clear();
        for (const auto& s : v) structures.push_back(sensitivity::parse_structure(s.get<std::string>()));
      } else {
        throw UsageError("'structures' must be \"all\" or an array of names");
      }
    }
    const auto ds = sizes_at(doc, "d", {2});
    const auto hs = sizes_at(doc, "h", {8});
    const auto ks = sizes_at(doc, "k", {3});
    const auto big_ks = sizes_at(doc, "K", {2});
    const auto rhos = numbers_at(doc, "rho", {0.0});
    const std::size_t m = doc.contains("m") ? get_as<std::size_t>(doc, "m") : 200;
    const double delta = doc.contains("delta") ? get_as<double>(doc, "delta") : 0.05;
    std::optional<double> gamma;
    if (doc.contains("gamma")) gamma = get_as<double>(doc, "gamma");
    std::optional<double> gamma_frac;
    if (doc.contains("gamma_from_margin")) gamma_frac = get_as<double>(doc, "gamma_from_margin");
    if (gamma && gamma_frac) throw UsageError("sweep takes gamma or gamma_from_margin, not both");
    if (!gamma && !gamma_frac) gamma = 1.0;
    gen::NetSpec base;
    if (doc.contains("scale")) base.scale = get_as<double>(doc, "scale");
    if (doc.contains("planted")) base.planted = get_as<bool>(doc, "planted");
    base.seed = doc.contains("seed") ? get_as<std::uint64_t>(doc, "seed") : seed_from_env().value_or(0);
    gen::BlobSpec blobs;
    blobs.m = m;
    if (doc.contains("separation")) blobs.separation = get_as<double>(doc, "separation");
    if (doc.contains("noise")) blobs.noise = get_as<double>(doc, "noise");
    blobs.seed = base.seed + 1;
    bounds::CertifyConfig cc;
    cc.run_mc = false;
    cc.seed = base.seed;
    if (doc.contains("circ_gain")) cc.circ_gain = sensitivity::parse_circ_gain(get_as<std::string>(doc, "circ_gain"));

    std::ostringstream csv;
    csv << "d,h,k,K,structure,delta_factor,bound,rho\n";
    for (Structure s : structures) {
      const bool toeplitz = s == Structure::toeplitz;
      const std::vector<std::size_t> kernel_range = toeplitz ? ks : std::vector<std::size_t>{0};
      const std::vector<double> rho_range = toeplitz ? rhos : std::vector<double>{0.0};
      if (kernel_range.empty() || rho_range.empty()) continue;
      for (std::size_t d : ds) {
        for (std::size_t h : hs) {
          for (std::size_t k : kernel_range) {
            for (std::size_t kk : big_ks) {
              if (kk > h || (toeplitz && (k == 0 || k > h)) || d < 2 || h == 0 || kk == 0) continue;
              for (double rho : rho_range) {
                gen::NetSpec spec = base;
                spec.kind = sensitivity::required_kind(s);
                spec.depth = d;
                spec.width = h;
                spec.input_dim = h;
                spec.output_dim = kk;
                spec.kernel = toeplitz ? k : 1;
                const auto network = gen::make_network(spec);
                gen::BlobSpec b = blobs;
                b.dim = network.input_dim();
                const auto data = gen::make_blobs(b);
                bounds::CertifyConfig cell = cc;
                cell.symbol = toeplitz ? sensitivity::ToeplitzSymbol::geometric(rho)
                                       : sensitivity::ToeplitzSymbol::identity();
                Config g;
                g.gamma = gamma;
                if (gamma_frac) g.gamma_from_margin = *gamma_frac;
                const auto rep = bounds::certify(network, data, resolve_gamma(g, network, data), delta, s, cell);
                csv << d << ',' << h << ',' << (toeplitz ? std::to_string(k) : std::string()) << ',' << kk
                    << ',' << sensitivity::to_string(s) << ',' << format_number(rep.asymptotic_delta_factor)
                    << ',' << format_number(rep.final_bound) << ','
                    << (toeplitz ? format_number(rho) : std::string()) << '\n';
              }
            }
          }
        }
      }
    }
    if (out_path) {
      io::write_text(*out_path, csv.str());
    } else {
      out << csv.str();
    }
    return 0;
  });
}

int run(int argc, const char* const* argv) {
  const std::string usage =
      "usage: pacb <command> [options]\n"
      "commands:\n"
      "  certify  compute certificates and write JSON and markdown reports\n"
      "  verify   run Monte Carlo and oracle checks (exit 3 on failure)\n"
      "  gen      generate a random network and a two-blob dataset\n"
      "  sweep    tabulate asymptotic factors and certificates over shapes\n"
      "run 'pacb <command> --help' for the options of a command\n";
  if (argc < 2) {
    std::cerr << usage;
    return 1;
  }
  const std::string cmd = argv[1];
  const std::vector<std::string> args(argv + 2, argv + argc);
  if (cmd == "certify") return cmd_certify(args, std::cout, std::cerr);
  if (cmd == "verify") return cmd_verify(args, std::cout, std::cerr);
  if (cmd == "gen") return cmd_gen(args, std::cout, std::cerr);
  if (cmd == "sweep") return cmd_sweep(args, std::cout, std::cerr);
  if (cmd == "-h" || cmd == "--help" || cmd == "help") {
    std::cout << usage;
    return 0;
  }
  std::cerr << "unknown command '" << cmd << "'\n" << usage;
  return 1;
}

}  // namespace pacb::cli
