#include "recon/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "recon/error.hpp"
#include "recon/germ.hpp"
#include "recon/integrate.hpp"
#include "recon/noise.hpp"
#include "recon/parallel.hpp"
#include "recon/reconstruct.hpp"
#include "recon/rng.hpp"
#include "recon/wavelet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace recon {

namespace {

const std::set<std::string> experiment_kinds = {"coherence-fit", "reconstruction-rate", "sewing-equivalence",
                                                "walsh-oracle",  "bdg",                 "kolmogorov",
                                                "lemma1",        "homogeneity"};

// Typed access to one JSON object; remembers the keys it handed out so that
// leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) bad(where_, "expected an object");
  }

  [[noreturn]] static void bad(const std::string& field, const std::string& why) {
    fail(ErrorKind::validation, "field '" + field + "': " + why);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad(path(key), "wrong type");
    }
  }
  Fields object(const std::string& key) {
    static const json empty = json::object();
    return Fields(has(key) ? j_.at(key) : empty, path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(path(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& why) {
  if (!ok) Fields::bad(field, why);
}

json canonical_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = config_schema_version;
  j["experiment"] = c.experiment;
  j["dimension"] = c.dimension;
  j["scaling"] = c.scaling;
  j["basis"] = {{"family", c.basis_family}, {"moments", c.moments}, {"cascade_resolution", c.cascade_resolution}};
  j["grid_exponent"] = c.grid_exponent;
  j["grid_exponents"] = c.grid_exponents;
  j["noise"] = {{"lo", c.noise_lo}, {"hi", c.noise_hi}};
  j["germ"] = {{"kind", c.germ},
               {"holder_exponent", c.holder_exponent},
               {"adapted_axes", c.adapted_axes},
               {"stochastic_dim", c.stochastic_dim},
               {"field_radius", c.field_radius},
               {"taylor_order", c.taylor_order},
               {"prefactor", c.prefactor},
               {"prefactor_value", c.prefactor_value},
               {"driver", c.driver}};
  j["test_function"] = {{"center", c.psi_center}, {"radius", c.psi_radius}};
  j["levels"] = {{"min", c.n_min}, {"max", c.n_max}};
  j["lambdas"] = c.lambdas;
  j["points"] = c.points;
  j["mode"] = c.mode;
  j["variant"] = c.variant;
  j["conditional"] = c.conditional;
  j["paths"] = c.paths;
  j["p"] = c.p;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["output"] = c.output;
  j["bdg"] = {{"families", c.families}, {"sizes", c.sizes}, {"p", c.moments_p}};
  j["kolmogorov"] = {{"alpha", c.alpha}, {"kappa", c.kappa}, {"n_max", c.level_caps}};
  j["sewing"] = {{"horizon", c.horizon}, {"sew_level", c.sew_level}, {"levels", c.sew_levels}};
  j["homogeneity"] = {{"space_dim", c.space_dim}, {"kernel", c.kernel}};
  return j;
}

void validate(ExperimentConfig& c) {
  check(experiment_kinds.count(c.experiment) > 0, "experiment", "unknown kind '" + c.experiment + "'");
  const std::size_t d = c.dimension;
  check(d >= 1 && d <= 3, "dimension", "must be 1, 2 or 3");
  if (c.scaling.empty()) c.scaling.assign(d, 1);
  check(c.scaling.size() == d, "scaling", "needs one exponent per axis");
  for (int s : c.scaling) check(s >= 1, "scaling", "exponents must be >= 1");
  check(c.basis_family == "haar" || c.basis_family == "daubechies", "basis.family",
        "expected haar or daubechies");
  if (c.basis_family == "haar") c.moments = 1;
  check(c.moments >= 1 && c.moments <= 10, "basis.moments", "must lie in 1..10");
  check(c.cascade_resolution >= 4 && c.cascade_resolution <= 16, "basis.cascade_resolution",
        "must lie in 4..16");
  check(c.grid_exponent >= 2 && c.grid_exponent <= 16, "grid_exponent", "must lie in 2..16");
  if (c.grid_exponents.empty()) c.grid_exponents.assign(d, c.grid_exponent);
  check(c.grid_exponents.size() == d, "grid_exponents", "needs one exponent per axis");
  for (int J : c.grid_exponents) check(J >= 2 && J <= 16, "grid_exponents", "entries must lie in 2..16");
  if (c.noise_lo.empty()) c.noise_lo.assign(d, 0.0);
  if (c.noise_hi.empty()) c.noise_hi.assign(d, 4.0);
  check(c.noise_lo.size() == d && c.noise_hi.size() == d, "noise", "lo and hi need one entry per axis");
  for (std::size_t i = 0; i < d; ++i) check(c.noise_lo[i] < c.noise_hi[i], "noise", "empty box");

  check(c.germ == "noise-product" || c.germ == "young" || c.germ == "ito" || c.germ == "additive",
        "germ.kind", "expected noise-product, young, ito or additive");
  check(c.holder_exponent > 0.0 && c.holder_exponent <= 1.0, "germ.holder_exponent", "must lie in (0,1]");
  check(c.stochastic_dim <= d, "germ.stochastic_dim", "exceeds the dimension");
  for (std::size_t a : c.adapted_axes) check(a < d, "germ.adapted_axes", "axis out of range");
  check(c.field_radius > 0.0, "germ.field_radius", "must be positive");
  check(c.taylor_order >= 0 && c.taylor_order <= 2, "germ.taylor_order", "must lie in 0..2");
  check(c.prefactor == "constant" || c.prefactor == "linear" || c.prefactor == "sine", "germ.prefactor",
        "expected constant, linear or sine");
  check(c.driver == "noise" || c.driver == "density", "germ.driver", "expected noise or density");

  if (c.psi_center.empty()) c.psi_center.assign(d, 1.5);
  if (c.psi_radius.empty()) c.psi_radius.assign(d, 0.5);
  check(c.psi_center.size() == d && c.psi_radius.size() == d, "test_function",
        "center and radius need one entry per axis");
  for (double r : c.psi_radius) check(r > 0.0, "test_function.radius", "must be positive");
  check(c.n_min >= 0 && c.n_min <= c.n_max, "levels", "need 0 <= min <= max");
  if (c.lambdas.empty()) c.lambdas = {0.25, 0.125, 0.0625, 0.03125, 0.015625};
  for (double l : c.lambdas) check(l > 0.0 && l <= 1.0, "lambdas", "entries must lie in (0,1]");
  if (c.points.empty()) c.points = {std::vector<double>(d, 1.0)};
  for (const auto& x : c.points) check(x.size() == d, "points", "each point needs one entry per axis");
  check(c.mode == "plain" || c.mode == "conditional" || c.mode == "covariance", "mode",
        "expected plain, conditional or covariance");
  check(c.variant == "one-sided" || c.variant == "two-sided" || c.variant == "covariance", "variant",
        "expected one-sided, two-sided or covariance");
  check(c.paths >= 2, "paths", "need at least two paths");
  check(c.p >= 1.0, "p", "must be >= 1");
  check(c.workers >= 0, "workers", "must be >= 0");
  check(!c.output.empty(), "output", "must not be empty");

  if (c.families.empty()) c.families = {"constant", "gaussian", "martingale"};
  for (const auto& f : c.families)
    check(f == "constant" || f == "gaussian" || f == "martingale", "bdg.families", "unknown family '" + f + "'");
  if (c.sizes.empty()) c.sizes = {16, 32, 64, 128, 256, 512, 1024};
  for (auto n : c.sizes) check(n >= 1, "bdg.sizes", "sizes must be positive");
  if (c.moments_p.empty()) c.moments_p = {2.0, 4.0};
  for (double q : c.moments_p) check(q >= 2.0, "bdg.p", "moments must be >= 2");

  check(c.alpha < 0.0, "kolmogorov.alpha", "must be negative");
  check(c.kappa > 0.0, "kolmogorov.kappa", "must be positive");
  if (c.level_caps.empty()) c.level_caps = {6, 7, 8, 9};

  check(c.horizon > 0.0, "sewing.horizon", "must be positive");
  check(c.sew_level >= 2 && c.sew_level <= 20, "sewing.sew_level", "must lie in 2..20");
  if (c.sew_levels.empty()) c.sew_levels = {4, 5, 6, 7, 8, 9, 10, 11, 12};
  for (int n : c.sew_levels) check(n >= 2 && n <= 20, "sewing.levels", "levels must lie in 2..20");

  check(c.space_dim >= 1 && c.space_dim <= 2, "homogeneity.space_dim", "must be 1 or 2");
  check(c.kernel == "white" || c.kernel == "constant", "homogeneity.kernel", "expected white or constant");

  // Per-kind requirements.
  if (c.experiment == "sewing-equivalence") {
    check(d == 1, "dimension", "sewing is one-dimensional");
    check(c.germ == "ito" || c.germ == "additive", "germ.kind", "sewing needs an ito or additive germ");
    check(c.noise_lo[0] == 0.0 && c.noise_hi[0] >= c.horizon, "noise", "sewing noise must cover [0, horizon]");
  } else {
    check(c.germ != "ito" && c.germ != "additive", "germ.kind", "two-parameter germs need sewing-equivalence");
  }
  if (c.experiment == "walsh-oracle")
    check(c.germ == "noise-product", "germ.kind", "the Walsh oracle needs a noise-product germ");
  if (c.experiment == "homogeneity") {
    check(c.grid_exponent <= 12, "grid_exponent", "homogeneity quadrature needs grid_exponent <= 12");
    check(c.psi_center.size() == c.space_dim + 1 || c.psi_center.size() == d, "test_function",
          "homogeneity needs time x space");
  }
  if (c.experiment == "kolmogorov")
    for (int n : c.level_caps)
      check(n >= 0 && n * *std::max_element(c.scaling.begin(), c.scaling.end()) < c.grid_exponent, "kolmogorov.n_max",
            "level exceeds the grid");

  // Capabilities.
  const bool wants_conditional = (c.experiment == "coherence-fit" && c.mode == "conditional") ||
                                 (c.experiment == "reconstruction-rate" && c.conditional);
  if (wants_conditional) {
    require(c.stochastic_dim > 0, ErrorKind::capability, "conditional mode needs stochastic axes");
    if (c.germ == "noise-product")
      for (std::size_t a = 0; a < c.stochastic_dim; ++a)
        require(std::find(c.adapted_axes.begin(), c.adapted_axes.end(), a) != c.adapted_axes.end(),
                ErrorKind::capability,
                "conditional mode needs a germ adapted along axis " + std::to_string(a));
  }
  if (c.experiment == "coherence-fit" && c.mode == "covariance")
    require(c.stochastic_dim > 0, ErrorKind::capability, "covariance mode needs stochastic axes");
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_json(const RateFit& f) {
  return {{"slope", finite(f.slope)},   {"intercept", finite(f.intercept)}, {"stderr", finite(f.stderr_slope)},
          {"r2", finite(f.r2)},         {"points", f.points},               {"method", f.method}};
}

json plot_json(const std::string& xl, const std::string& yl, const std::vector<double>& x,
               const std::vector<double>& y, const RateFit& f) {
  return {{"x_label", xl}, {"y_label", yl}, {"x", x}, {"y", y}, {"slope", finite(f.slope)},
          {"intercept", finite(f.intercept)}};
}

// Everything a pipeline needs, built once from the config.
std::vector<std::int64_t> grid_resolution(const std::vector<int>& exponents) {
  std::vector<std::int64_t> r;
  for (int J : exponents) r.push_back(std::int64_t{1} << J);
  return r;
}

struct Setup {
  const ExperimentConfig& c;
  ScalingVector S;
  std::vector<std::int64_t> res;
  Box noise_box;
  int workers;

  explicit Setup(const ExperimentConfig& config)
      : c(config),
        S(config.scaling),
        res(grid_resolution(config.grid_exponents)),
        noise_box{config.noise_lo, config.noise_hi},
        workers(config.workers > 0 ? config.workers : default_workers()) {}

  WaveletBasis basis() const {
    return build_basis(parse_wavelet_family(c.basis_family), c.moments, c.cascade_resolution);
  }

  GridFunction psi() const {
    return sample(bump_profile(c.psi_center, c.psi_radius), bump_support(c.psi_center, c.psi_radius), res);
  }

  PathSampler sampler() const {
    NoiseSampler noise(CellWindow::covering(noise_box, res), CovarianceMeasure::white(c.dimension - 1),
                       c.stochastic_dim > 0);
    std::optional<HolderFieldSampler> field;
    if (c.germ == "noise-product")
      field.emplace(FieldSpec{c.holder_exponent, c.adapted_axes, c.field_radius}, node_window(noise_box, res));
    return PathSampler(std::move(noise), std::move(field), c.seed);
  }

  std::unique_ptr<Germ> germ() const {
    if (c.germ == "noise-product") return std::make_unique<NoiseProductGerm>(c.stochastic_dim, c.adapted_axes);
    const double v = c.prefactor_value;
    Profile g;
    if (c.prefactor == "constant")
      g = [v](std::span<const double>) { return v; };
    else if (c.prefactor == "linear")
      g = [v](std::span<const double> x) {
        double s = 0.0;
        for (double xi : x) s += xi;
        return v * s;
      };
    else
      g = [v](std::span<const double> x) { return std::sin(2.0 * std::numbers::pi * v * x[0]); };
    Driver h = Driver::noise();
    if (c.driver == "density")
      h = Driver::density([](std::span<const double> x) { return std::cos(2.0 * std::numbers::pi * x[0]); },
                          CellWindow::covering(noise_box, res));
    return std::make_unique<YoungGerm>(g, h, c.taylor_order, c.driver == "noise" ? c.stochastic_dim : 0);
  }

  // gamma of the germ, when it is known in closed form.
  double gamma() const {
    if (c.germ == "noise-product") return c.holder_exponent;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct Outcome {
  std::ostringstream table;
  std::map<std::string, double> metrics;
  json details = json::object();
};

void run_reconstruction_rate(const Setup& s, Outcome& out) {
  const auto basis = s.basis();
  const auto germ = s.germ();
  const auto sampler = s.sampler();
  ErrorRateOptions o;
  o.scaling = s.S;
  o.lambdas = s.c.lambdas;
  for (const auto& x : s.c.points) o.points.push_back(x);
  o.n_max = s.c.n_max;
  o.variant = parse_variant(s.c.variant);
  o.conditional = s.c.conditional;
  o.paths = s.c.paths;
  o.p = s.c.p;
  o.workers = s.workers;
  // Cutoff distance large enough that the conditioned residual sees no future cells.
  o.Ctilde = 2.0 * basis.support_hi() * std::ldexp(1.0, -s.c.n_max) / s.c.lambdas.back();
  ErrorRateReport r = fit_error_rate(*germ, basis, s.psi(), o, &sampler);
  const int E = s.S.partial_total(s.c.stochastic_dim);
  r.expected_slope = s.gamma() - 0.5 * E;

  out.table << "lambda,norm,norm_se";
  if (o.conditional) out.table << ",conditional_mean,conditional_se";
  out.table << "\n";
  std::vector<double> px, py;
  for (std::size_t l = 0; l < r.lambdas.size(); ++l) {
    out.table << num(r.lambdas[l]) << ',' << num(r.norms[l].value) << ',' << num(r.norms[l].se);
    if (o.conditional) out.table << ',' << num(r.conditional[l].mean) << ',' << num(r.conditional[l].se);
    out.table << "\n";
    if (r.norms[l].value > 0.0) {
      px.push_back(std::log2(r.lambdas[l]));
      py.push_back(std::log2(r.norms[l].value));
    }
  }
  out.metrics["degenerate"] = r.degenerate;
  if (!r.degenerate) {
    out.metrics["slope"] = r.fit.slope;
    out.metrics["slope_se"] = r.fit.stderr_slope;
  }
  if (o.conditional) {
    out.metrics["conditional_vanishes"] = r.conditional_vanishes;
    out.metrics["conditional_within_3se"] = r.conditional_within_3se;
  }
  out.details["primary"] = "slope";
  out.details["fit"] = fit_json(r.fit);
  if (std::isfinite(r.expected_slope)) out.details["theory"] = {{"slope", r.expected_slope}};
  out.details["plot"] = plot_json("log2 lambda", "log2 residual norm", px, py, r.fit);
  const std::string warning =
      capability_warning(s.c.germ == "noise-product" ? -0.5 * s.S.total() : 0.0, s.gamma(), E, basis, s.S);
  if (!warning.empty()) out.details["warning"] = warning;
}

void run_walsh_oracle(const Setup& s, Outcome& out) {
  const auto basis = s.basis();
  const auto germ = s.germ();
  const auto sampler = s.sampler();
  const GridFunction psi = s.psi();
  ReconstructionOptions o;
  o.scaling = s.S;
  o.n_min = s.c.n_min;
  o.n_max = s.c.n_max;
  o.variant = parse_variant(s.c.variant);
  o.paths = s.c.paths;
  o.p = s.c.p;
  o.workers = s.workers;
  const ReconstructionRun run = reconstruct(*germ, basis, {psi}, o, &sampler);
  std::vector<double> oracle(s.c.paths);
  parallel_for(s.c.paths, s.workers, [&](std::size_t k) {
    const PathSample path = sampler.sample(k);
    oracle[k] = walsh_integral(*path.field, path.noise, psi);
  });
  const double scale = estimate_lp_norm(oracle, 2.0).value;
  out.table << "level,relative_l2_error,increment\n";
  std::vector<double> px, py, err(s.c.paths);
  double last = 0.0;
  for (std::size_t i = 0; i < run.levels.size(); ++i) {
    for (std::size_t k = 0; k < s.c.paths; ++k) err[k] = run.value(i, 0, k) - oracle[k];
    last = estimate_lp_norm(err, 2.0).value / scale;
    const double inc = i + 1 < run.levels.size() ? run.increments[i].value : std::numeric_limits<double>::quiet_NaN();
    out.table << run.levels[i] << ',' << num(last) << ',' << num(inc) << "\n";
    if (last > 0.0) {
      px.push_back(run.levels[i]);
      py.push_back(std::log2(last));
    }
  }
  RateFit f;
  f.method = "none";
  if (px.size() >= 2) f = fit_least_squares(px, py);
  out.details["primary"] = "relative_error";
  out.metrics["relative_error"] = last;
  out.metrics["oracle_l2"] = scale;
  out.metrics["tail_bound"] = run.tail_bound[0];
  out.details["fit"] = fit_json(f);
  out.details["plot"] = plot_json("level", "log2 relative error", px, py, f);
}

void run_coherence(const Setup& s, Outcome& out) {
  const auto germ = s.germ();
  const auto sampler = s.sampler();
  CoherenceDesign design = CoherenceDesign::standard(s.c.points.front(), s.S);
  design.p = s.c.p;
  design.paths = s.c.paths;
  design.workers = s.workers;
  const CoherenceReport r =
      estimate_coherence(*germ, s.psi(), design, parse_coherence_mode(s.c.mode), &sampler);
  out.table << "scale,distance,value,se\n";
  for (const auto& pt : r.points)
    out.table << num(pt.scale) << ',' << num(pt.distance) << ',' << num(pt.value) << ',' << num(pt.se) << "\n";
  out.metrics["degenerate"] = r.degenerate;
  if (!r.degenerate) {
    out.metrics["alpha_hat"] = r.alpha_hat;
    out.metrics["se_alpha"] = r.se_alpha;
    if (!r.vanishing_conditional) {
      out.metrics["gamma_hat"] = r.gamma_hat;
      out.metrics["se_gamma"] = r.se_gamma;
    }
    out.metrics["r_squared"] = r.r_squared;
  }
  out.metrics["vanishing_conditional"] = r.vanishing_conditional;
  if (r.mode == CoherenceMode::covariance) out.metrics["moments_within_3se"] = r.moments_within_3se;
  out.details["primary"] = "gamma_hat";
  out.details["report"] = json::parse(r.to_json());
  if (s.c.germ == "noise-product") out.details["theory"] = {{"gamma_hat", s.c.holder_exponent}};
}

void run_sewing(const Setup& s, Outcome& out) {
  const auto basis = s.basis();
  const auto sampler = s.sampler();
  const double T = s.c.horizon;
  TwoParameterFactory A;
  std::function<double(const PathSample&)> exact;
  if (s.c.germ == "ito") {
    A = ito_germ();
    exact = [T](const PathSample& p) {
      const double b = brownian_path(p.noise)(T);
      return 0.5 * (b * b - T);
    };
  } else {
    // Additive germ of g(t) = v sin(2 pi t) + B_t.
    const double v = s.c.prefactor_value;
    A = [v](const PathSample& p) -> TwoParameter {
      auto B = std::make_shared<BrownianPath>(brownian_path(p.noise));
      return [v, B](double a, double b) {
        return v * (std::sin(2.0 * std::numbers::pi * b) - std::sin(2.0 * std::numbers::pi * a)) + (*B)(b) - (*B)(a);
      };
    };
    exact = [v, T](const PathSample& p) {
      return v * std::sin(2.0 * std::numbers::pi * T) + brownian_path(p.noise)(T);
    };
  }
  const SewingRate rate = sewing_error_rate(A, exact, T, s.c.sew_levels, sampler, s.c.paths, s.workers);
  out.table << "level,l2_error,se\n";
  std::vector<double> px, py;
  for (std::size_t i = 0; i < rate.levels.size(); ++i) {
    out.table << rate.levels[i] << ',' << num(rate.errors[i].value) << ',' << num(rate.errors[i].se) << "\n";
    if (rate.errors[i].value > 0.0) {
      px.push_back(rate.levels[i]);
      py.push_back(std::log2(rate.errors[i].value));
    }
  }
  SewingEquivalenceOptions eo;
  eo.n_min = s.c.n_min;
  eo.n_max = s.c.n_max;
  eo.sew_level = s.c.sew_level;
  eo.T = T;
  eo.paths = s.c.paths;
  eo.workers = s.workers;
  const SewingEquivalence eq = sewing_equivalence_check(A, basis, s.psi(), eo, sampler);
  if (rate.fit.method != "none") {
    out.metrics["rate"] = -rate.fit.slope;
    out.metrics["rate_se"] = rate.fit.stderr_slope;
  }
  out.metrics["equivalence_difference"] = eq.difference.value;
  out.metrics["equivalence_threshold"] = eq.threshold;
  out.metrics["equivalence_pass"] = eq.pass;
  out.details["primary"] = "rate";
  out.details["fit"] = fit_json(rate.fit);
  out.details["equivalence"] = {{"difference", eq.difference.value},
                                {"difference_se", eq.difference.se},
                                {"mean_difference", eq.mean_difference.mean},
                                {"quadrature_tolerance", eq.quadrature_tolerance},
                                {"tail_bound", finite(eq.tail_bound)},
                                {"threshold", finite(eq.threshold)}};
  if (s.c.germ == "ito") out.details["theory"] = {{"rate", 0.5}};
  out.details["plot"] = plot_json("level", "log2 l2 error", px, py, rate.fit);
}

void run_bdg(const Setup& s, Outcome& out) {
  out.table << "family,p,N,lhs,rhs,ratio,lhs_se\n";
  json reports = json::array();
  for (const auto& name : s.c.families) {
    const AdaptedFamily fam =
        name == "constant" ? constant_family() : name == "gaussian" ? gaussian_family() : martingale_family();
    for (double q : s.c.moments_p) {
      const BdgReport r = bdg_verify(fam, q, s.c.sizes, s.c.paths, s.c.seed, s.workers);
      double worst = 0.0;
      for (const auto& row : r.rows) {
        out.table << name << ',' << num(q) << ',' << row.N << ',' << num(row.lhs) << ',' << num(row.rhs) << ','
                  << num(row.ratio) << ',' << num(row.lhs_se) << "\n";
        worst = std::max(worst, row.ratio);
      }
      const std::string key = name + "_p" + num(q);
      out.metrics[key + "_max_ratio"] = worst;
      out.metrics[key + "_trend"] = r.trend.slope;
      reports.push_back({{"family", name}, {"p", q}, {"trend", fit_json(r.trend)}});
    }
  }
  out.details["families"] = reports;
}

void run_kolmogorov(const Setup& s, Outcome& out) {
  const auto basis = s.basis();
  const auto sampler = s.sampler();
  out.table << "n_max,norm,se\n";
  std::vector<double> norms;
  for (int cap : s.c.level_caps) {
    KolmogorovOptions o;
    o.scaling = s.S;
    o.box = s.noise_box;
    o.alpha = s.c.alpha;
    o.p = s.c.p;
    o.n_max = cap;
    o.kappa = s.c.kappa;
    o.paths = s.c.paths;
    o.workers = s.workers;
    const KolmogorovEstimate k = kolmogorov_constant(basis, o, [&](std::size_t path) {
      const PathSample p = sampler.sample(path);
      return CellMeasure{p.noise.window, p.noise.cells};
    });
    out.table << cap << ',' << num(k.norm.value) << ',' << num(k.norm.se) << "\n";
    norms.push_back(k.norm.value);
  }
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  out.metrics["norm_first"] = norms.front();
  out.metrics["norm_last"] = norms.back();
  out.details["primary"] = "relative_spread";
  out.metrics["relative_spread"] = norms.front() > 0.0 ? (*hi - *lo) / norms.front() : 0.0;
}

void run_lemma1(const Setup& s, Outcome& out) {
  const auto basis = s.basis();
  const LemmaReport r =
      verify_lemma1(basis, s.S, s.psi(), s.c.points.front(), s.c.lambdas.front(), s.c.n_min, s.c.n_max);
  out.table << "level,sup_scaling,sup_detail\n";
  std::vector<double> px, py;
  for (std::size_t i = 0; i < r.levels.size(); ++i) {
    out.table << r.levels[i] << ',' << num(r.sup_scaling[i]) << ',' << num(r.sup_detail[i]) << "\n";
    if (r.sup_scaling[i] > 0.0) {
      px.push_back(r.levels[i]);
      py.push_back(std::log2(r.sup_scaling[i]));
    }
  }
  out.details["primary"] = "slope_scaling";
  out.metrics["slope_scaling"] = r.slope_scaling;
  out.metrics["slope_detail"] = r.slope_detail;
  out.details["theory"] = {{"slope_scaling", r.theory_scaling}, {"slope_detail", r.theory_detail}};
  RateFit f;
  f.slope = r.slope_scaling;
  f.method = "least-squares";
  if (px.size() >= 2) f = fit_least_squares(px, py);
  out.details["plot"] = plot_json("level", "log2 sup scaling coefficient", px, py, f);
}

void run_homogeneity(const Setup& s, Outcome& out) {
  const std::size_t sd = s.c.space_dim;
  const CovarianceMeasure K =
      s.c.kernel == "white"
          ? CovarianceMeasure::white(sd)
          : CovarianceMeasure::from_kernel([](std::span<const double>, std::span<const double>) { return 1.0; },
                                           2.0 * static_cast<double>(sd), "constant");
  Point center(sd + 1, 0.0), radius(sd + 1, 0.5);
  if (s.c.psi_center.size() == sd + 1) {
    center = s.c.psi_center;
    radius = s.c.psi_radius;
  }
  const Point at = s.c.points.front().size() == sd + 1 ? s.c.points.front() : Point(sd + 1, 0.0);
  const HomogeneityReport r = homogeneity_check(K, sd, bump_profile(center, radius), bump_support(center, radius), at,
                                                s.c.lambdas, s.c.grid_exponent);
  out.table << "lambda,value\n";
  std::vector<double> px, py;
  for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
    out.table << num(r.lambdas[i]) << ',' << num(r.values[i]) << "\n";
    px.push_back(std::log2(r.lambdas[i]));
    py.push_back(std::log2(r.values[i]));
  }
  out.metrics["slope"] = r.fit.slope;
  out.metrics["slope_se"] = r.fit.stderr_slope;
  out.details["primary"] = "slope";
  if (s.c.kernel == "white") out.details["theory"] = {{"slope", r.expected_slope}};
  out.details["fit"] = fit_json(r.fit);
  out.details["plot"] = plot_json("log2 lambda", "log2 value", px, py, r.fit);
}

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) == 1, ErrorKind::numeric,
          "SHA-256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::argument, "cannot write " + file.string());
  out << text;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  Fields top(j, "");
  int version = 0;
  if (!top.has("schema_version")) Fields::bad("schema_version", "missing");
  top.get("schema_version", version);
  if (version != config_schema_version)
    Fields::bad("schema_version", "unsupported version " + std::to_string(version));
  ExperimentConfig c;
  if (!top.has("experiment")) Fields::bad("experiment", "missing");
  top.get("experiment", c.experiment);
  top.get("dimension", c.dimension);
  top.get("scaling", c.scaling);
  {
    Fields b = top.object("basis");
    b.get("family", c.basis_family);
    b.get("moments", c.moments);
    b.get("cascade_resolution", c.cascade_resolution);
    b.finish();
  }
  top.get("grid_exponent", c.grid_exponent);
  top.get("grid_exponents", c.grid_exponents);
  {
    Fields n = top.object("noise");
    n.get("lo", c.noise_lo);
    n.get("hi", c.noise_hi);
    n.finish();
  }
  {
    Fields g = top.object("germ");
    g.get("kind", c.germ);
    g.get("holder_exponent", c.holder_exponent);
    g.get("adapted_axes", c.adapted_axes);
    g.get("stochastic_dim", c.stochastic_dim);
    g.get("field_radius", c.field_radius);
    g.get("taylor_order", c.taylor_order);
    g.get("prefactor", c.prefactor);
    g.get("prefactor_value", c.prefactor_value);
    g.get("driver", c.driver);
    g.finish();
  }
  {
    Fields t = top.object("test_function");
    t.get("center", c.psi_center);
    t.get("radius", c.psi_radius);
    t.finish();
  }
  {
    Fields l = top.object("levels");
    l.get("min", c.n_min);
    l.get("max", c.n_max);
    l.finish();
  }
  top.get("lambdas", c.lambdas);
  top.get("points", c.points);
  top.get("mode", c.mode);
  top.get("variant", c.variant);
  top.get("conditional", c.conditional);
  top.get("paths", c.paths);
  top.get("p", c.p);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  top.get("output", c.output);
  {
    Fields b = top.object("bdg");
    b.get("families", c.families);
    b.get("sizes", c.sizes);
    b.get("p", c.moments_p);
    b.finish();
  }
  {
    Fields k = top.object("kolmogorov");
    k.get("alpha", c.alpha);
    k.get("kappa", c.kappa);
    k.get("n_max", c.level_caps);
    k.finish();
  }
  {
    Fields s = top.object("sewing");
    s.get("horizon", c.horizon);
    s.get("sew_level", c.sew_level);
    s.get("levels", c.sew_levels);
    s.finish();
  }
  {
    Fields h = top.object("homogeneity");
    h.get("space_dim", c.space_dim);
    h.get("kernel", c.kernel);
    h.finish();
  }
  top.finish();
  validate(c);
  c.canonical = canonical_json(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::validation, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config.canonical.is_null() ? canonical_json(config) : config.canonical;
  j.erase("output");
  j.erase("workers");
  return sha256_hex(j.dump());
}

json ResultRecord::to_json() const {
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = finite(v);
  return {{"format", "recon-result"},
          {"module_version", module_version},
          {"experiment", experiment},
          {"config_hash", config_hash},
          {"seed", seed},
          {"rng", rng_algorithm},
          {"metrics", m},
          {"details", details},
          {"wall_time_s", wall_time}};
}

ResultRecord run_experiment(const ExperimentConfig& config, bool write) {
  const auto start = std::chrono::steady_clock::now();
  const Setup setup(config);
  Outcome out;
  const std::string& k = config.experiment;
  if (k == "reconstruction-rate")
    run_reconstruction_rate(setup, out);
  else if (k == "walsh-oracle")
    run_walsh_oracle(setup, out);
  else if (k == "coherence-fit")
    run_coherence(setup, out);
  else if (k == "sewing-equivalence")
    run_sewing(setup, out);
  else if (k == "bdg")
    run_bdg(setup, out);
  else if (k == "kolmogorov")
    run_kolmogorov(setup, out);
  else if (k == "lemma1")
    run_lemma1(setup, out);
  else if (k == "homogeneity")
    run_homogeneity(setup, out);
  else
    fail(ErrorKind::validation, "field 'experiment': unknown kind '" + k + "'");

  ResultRecord r;
  r.experiment = k;
  r.config_hash = config_hash(config);
  r.seed = config.seed;
  r.metrics = std::move(out.metrics);
  r.details = std::move(out.details);
  r.details["config"] = config.canonical;
  std::ostringstream csv;
  csv << "# config_hash=" << r.config_hash << "\n# seed=" << r.seed << "\n# rng=" << rng_algorithm
      << "\n# module_version=" << module_version << "\n"
      << out.table.str();
  r.csv = csv.str();
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (write) {
    const fs::path dir(config.output);
    fs::create_directories(dir);
    write_text(dir / (k + ".csv"), r.csv);
    write_text(dir / (k + ".json"), r.to_json().dump(2) + "\n");
  }
  return r;
}

ReportSummary report(const std::string& directory) {
  const fs::path dir(directory);
  require(fs::is_directory(dir), ErrorKind::validation, "not a directory: " + directory);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  ReportSummary s;
  std::ostringstream table, all;
  table << "experiment,config_hash,seed,metric,value,theory,deviation\n";
  all << "experiment,config_hash,metric,value,theory\n";
  for (const auto& f : files) {
    json j;
    try {
      std::ifstream in(f);
      j = json::parse(in);
    } catch (const json::exception&) {
      continue;
    }
    if (!j.is_object() || j.value("format", "") != "recon-result") continue;
    const json metrics = j.contains("metrics") ? j["metrics"] : json::object();
    if (metrics.empty()) continue;
    ++s.records;
    const std::string exp = j.value("experiment", "");
    const std::string hash = j.value("config_hash", "").substr(0, 16);
    const json details = j.contains("details") ? j["details"] : json::object();
    const json theory = details.contains("theory") ? details["theory"] : json::object();
    auto value = [](const json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
    for (auto it = metrics.begin(); it != metrics.end(); ++it) {
      all << exp << ',' << hash << ',' << it.key() << ',' << num(value(it.value())) << ',';
      if (theory.contains(it.key())) all << num(value(theory[it.key()]));
      all << "\n";
      ++s.metrics;
    }
    std::string primary = details.value("primary", "");
    if (!metrics.contains(primary)) primary = metrics.begin().key();
    const double v = value(metrics[primary]);
    table << exp << ',' << hash << ',' << j.value("seed", std::uint64_t{0}) << ',' << primary << ',' << num(v) << ',';
    if (theory.contains(primary)) {
      const double t = value(theory[primary]);
      table << num(t) << ',' << num(v - t);
    } else {
      table << ',';
    }
    table << "\n";
    if (details.contains("plot")) {
      const json& p = details["plot"];
      const auto x = p.value("x", std::vector<double>{});
      const auto y = p.value("y", std::vector<double>{});
      const double slope = value(p["slope"]);
      const double icpt = value(p["intercept"]);
      std::ostringstream plot;
      plot << "# " << p.value("x_label", "x") << " vs " << p.value("y_label", "y") << "\nx,y,fit\n";
      for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
        plot << num(x[i]) << ',' << num(y[i]) << ',' << num(icpt + slope * x[i]) << "\n";
      write_text(dir / (f.stem().string() + "_plot.csv"), plot.str());
    }
  }
  if (s.metrics == 0) table << "no metrics\n";
  s.table = table.str();
  write_text(dir / "summary.csv", s.table);
  write_text(dir / "metrics.csv", all.str());
  return s;
}

}  // namespace recon
