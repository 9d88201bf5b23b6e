#include "recon/reconstruct.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "recon/error.hpp"
#include "recon/parallel.hpp"

namespace recon {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::one_sided: return "one-sided";
    case Variant::two_sided: return "two-sided";
    case Variant::covariance: return "covariance";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "one-sided") return Variant::one_sided;
  if (name == "two-sided") return Variant::two_sided;
  if (name == "covariance") return Variant::covariance;
  fail(ErrorKind::validation, "unknown variant '" + name + "'");
}

Reconstructor::Reconstructor(const Germ& germ, const WaveletBasis& basis, std::vector<GridFunction> psis,
                             const ReconstructionOptions& options)
    : germ_(germ), basis_(basis), psis_(std::move(psis)) {
  const ScalingVector& S = options.scaling;
  require(options.n_min >= 0 && options.n_min <= options.n_max, ErrorKind::argument, "empty level range");
  require(options.anchors.empty() || options.anchors.size() == psis_.size(), ErrorKind::argument,
          "one anchor per test function");
  const std::size_t e = germ.stochastic_dimension();
  for (std::size_t j = 0; j < psis_.size(); ++j) {
    const GridFunction& psi = psis_[j];
    require(psi.dim() == S.dim(), ErrorKind::argument, "test function and scaling differ in dimension");
    for (std::size_t a = 0; a < psi.dim(); ++a) {
      const int J = dyadic_exponent(psi.window().resolution[a]);
      require(J >= 0, ErrorKind::resolution, "grid resolution must be a power of two");
      // Finest basis functions must span at least 4 cells.
      require(J >= options.n_max * S[a] + 2, ErrorKind::resolution,
              "n_max too large for the grid: need 2^{-n_max s_i} >= 4 cells");
    }
    if (options.variant == Variant::one_sided) {
      for (std::size_t a = 0; a < e; ++a) {
        const double anchor = options.anchors.empty() ? 0.0 : options.anchors[j][a];
        const double gap = std::ldexp(2.0 * basis.support_hi(), -options.n_max * S[a]);
        require(psi.support().lo[a] - anchor >= gap * (1 - 1e-12), ErrorKind::precondition,
                "one-sided reconstruction needs support at least 2R 2^{-n_max s_i} after the base point");
      }
    }
  }
  for (int n = options.n_min; n <= options.n_max; ++n) {
    levels_.push_back(n);
    const LevelComponent comp = scaling_component(n, S);
    for (const auto& psi : psis_)
      coefficients_.push_back(analyze(basis, comp, psi.window(), psi.samples(), psi.window().cell_volume()));
  }
}

double Reconstructor::value(std::size_t i, std::size_t j, const PathSample& path) const {
  const CoefficientArray& c = coefficients_[i * psis_.size() + j];
  const auto F = germ_.evaluate_translates(basis_, c, psis_[j].window().resolution, path);
  double sum = 0.0;
  for (std::size_t f = 0; f < F.size(); ++f)
    if (c.values[f] != 0.0) sum += F[f] * c.values[f];
  return sum;
}

std::vector<double> Reconstructor::values(const PathSample& path) const {
  std::vector<double> out(levels_.size() * psis_.size());
  for (std::size_t i = 0; i < levels_.size(); ++i)
    for (std::size_t j = 0; j < psis_.size(); ++j) out[i * psis_.size() + j] = value(i, j, path);
  return out;
}

std::vector<double> ReconstructionRun::limit(std::size_t j) const {
  std::vector<double> out(paths);
  for (std::size_t k = 0; k < paths; ++k) out[k] = value(levels.size() - 1, j, k);
  return out;
}

double geometric_tail(std::span<const double> inc) {
  if (inc.empty()) return 0.0;
  if (inc.size() < 3) return std::numeric_limits<double>::infinity();
  const double d1 = inc[inc.size() - 3], d2 = inc[inc.size() - 2], d3 = inc[inc.size() - 1];
  if (d3 == 0.0) return 0.0;
  if (d1 <= 0.0 || d2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double q = std::max(d2 / d1, d3 / d2);
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return d3 * q / (1.0 - q);
}

ReconstructionRun reconstruct(const Germ& germ, const WaveletBasis& basis, const std::vector<GridFunction>& psis,
                              const ReconstructionOptions& options, const PathSampler* sampler) {
  require(!germ.random() || sampler, ErrorKind::argument, "random germ needs a path sampler");
  require(!psis.empty(), ErrorKind::argument, "no test functions");
  const Reconstructor rec(germ, basis, psis, options);
  ReconstructionRun run;
  run.variant = options.variant;
  run.levels.assign(options.n_max - options.n_min + 1, 0);
  for (std::size_t i = 0; i < run.levels.size(); ++i) run.levels[i] = rec.level(i);
  run.tests = psis.size();
  run.paths = germ.random() ? options.paths : 1;
  require(run.paths >= 1, ErrorKind::argument, "need at least one path");
  run.p = options.p;
  run.seed = sampler ? sampler->seed() : 0;
  run.values.resize(run.levels.size() * run.tests * run.paths);
  parallel_for(run.paths, options.workers, [&](std::size_t k) {
    const PathSample path = sampler ? sampler->sample(k) : PathSample{};
    const auto v = rec.values(path);
    for (std::size_t q = 0; q < v.size(); ++q) run.values[q * run.paths + k] = v[q];
  });
  std::vector<double> diff(run.paths);
  for (std::size_t i = 0; i + 1 < run.levels.size(); ++i)
    for (std::size_t j = 0; j < run.tests; ++j) {
      for (std::size_t k = 0; k < run.paths; ++k) diff[k] = run.value(i + 1, j, k) - run.value(i, j, k);
      run.increments.push_back(estimate_lp_norm(diff, run.p));
    }
  const std::size_t nin = run.levels.size() - 1;
  for (std::size_t j = 0; j < run.tests; ++j) {
    std::vector<double> inc, x, y;
    for (std::size_t i = 0; i < nin; ++i) {
      const double d = run.increments[i * run.tests + j].value;
      inc.push_back(d);
      if (d > 0.0) {
        x.push_back(run.levels[i]);
        y.push_back(std::log2(d));
      }
    }
    run.tail_bound.push_back(geometric_tail(inc));
    RateFit f;
    f.method = "none";
    if (x.size() >= 3) f = fit_least_squares(x, y);
    run.cauchy_fit.push_back(f);
  }
  return run;
}

void ReconstructionRun::write_csv(std::ostream& out) const {
  out << "level,test,mean,lp_norm,increment\n";
  out.precision(17);
  std::vector<double> v(paths);
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = 0; j < tests; ++j) {
      for (std::size_t k = 0; k < paths; ++k) v[k] = value(i, j, k);
      const auto m = estimate_mean(v);
      const auto n = estimate_lp_norm(v, p);
      out << levels[i] << ',' << j << ',' << m.mean << ',' << n.value << ',';
      if (i > 0) out << increments[(i - 1) * tests + j].value;
      out << '\n';
    }
}

std::string ReconstructionRun::diagnostics_json() const {
  nlohmann::json j;
  j["variant"] = to_string(variant);
  j["levels"] = levels;
  j["tests"] = tests;
  j["paths"] = paths;
  j["p"] = p;
  j["seed"] = seed;
  auto& per = j["test_functions"];
  per = nlohmann::json::array();
  for (std::size_t t = 0; t < tests; ++t) {
    nlohmann::json q;
    q["tail_bound"] = std::isfinite(tail_bound[t]) ? nlohmann::json(tail_bound[t]) : nlohmann::json("inf");
    q["cauchy_slope"] = cauchy_fit[t].slope;
    q["cauchy_slope_se"] = cauchy_fit[t].stderr_slope;
    q["cauchy_fit"] = cauchy_fit[t].method;
    per.push_back(q);
  }
  return j.dump(2);
}

std::vector<FiltrationCut> two_sided_offsets(const Point& x, double lambda, double Rtilde, double Ctilde,
                                             const ScalingVector& scaling, std::size_t e) {
  require(Rtilde > 0.0 && Ctilde > 0.0, ErrorKind::argument, "Rtilde and Ctilde must be positive");
  require(x.size() == scaling.dim() && e <= x.size(), ErrorKind::argument, "dimension mismatch");
  std::vector<FiltrationCut> cuts;
  for (std::size_t a = 0; a < e; ++a) cuts.push_back({a, x[a] - std::pow(lambda, scaling[a]) * (Rtilde + Ctilde)});
  return cuts;
}

// ---------------------------------------------------------------------------

ErrorRateReport fit_error_rate(const Germ& germ, const WaveletBasis& basis, const GridFunction& psi,
                               const ErrorRateOptions& o, const PathSampler* sampler) {
  require(!o.lambdas.empty() && !o.points.empty(), ErrorKind::argument, "empty lambda ladder or point list");
  for (double l : o.lambdas) require(l > 0.0 && l <= 1.0, ErrorKind::argument, "lambda must lie in (0,1]");
  require(!germ.random() || sampler, ErrorKind::argument, "random germ needs a path sampler");
  const std::size_t e = germ.stochastic_dimension();
  if (o.conditional) {
    require(e > 0, ErrorKind::capability, "conditional residuals need stochastic axes");
    for (std::size_t a = 0; a < e; ++a) {
      const Conditioning c = germ.conditioning(a);
      require(c != Conditioning::none, ErrorKind::capability, "germ is not adapted along a stochastic axis");
      require(c != Conditioning::monte_carlo || (sampler && sampler->can_resample(a)), ErrorKind::capability,
              "conditional Monte Carlo is unavailable for this noise");
    }
  }
  const std::size_t L = o.lambdas.size(), X = o.points.size();
  std::vector<GridFunction> tests;
  std::vector<Point> anchors;
  for (double l : o.lambdas)
    for (const Point& x : o.points) {
      tests.push_back(localize(psi, x, l, o.scaling));
      anchors.push_back(x);
    }
  ReconstructionOptions ro;
  ro.scaling = o.scaling;
  ro.n_min = ro.n_max = o.n_max;
  ro.variant = o.variant;
  ro.anchors = anchors;
  const Reconstructor rec(germ, basis, tests, ro);
  const std::size_t paths = germ.random() ? o.paths : 1;
  const std::size_t axes = o.conditional ? e : 0;
  std::vector<double> plain(L * X * paths), cond(L * X * axes * paths);
  parallel_for(paths, o.workers, [&](std::size_t k) {
    const PathSample path = sampler ? sampler->sample(k) : PathSample{};
    for (std::size_t t = 0; t < tests.size(); ++t) {
      const Point& x = anchors[t];
      auto residual = [&](const PathSample& p) { return rec.value(0, t, p) - germ.evaluate(x, tests[t], p); };
      plain[t * paths + k] = residual(path);
      if (!axes) continue;
      const double lambda = o.lambdas[t / X];
      std::vector<FiltrationCut> cuts;
      if (o.variant == Variant::two_sided)
        cuts = two_sided_offsets(x, lambda, o.Rtilde, o.Ctilde, o.scaling, e);
      else
        for (std::size_t a = 0; a < e; ++a) cuts.push_back({a, x[a]});
      for (std::size_t a = 0; a < axes; ++a)
        cond[(t * axes + a) * paths + k] =
            conditional_value(residual, germ.conditioning(a), path, cuts[a], sampler, o.inner_paths);
    }
  });

  ErrorRateReport r;
  r.lambdas = o.lambdas;
  double largest = 0.0, largest_cond = 0.0;
  for (double v : plain) largest = std::max(largest, std::abs(v));
  for (double v : cond) largest_cond = std::max(largest_cond, std::abs(v));
  r.degenerate = largest <= 1e-12;
  r.conditional_vanishes = o.conditional && largest_cond <= 1e-12;
  r.conditional_within_3se = o.conditional;
  std::vector<double> lx, ly, cy, cx;
  for (std::size_t l = 0; l < L; ++l) {
    const std::span<const double> block(plain.data() + l * X * paths, X * paths);
    r.norms.push_back(estimate_lp_norm(block, o.p));
    if (r.norms.back().value > 0.0) {
      lx.push_back(std::log2(o.lambdas[l]));
      ly.push_back(std::log2(r.norms.back().value));
    }
    if (axes) {
      const std::span<const double> cb(cond.data() + l * X * axes * paths, X * axes * paths);
      r.conditional.push_back(estimate_mean(cb));
      r.conditional_norms.push_back(estimate_lp_norm(cb, o.p));
      const auto& m = r.conditional.back();
      if (std::abs(m.mean) > 3 * m.se) r.conditional_within_3se = false;
      if (r.conditional_norms.back().value > 0.0) {
        cx.push_back(std::log2(o.lambdas[l]));
        cy.push_back(std::log2(r.conditional_norms.back().value));
      }
    }
  }
  r.fit.method = "none";
  r.conditional_fit.method = "none";
  if (!r.degenerate && lx.size() >= 2) r.fit = fit_least_squares(lx, ly);
  if (axes && !r.conditional_vanishes && cx.size() >= 2) r.conditional_fit = fit_least_squares(cx, cy);
  return r;
}

// ---------------------------------------------------------------------------

MeanEstimate covariance_moment(const Germ& germ, const WaveletBasis& basis, const GridFunction& psi1,
                               const Point& x1, double lambda1, const GridFunction& psi2, const Point& x2,
                               double lambda2, const CovarianceCheckOptions& o, const PathSampler* sampler) {
  require(!germ.random() || sampler, ErrorKind::argument, "random germ needs a path sampler");
  const std::size_t e = germ.stochastic_dimension();
  require(e > 0, ErrorKind::precondition, "covariance check needs stochastic axes");
  const auto s1 = residual_support(x1, lambda1, o.Rtilde, o.scaling, e);
  const auto s2 = residual_support(x2, lambda2, o.Rtilde, o.scaling, e);
  require(s1.disjoint(s2), ErrorKind::precondition, "residual effective supports overlap");
  std::vector<GridFunction> tests{localize(psi1, x1, lambda1, o.scaling), localize(psi2, x2, lambda2, o.scaling)};
  ReconstructionOptions ro;
  ro.scaling = o.scaling;
  ro.n_min = ro.n_max = o.n_max;
  ro.variant = Variant::covariance;
  const Reconstructor rec(germ, basis, tests, ro);
  const std::size_t paths = germ.random() ? o.paths : 1;
  std::vector<double> prod(paths);
  parallel_for(paths, o.workers, [&](std::size_t k) {
    const PathSample path = sampler ? sampler->sample(k) : PathSample{};
    const double r1 = rec.value(0, 0, path) - germ.evaluate(x1, tests[0], path);
    const double r2 = rec.value(0, 1, path) - germ.evaluate(x2, tests[1], path);
    prod[k] = r1 * r2;
  });
  return estimate_mean(prod);
}

CovarianceCheckReport covariance_uniqueness_check(const Germ& germ, const WaveletBasis& basis,
                                                  const GridFunction& psi1, const GridFunction& psi2,
                                                  const CovarianceCheckOptions& o, const PathSampler* sampler) {
  require(!o.lambdas.empty(), ErrorKind::argument, "empty lambda ladder");
  require(o.axis < germ.stochastic_dimension(), ErrorKind::precondition, "pairs must be separated along a stochastic axis");
  CovarianceCheckReport r;
  r.lambdas = o.lambdas;
  r.within_3se = true;
  std::vector<double> lx, ly;
  for (double l : o.lambdas) {
    Point x2 = o.x;
    x2[o.axis] += 2.0 * std::pow(l, o.scaling[o.axis]) * o.Rtilde;
    const auto m = covariance_moment(germ, basis, psi1, o.x, l, psi2, x2, o.lambda_ratio * l, o, sampler);
    r.moments.push_back(m);
    r.magnitude.push_back(std::abs(m.mean) + 3 * m.se);
    if (std::abs(m.mean) > 3 * m.se) r.within_3se = false;
    if (r.magnitude.back() > 0.0) {
      lx.push_back(std::log2(l));
      ly.push_back(std::log2(r.magnitude.back()));
    }
  }
  r.magnitude_fit.method = "none";
  if (lx.size() >= 2) r.magnitude_fit = fit_least_squares(lx, ly);
  return r;
}

// ---------------------------------------------------------------------------

AdaptedFamily constant_family() {
  return {"constants", [](std::size_t N, Rng&, std::span<double> Z, std::span<double> c) {
            for (std::size_t i = 0; i < N; ++i) Z[i] = c[i] = 1.0 + static_cast<double>(i % 3);
          }};
}

AdaptedFamily gaussian_family() {
  return {"iid-gaussian", [](std::size_t N, Rng& rng, std::span<double> Z, std::span<double> c) {
            for (std::size_t i = 0; i < N; ++i) {
              Z[i] = rng.normal();
              c[i] = 0.0;
            }
          }};
}

AdaptedFamily martingale_family() {
  return {"brownian-martingale", [](std::size_t N, Rng& rng, std::span<double> Z, std::span<double> c) {
            const double sd = std::sqrt(1.0 / static_cast<double>(N));
            double B = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
              const double dB = sd * rng.normal();
              Z[i] = B * dB;
              c[i] = 0.0;
              B += dB;
            }
          }};
}

BdgReport bdg_verify(const AdaptedFamily& family, double p, const std::vector<std::size_t>& Ns, std::size_t paths,
                     std::uint64_t seed, int workers) {
  require(p >= 1.0, ErrorKind::argument, "p must be at least 1");
  require(paths >= 2 && !Ns.empty(), ErrorKind::argument, "need paths and sizes");
  BdgReport rep;
  rep.family = family.name;
  rep.p = p;
  // Fixed chunks keep the reduction order independent of the worker count.
  const std::size_t chunks = std::min<std::size_t>(64, paths);
  std::vector<double> lx, ly;
  for (std::size_t N : Ns) {
    require(N >= 1, ErrorKind::argument, "N must be positive");
    std::vector<double> sums(paths);
    std::vector<double> cond_p(chunks * N, 0.0), mart_p(chunks * N, 0.0);
    parallel_for(chunks, workers, [&](std::size_t ch) {
      std::vector<double> Z(N), c(N);
      for (std::size_t k = ch; k < paths; k += chunks) {
        Rng rng(stream_seed(stream_seed(seed, k, tag_family), N, tag_family));
        family.draw(N, rng, Z, c);
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          s += Z[i];
          cond_p[ch * N + i] += std::pow(std::abs(c[i]), p);
          mart_p[ch * N + i] += std::pow(std::abs(Z[i] - c[i]), p);
        }
        sums[k] = s;
      }
    });
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double a = 0.0, b = 0.0;
      for (std::size_t ch = 0; ch < chunks; ++ch) {
        a += cond_p[ch * N + i];
        b += mart_p[ch * N + i];
      }
      first += std::pow(a / static_cast<double>(paths), 1.0 / p);
      second += std::pow(b / static_cast<double>(paths), 2.0 / p);
    }
    BdgRow row;
    row.N = N;
    const auto lhs = estimate_lp_norm(sums, p);
    row.lhs = lhs.value;
    row.lhs_se = lhs.se;
    row.rhs = first + std::sqrt(second);
    row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : 0.0;
    rep.rows.push_back(row);
    if (row.ratio > 0.0) {
      lx.push_back(std::log2(static_cast<double>(N)));
      ly.push_back(std::log2(row.ratio));
    }
  }
  rep.trend.method = "none";
  if (lx.size() >= 2) rep.trend = fit_least_squares(lx, ly);
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Largest |coefficient| over translates whose support lies in the box.
double sup_inside(const WaveletBasis& basis, const CoefficientArray& c, const Box& box) {
  const std::size_t d = c.extent.size();
  std::vector<std::int64_t> lo(d), hi(d);
  for (std::size_t a = 0; a < d; ++a) {
    const int L = c.component.axes[a].level;
    // support of translate m: [(m + C) 2^-L, (m + R) 2^-L]
    lo[a] = static_cast<std::int64_t>(std::ceil(std::ldexp(box.lo[a], L) - 1e-9)) - basis.support_lo();
    hi[a] = static_cast<std::int64_t>(std::floor(std::ldexp(box.hi[a], L) + 1e-9)) - basis.support_hi();
  }
  double best = 0.0;
  const auto st = c.strides();
  for (std::size_t f = 0; f < c.size(); ++f) {
    bool inside = true;
    for (std::size_t a = 0; a < d && inside; ++a) {
      const auto m = c.first[a] + static_cast<std::int64_t>((f / st[a]) % static_cast<std::size_t>(c.extent[a]));
      inside = m >= lo[a] && m <= hi[a];
    }
    if (inside) best = std::max(best, std::abs(c.values[f]));
  }
  return best;
}

}  // namespace

KolmogorovEstimate kolmogorov_constant(const WaveletBasis& basis, const KolmogorovOptions& o,
                                       const std::function<CellMeasure(std::size_t path)>& distribution) {
  require(o.alpha < 0.0, ErrorKind::argument, "Kolmogorov estimator needs alpha < 0");
  require(o.p >= 1.0 && o.n_max >= 0 && o.paths >= 1, ErrorKind::argument, "invalid estimator options");
  require(o.box.dim() == o.scaling.dim(), ErrorKind::argument, "box and scaling differ in dimension");
  const int S = o.scaling.total();
  KolmogorovEstimate k;
  k.rtilde = static_cast<double>(basis.moments * o.scaling.min_exponent());
  const std::size_t levels = static_cast<std::size_t>(o.n_max) + 1;
  for (int n = 0; n <= o.n_max; ++n) {
    k.levels.push_back(n);
    k.normalizer.push_back(std::exp2(-n * (0.5 - 1.0 / o.p) * S - n * o.alpha));
  }
  k.B_scaling.assign(levels * o.paths, 0.0);
  k.B_detail.assign(levels * o.paths, 0.0);
  k.B.assign(o.paths, 0.0);
  const double decay = o.alpha - S / o.p + k.rtilde;
  parallel_for(o.paths, o.workers, [&](std::size_t path) {
    const CellMeasure mu = distribution(path);
    require(mu.window.dim() == o.scaling.dim() && mu.weights.size() == mu.window.size(), ErrorKind::argument,
            "cell measure does not match its window");
    for (std::size_t i = 0; i < levels; ++i) {
      const int n = k.levels[i];
      const auto c = analyze(basis, scaling_component(n, o.scaling), mu.window, mu.weights, 1.0);
      k.B_scaling[i * o.paths + path] = sup_inside(basis, c, o.box) / k.normalizer[i];
      double best = 0.0;
      for (const auto& comp : detail_components(n, o.scaling))
        best = std::max(best, sup_inside(basis, analyze(basis, comp, mu.window, mu.weights, 1.0), o.box));
      k.B_detail[i * o.paths + path] = best / k.normalizer[i];
    }
    double B = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      double t = k.B_scaling[i * o.paths + path];
      for (std::size_t m = i; m < levels; ++m)
        t += k.B_detail[m * o.paths + path] * std::exp2(-static_cast<double>(m - i) * decay);
      B = std::max(B, std::exp2(-static_cast<double>(k.levels[i]) * o.kappa) * t);
    }
    k.B[path] = B;
  });
  k.norm = estimate_lp_norm(k.B, o.p);
  return k;
}

std::string capability_warning(double alpha, double gamma, int stochastic_total, const WaveletBasis& basis,
                               const ScalingVector& scaling) {
  const double rt = static_cast<double>(basis.moments * scaling.min_exponent());
  std::string w;
  if (alpha + rt <= 0.0)
    w += "alpha + rtilde = " + std::to_string(alpha + rt) + " <= 0; ";
  if (gamma - 0.5 * stochastic_total + rt <= 0.0)
    w += "gamma - E/2 + rtilde = " + std::to_string(gamma - 0.5 * stochastic_total + rt) + " <= 0; ";
  if (!w.empty()) w += "use a basis with more vanishing moments";
  return w;
}

}  // namespace recon
