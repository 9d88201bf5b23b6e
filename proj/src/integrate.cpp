#include "recon/integrate.hpp"

#include <cmath>

#include "recon/error.hpp"
#include "recon/parallel.hpp"
#include "recon/reconstruct.hpp"

namespace recon {

SewingInput extend_domain(TwoParameter A, double T) {
  require(static_cast<bool>(A) && T > 0.0, ErrorKind::argument, "extension needs A and T > 0");
  auto base = std::make_shared<TwoParameter>(std::move(A));
  std::function<double(double, double)> ext = [base, T](double s, double t) -> double {
    double sign = 1.0;
    if (s > t) {
      std::swap(s, t);
      sign = -1.0;
    }
    if (s >= T || t <= 0.0) return 0.0;
    return sign * (*base)(std::max(s, 0.0), std::min(t, T));
  };
  return {ext, T};
}

double SewingOutput::at(double t) const {
  const double scale = std::ldexp(1.0, level) / T;
  const double u = t * scale;
  const auto last = static_cast<std::int64_t>(nodes.size()) - 1;
  require(u >= -1e-9 && u <= static_cast<double>(last) + 1e-9, ErrorKind::domain, "sewn process evaluated outside [0,T]");
  auto k = static_cast<std::int64_t>(std::floor(u + 1e-9));
  k = std::clamp<std::int64_t>(k, 0, last);
  const double tk = static_cast<double>(k) / scale;
  if (t <= tk) return nodes[static_cast<std::size_t>(k)];
  return nodes[static_cast<std::size_t>(k)] + A(tk, t);
}

SewingOutput sew(const SewingInput& input, int level) {
  require(level >= 2, ErrorKind::argument, "sewing needs a dyadic level >= 2");
  require(static_cast<bool>(input.A), ErrorKind::argument, "empty two-parameter process");
  SewingOutput out;
  out.level = level;
  out.T = input.T;
  out.A = input.A;
  const std::size_t n = std::size_t{1} << level;
  out.nodes.resize(n + 1);
  out.nodes[0] = 0.0;
  const double h = input.T / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    out.nodes[i + 1] = out.nodes[i] + input.A(static_cast<double>(i) * h, static_cast<double>(i + 1) * h);
  return out;
}

SewingRate sewing_error_rate(const TwoParameterFactory& A, const std::function<double(const PathSample&)>& exact,
                             double T, const std::vector<int>& levels, const PathSampler& sampler, std::size_t paths,
                             int workers) {
  require(!levels.empty() && paths >= 2, ErrorKind::argument, "need levels and paths");
  std::vector<double> err(levels.size() * paths);
  parallel_for(paths, workers, [&](std::size_t k) {
    const PathSample path = sampler.sample(k);
    const SewingInput in{A(path), T};
    const double target = exact(path);
    for (std::size_t i = 0; i < levels.size(); ++i) err[i * paths + k] = sew(in, levels[i]).nodes.back() - target;
  });
  SewingRate r;
  r.levels = levels;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    r.errors.push_back(estimate_lp_norm(std::span<const double>(err).subspan(i * paths, paths), 2.0));
    if (r.errors.back().value > 0.0) {
      x.push_back(levels[i]);
      y.push_back(std::log2(r.errors.back().value));
    }
  }
  r.fit.method = "none";
  if (x.size() >= 2) r.fit = fit_least_squares(x, y);
  return r;
}

SewingEquivalence sewing_equivalence_check(const TwoParameterFactory& A, const WaveletBasis& basis,
                                           const GridFunction& psi, const SewingEquivalenceOptions& o,
                                           const PathSampler& sampler) {
  require(psi.dim() == 1, ErrorKind::argument, "sewing equivalence is one-dimensional");
  require(psi.support().lo[0] > 0.0 && psi.support().hi[0] < o.T, ErrorKind::precondition,
          "test function must be supported inside (0,T)");
  const double T = o.T;
  TwoParameterFactory extended = [A, T](const PathSample& p) { return extend_domain(A(p), T).A; };
  const SewingGerm germ(extended);
  ReconstructionOptions ro;
  ro.scaling = ScalingVector::canonical(1);
  ro.n_min = o.n_min;
  ro.n_max = o.n_max;
  ro.paths = o.paths;
  ro.workers = o.workers;
  const Reconstructor rec(germ, basis, {psi}, ro);
  const std::size_t L = rec.levels();
  std::vector<double> values(L * o.paths), diff(o.paths), gap(o.paths);
  const CellWindow& w = psi.window();
  const auto ps = psi.samples();
  parallel_for(o.paths, o.workers, [&](std::size_t k) {
    const PathSample path = sampler.sample(k);
    const auto v = rec.values(path);
    for (std::size_t i = 0; i < L; ++i) values[i * o.paths + k] = v[i];
    const SewingOutput I = sew({A(path), T}, o.sew_level);
    // -sum I(t_c) psi'(t_c) dt with the germ's own difference stencil.
    const double centered = SewingGerm::apply([&](double, double t) { return I.at(t); }, 0.0, psi);
    double increments = 0.0;
    for (std::int64_t c = 0; c < w.extent[0]; ++c) {
      const double lo = static_cast<double>(w.first[0] + c) * w.spacing(0);
      increments += ps[static_cast<std::size_t>(c)] * (I.at(lo + w.spacing(0)) - I.at(lo));
    }
    diff[k] = v[L - 1] - centered;
    gap[k] = centered - increments;
  });
  SewingEquivalence r;
  std::vector<double> inc, d(o.paths);
  for (std::size_t i = 0; i + 1 < L; ++i) {
    for (std::size_t k = 0; k < o.paths; ++k) d[k] = values[(i + 1) * o.paths + k] - values[i * o.paths + k];
    r.increments.push_back(estimate_lp_norm(d, 2.0));
    inc.push_back(r.increments.back().value);
  }
  r.difference = estimate_lp_norm(diff, 2.0);
  r.mean_difference = estimate_mean(diff);
  r.quadrature_tolerance = estimate_lp_norm(gap, 2.0).value;
  r.tail_bound = geometric_tail(inc);
  r.threshold = 3 * r.difference.se + r.tail_bound + r.quadrature_tolerance;
  r.pass = r.difference.value <= r.threshold;
  return r;
}

double walsh_integral(const RandomField& X, const NoiseField& W, const GridFunction& psi) {
  require(X.dim() == W.window.dim(), ErrorKind::argument, "field and noise differ in dimension");
  require(psi.dim() == W.window.dim(), ErrorKind::argument, "test function and noise differ in dimension");
  require(psi.window().same_lattice(W.window), ErrorKind::argument, "test function not on the noise lattice");
  require(window_contains(W.window, psi.window()), ErrorKind::domain, "test function leaves the noise window");
  const auto sw = W.window.strides();
  const auto ps = psi.samples();
  const std::size_t d = W.window.dim();
  Point corner(d);
  double sum = 0.0;
  for_each_cell(psi.window(), [&](std::size_t flat, std::span<const std::int64_t> idx) {
    if (ps[flat] == 0.0) return;
    std::size_t j = 0;
    for (std::size_t a = 0; a < d; ++a) {
      corner[a] = static_cast<double>(idx[a]) * W.window.spacing(a);
      j += static_cast<std::size_t>(idx[a] - W.window.first[a]) * sw[a];
    }
    sum += X.at(corner) * ps[flat] * W.cells[j];
  });
  return sum;
}

namespace {

// int ||X(s,.) psi(s,.)||_K^2 ds with X read at lower cell corners.
double weighted_k_integral(const std::function<double(const Point&)>& X, const CovarianceMeasure& K,
                           const GridFunction& psi) {
  const CellWindow& w = psi.window();
  const std::size_t d = w.dim();
  const auto ps = psi.samples();
  const double dt = w.spacing(0);
  CellWindow space;
  for (std::size_t a = 1; a < d; ++a) {
    space.resolution.push_back(w.resolution[a]);
    space.first.push_back(w.first[a]);
    space.extent.push_back(w.extent[a]);
  }
  const std::size_t slice = d == 1 ? 1 : space.size();
  std::vector<double> f(slice);
  Point corner(d);
  double total = 0.0;
  for (std::int64_t s = 0; s < w.extent[0]; ++s) {
    corner[0] = static_cast<double>(w.first[0] + s) * dt;
    if (d == 1) {
      const double v = X(corner) * ps[static_cast<std::size_t>(s)];
      total += v * v * dt;
      continue;
    }
    for_each_cell(space, [&](std::size_t flat, std::span<const std::int64_t> idx) {
      for (std::size_t a = 1; a < d; ++a) corner[a] = static_cast<double>(idx[a - 1]) * w.spacing(a);
      f[flat] = X(corner) * ps[static_cast<std::size_t>(s) * slice + flat];
    });
    total += k_norm_squared(K, space, f) * dt;
  }
  return total;
}

}  // namespace

double walsh_variance(const RandomField& X, const CovarianceMeasure& K, const GridFunction& psi) {
  require(X.dim() == psi.dim(), ErrorKind::argument, "field and test function differ in dimension");
  return weighted_k_integral([&](const Point& z) { return X.at(z); }, K, psi);
}

HomogeneityReport homogeneity_check(const CovarianceMeasure& K, std::size_t space_dim, const Profile& phi,
                                    const Box& phi_support, const Point& center, const std::vector<double>& lambdas,
                                    int J) {
  const std::size_t d = space_dim + 1;
  require(phi_support.dim() == d && center.size() == d, ErrorKind::argument, "phi must live on time x space");
  require(lambdas.size() >= 2, ErrorKind::argument, "need at least two scales");
  require(J >= 1 && J <= 12, ErrorKind::argument, "grid exponent out of range");
  const ScalingVector S = ScalingVector::canonical(d);
  const GridFunction base = sample(phi, phi_support, std::vector<std::int64_t>(d, std::int64_t{1} << J));
  HomogeneityReport r;
  r.lambdas = lambdas;
  r.expected_slope = 2.0 * (-static_cast<double>(space_dim) - 0.5 + 0.5 * K.delta);
  std::vector<double> x, y;
  for (double l : lambdas) {
    const GridFunction loc = localize(base, center, l, S);
    const double v = weighted_k_integral([](const Point&) { return 1.0; }, K, loc);
    r.values.push_back(v);
    x.push_back(std::log2(l));
    y.push_back(std::log2(v));
  }
  r.fit = fit_least_squares(x, y);
  return r;
}

}  // namespace recon
