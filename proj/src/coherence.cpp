#include <cmath>
#include <json.hpp>

#include "recon/error.hpp"
#include "recon/germ.hpp"
#include "recon/parallel.hpp"

namespace recon {

std::string to_string(CoherenceMode m) {
  switch (m) {
    case CoherenceMode::plain: return "plain";
    case CoherenceMode::conditional: return "conditional";
    case CoherenceMode::covariance: return "covariance";
  }
  return "?";
}

CoherenceMode parse_coherence_mode(const std::string& name) {
  if (name == "plain") return CoherenceMode::plain;
  if (name == "conditional") return CoherenceMode::conditional;
  if (name == "covariance") return CoherenceMode::covariance;
  fail(ErrorKind::validation, "unknown coherence mode '" + name + "'");
}

CoherenceDesign CoherenceDesign::standard(Point x, ScalingVector scaling) {
  CoherenceDesign d;
  d.x = std::move(x);
  d.scaling = std::move(scaling);
  for (int k = 7; k >= 3; --k) d.scales.push_back(std::ldexp(1.0, -k));
  for (int k = 6; k >= 2; --k) d.distances.push_back(std::ldexp(1.0, -k));
  return d;
}

std::string CoherenceReport::to_json() const {
  nlohmann::json j;
  j["mode"] = to_string(mode);
  j["alpha_hat"] = alpha_hat;
  j["gamma_hat"] = gamma_hat;
  j["gap_exponent"] = gap_exponent;
  j["se_alpha"] = se_alpha;
  j["se_gamma"] = se_gamma;
  j["r_squared"] = r_squared;
  j["stochastic_total"] = stochastic_total;
  j["paths"] = paths;
  j["p"] = p;
  j["seed"] = seed;
  j["degenerate"] = degenerate;
  j["vanishing_conditional"] = vanishing_conditional;
  if (mode == CoherenceMode::covariance) j["moments_within_3se"] = moments_within_3se;
  if (degenerate) j["note"] = "all differences vanish: coherent at every gamma";
  else if (vanishing_conditional) j["note"] = "conditional parts vanish: gamma is not identifiable, bound not falsified";
  auto& pts = j["design"];
  pts = nlohmann::json::array();
  for (const auto& q : points) pts.push_back({{"scale", q.scale}, {"distance", q.distance}, {"value", q.value}, {"se", q.se}});
  return j.dump(2);
}

bool EffectiveSupport::disjoint(const EffectiveSupport& other) const {
  const std::size_t e = std::min(stochastic_dim, other.stochastic_dim);
  return disjoint_on_axes(box, other.box, e);
}

EffectiveSupport difference_support(const Point& x, const Point& y, const Box& psi_support, std::size_t e) {
  require(x.size() == y.size() && x.size() == psi_support.dim(), ErrorKind::argument, "dimension mismatch");
  EffectiveSupport s;
  s.stochastic_dim = e;
  s.box = psi_support;
  for (std::size_t a = 0; a < x.size(); ++a) {
    s.box.lo[a] = std::min({s.box.lo[a], x[a], y[a]});
    s.box.hi[a] = std::max({s.box.hi[a], x[a], y[a]});
  }
  return s;
}

EffectiveSupport residual_support(const Point& x, double lambda, double Rtilde, const ScalingVector& scaling,
                                  std::size_t e) {
  require(x.size() == scaling.dim(), ErrorKind::argument, "dimension mismatch");
  require(lambda > 0.0 && Rtilde > 0.0, ErrorKind::argument, "scale and radius must be positive");
  EffectiveSupport s;
  s.stochastic_dim = e;
  s.box.lo.resize(x.size());
  s.box.hi.resize(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double w = 2.0 * std::pow(lambda, scaling[a]) * Rtilde;
    s.box.lo[a] = a < e ? x[a] : x[a] - w;
    s.box.hi[a] = x[a] + w;
  }
  return s;
}

namespace {

struct DesignCell {
  double scale, distance;
  Point x1, y1, x2, y2;
  GridFunction psi1, psi2;  // localized at y1 / y2
};

Point shifted(const Point& x, std::size_t axis, double by) {
  Point y = x;
  y[axis] += by;
  return y;
}

}  // namespace

CoherenceReport estimate_coherence(const Germ& germ, const GridFunction& psi, const CoherenceDesign& design,
                                   CoherenceMode mode, const PathSampler* sampler) {
  const std::size_t d = psi.dim();
  const std::size_t e = germ.stochastic_dimension();
  require(design.x.size() == d && design.scaling.dim() == d, ErrorKind::argument, "design dimension mismatch");
  require(design.scales.size() * design.distances.size() >= 12, ErrorKind::argument,
          "coherence fit needs at least 12 design points");
  require(design.direction < d, ErrorKind::argument, "design direction out of range");
  for (std::size_t a = 0; a < e; ++a)
    require(psi.support().lo[a] >= 0.0, ErrorKind::precondition,
            "test function must have non-negative support on stochastic axes");
  if (mode == CoherenceMode::conditional) {
    require(e > 0, ErrorKind::capability, "conditional mode needs a germ with stochastic axes");
    for (std::size_t a = 0; a < e; ++a) {
      const Conditioning c = germ.conditioning(a);
      require(c != Conditioning::none, ErrorKind::capability, "germ is not adapted along a stochastic axis");
      require(c != Conditioning::monte_carlo || (sampler && sampler->can_resample(a)), ErrorKind::capability,
              "conditional Monte Carlo is unavailable for this noise");
    }
  }
  if (mode == CoherenceMode::covariance)
    require(design.direction < e, ErrorKind::precondition, "covariance pairs are separated along a stochastic axis");
  const std::size_t paths = (germ.random() && sampler) ? design.paths : 1;
  require(!germ.random() || sampler, ErrorKind::argument, "random germ needs a path sampler");

  // Design: y = x + dist^{s_i} e_i, so |x - y| = dist.
  const int s_dir = design.scaling[design.direction];
  std::vector<DesignCell> cells;
  for (double eps : design.scales)
    for (double dist : design.distances) {
      DesignCell c;
      c.scale = eps;
      c.distance = dist;
      c.x1 = design.x;
      c.y1 = shifted(c.x1, design.direction, std::pow(dist, s_dir));
      c.psi1 = localize(psi, c.y1, eps, design.scaling);
      if (mode == CoherenceMode::covariance) {
        const auto s1 = difference_support(c.x1, c.y1, c.psi1.support(), e);
        c.x2 = c.x1;
        c.x2[design.direction] = s1.box.hi[design.direction];
        c.y2 = shifted(c.x2, design.direction, std::pow(dist, s_dir));
        c.psi2 = localize(psi, c.y2, eps, design.scaling);
        const auto s2 = difference_support(c.x2, c.y2, c.psi2.support(), e);
        require(s1.disjoint(s2), ErrorKind::precondition, "stochastic effective supports overlap");
      }
      cells.push_back(std::move(c));
    }

  // samples[(cell * axes + axis) * paths + path]
  const std::size_t axes = mode == CoherenceMode::conditional ? e : 1;
  std::vector<double> samples(cells.size() * axes * paths);
  parallel_for(paths, design.workers, [&](std::size_t i) {
    const PathSample path = sampler ? sampler->sample(i) : PathSample{};
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const DesignCell& c = cells[k];
      auto diff = [&](const Point& x, const Point& y, const GridFunction& g) {
        return [&, x, y](const PathSample& p) { return germ.evaluate(x, g, p) - germ.evaluate(y, g, p); };
      };
      if (mode == CoherenceMode::plain) {
        samples[k * paths + i] = diff(c.x1, c.y1, c.psi1)(path);
      } else if (mode == CoherenceMode::conditional) {
        for (std::size_t a = 0; a < e; ++a) {
          const FiltrationCut cut{a, c.x1[a]};
          samples[(k * axes + a) * paths + i] =
              conditional_value(diff(c.x1, c.y1, c.psi1), germ.conditioning(a), path, cut, sampler, design.inner_paths);
        }
      } else {
        samples[k * paths + i] = diff(c.x1, c.y1, c.psi1)(path) * diff(c.x2, c.y2, c.psi2)(path);
      }
    }
  });

  CoherenceReport r;
  r.mode = mode;
  r.paths = paths;
  r.p = design.p;
  r.seed = sampler ? sampler->seed() : 0;
  r.stochastic_total = design.scaling.partial_total(e);
  double largest = 0.0;
  for (double v : samples) largest = std::max(largest, std::abs(v));
  r.moments_within_3se = mode == CoherenceMode::covariance;
  std::vector<double> u, v, y;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    CoherencePoint q;
    q.scale = cells[k].scale;
    q.distance = cells[k].distance;
    double magnitude = 0.0;
    if (mode == CoherenceMode::covariance) {
      const auto m = estimate_mean(std::span<const double>(samples).subspan(k * paths, paths));
      q.value = m.mean;
      q.se = m.se;
      if (std::abs(m.mean) > 3 * m.se) r.moments_within_3se = false;
      magnitude = std::abs(m.mean) + 3 * m.se;
    } else {
      // Largest norm over the conditioning axes.
      for (std::size_t a = 0; a < axes; ++a) {
        const auto n = estimate_lp_norm(std::span<const double>(samples).subspan((k * axes + a) * paths, paths), design.p);
        if (n.value >= q.value) {
          q.value = n.value;
          q.se = n.se;
        }
      }
      magnitude = q.value;
    }
    r.points.push_back(q);
    if (magnitude > 0.0) {
      u.push_back(std::log2(q.scale));
      v.push_back(std::log2(q.distance + q.scale));
      y.push_back(std::log2(magnitude));
    }
  }
  if (largest <= 1e-12) {
    r.degenerate = true;
    r.vanishing_conditional = mode == CoherenceMode::conditional;
    return r;
  }
  require(u.size() >= 12, ErrorKind::numeric, "too few non-zero design points for the coherence fit");
  const TwoWayFit f = fit_two_way(u, v, y);
  const double scale = mode == CoherenceMode::covariance ? 0.5 : 1.0;
  r.alpha_hat = scale * f.a;
  r.gap_exponent = scale * f.b;
  r.se_alpha = scale * f.se_a;
  r.se_gamma = scale * std::hypot(f.se_a, f.se_b);
  r.r_squared = f.r2;
  r.gamma_hat = r.alpha_hat + r.gap_exponent;
  if (mode == CoherenceMode::plain) r.gamma_hat += 0.5 * r.stochastic_total;
  return r;
}

}  // namespace recon
