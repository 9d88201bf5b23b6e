#include "recon/grid.hpp"

#include <algorithm>
#include <cmath>

#include "recon/error.hpp"

namespace recon {

std::size_t CellWindow::size() const {
  std::size_t n = 1;
  for (auto e : extent) n *= static_cast<std::size_t>(std::max<std::int64_t>(e, 0));
  return n;
}

double CellWindow::cell_volume() const {
  double v = 1.0;
  for (auto r : resolution) v /= static_cast<double>(r);
  return v;
}

Box CellWindow::box() const {
  Box b;
  for (std::size_t i = 0; i < dim(); ++i) {
    b.lo.push_back(static_cast<double>(first[i]) / static_cast<double>(resolution[i]));
    b.hi.push_back(static_cast<double>(first[i] + extent[i]) / static_cast<double>(resolution[i]));
  }
  return b;
}

std::vector<std::size_t> CellWindow::strides() const {
  std::vector<std::size_t> s(dim(), 1);
  for (std::size_t a = dim(); a-- > 1;) s[a - 1] = s[a] * static_cast<std::size_t>(extent[a]);
  return s;
}

CellWindow CellWindow::covering(const Box& box, std::vector<std::int64_t> resolution) {
  require(box.dim() == resolution.size(), ErrorKind::argument, "box and resolution differ in dimension");
  CellWindow w;
  w.resolution = std::move(resolution);
  for (std::size_t i = 0; i < box.dim(); ++i) {
    require(w.resolution[i] > 0, ErrorKind::argument, "resolution must be positive");
    require(box.hi[i] >= box.lo[i], ErrorKind::argument, "box with hi < lo");
    const double r = static_cast<double>(w.resolution[i]);
    const auto lo = static_cast<std::int64_t>(std::floor(box.lo[i] * r));
    auto hi = static_cast<std::int64_t>(std::ceil(box.hi[i] * r));
    if (hi == lo) ++hi;
    w.first.push_back(lo);
    w.extent.push_back(hi - lo);
  }
  return w;
}

CellWindow intersect(const CellWindow& a, const CellWindow& b) {
  require(a.same_lattice(b), ErrorKind::resolution, "windows on different lattices");
  CellWindow w;
  w.resolution = a.resolution;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const auto lo = std::max(a.first[i], b.first[i]);
    const auto hi = std::min(a.first[i] + a.extent[i], b.first[i] + b.extent[i]);
    w.first.push_back(lo);
    w.extent.push_back(std::max<std::int64_t>(0, hi - lo));
  }
  return w;
}

GridFunction::GridFunction(CellWindow window, std::vector<double> samples, Box support, Profile source)
    : window_(std::move(window)), samples_(std::move(samples)), support_(std::move(support)), source_(std::move(source)) {
  require(samples_.size() == window_.size(), ErrorKind::argument, "sample count does not match window");
  require(support_.dim() == window_.dim(), ErrorKind::argument, "support dimension does not match window");
}

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (double v : samples_) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::l1_norm() const {
  double s = 0.0;
  for (double v : samples_) s += std::abs(v);
  return s * window_.cell_volume();
}

double GridFunction::l2_norm() const {
  double s = 0.0;
  for (double v : samples_) s += v * v;
  return std::sqrt(s * window_.cell_volume());
}

double GridFunction::reg_norm(int r) const {
  require(r >= 0 && r <= 2, ErrorKind::argument, "reg_norm supports r in [0,2]");
  double total = sup_norm();
  if (r == 0 || samples_.empty()) return total;
  const auto stride = window_.strides();
  const std::size_t d = dim();
  auto value = [&](std::size_t flat, std::span<const std::int64_t> idx, std::size_t axis, int shift) {
    const auto c = idx[axis] + shift;
    if (c < window_.first[axis] || c >= window_.first[axis] + window_.extent[axis]) return 0.0;
    return samples_[static_cast<std::size_t>(static_cast<std::int64_t>(flat) +
                                             shift * static_cast<std::int64_t>(stride[axis]))];
  };
  for (std::size_t a = 0; a < d; ++a) {
    const double h = window_.spacing(a);
    double m1 = 0.0, m2 = 0.0;
    for_each_cell(window_, [&](std::size_t flat, std::span<const std::int64_t> idx) {
      const double up = value(flat, idx, a, 1), dn = value(flat, idx, a, -1);
      m1 = std::max(m1, std::abs(up - dn) / (2.0 * h));
      if (r >= 2) m2 = std::max(m2, std::abs(up - 2.0 * samples_[flat] + dn) / (h * h));
    });
    total += m1 + m2;
  }
  return total;
}

GridFunction sample(const Profile& f, const Box& support, std::vector<std::int64_t> resolution) {
  require(static_cast<bool>(f), ErrorKind::argument, "empty profile");
  CellWindow w = CellWindow::covering(support, std::move(resolution));
  std::vector<double> values(w.size());
  Point y(w.dim());
  for_each_cell(w, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    for (std::size_t a = 0; a < w.dim(); ++a) y[a] = w.midpoint(a, idx[a]);
    values[flat] = support.contains(y) ? f(y) : 0.0;
  });
  return GridFunction(std::move(w), std::move(values), support, f);
}

Profile bump_profile(Point center, std::vector<double> radius) {
  require(center.size() == radius.size(), ErrorKind::argument, "bump center and radius differ in dimension");
  for (double r : radius) require(r > 0.0, ErrorKind::argument, "bump radius must be positive");
  return [center = std::move(center), radius = std::move(radius)](std::span<const double> y) {
    double v = 1.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double t = (y[i] - center[i]) / radius[i];
      if (std::abs(t) >= 1.0) return 0.0;
      v *= std::exp(-1.0 / (1.0 - t * t));
    }
    return v;
  };
}

Box bump_support(const Point& center, const std::vector<double>& radius) {
  Box b;
  for (std::size_t i = 0; i < center.size(); ++i) {
    b.lo.push_back(center[i] - radius[i]);
    b.hi.push_back(center[i] + radius[i]);
  }
  return b;
}

double inner_product(const GridFunction& f, const GridFunction& g) {
  const auto& wf = f.window();
  const auto& wg = g.window();
  require(wf.dim() == wg.dim(), ErrorKind::argument, "inner product of functions of different dimension");
  const std::size_t d = wf.dim();
  std::vector<std::int64_t> res(d), rf(d), rg(d);
  for (std::size_t a = 0; a < d; ++a) {
    const auto r1 = wf.resolution[a], r2 = wg.resolution[a];
    require(std::max(r1, r2) % std::min(r1, r2) == 0, ErrorKind::resolution,
            "incommensurable grids on axis " + std::to_string(a));
    res[a] = std::max(r1, r2);
    rf[a] = res[a] / r1;  // fine cells per cell of f
    rg[a] = res[a] / r2;
  }
  // Overlap in fine-cell indices.
  CellWindow overlap;
  overlap.resolution = res;
  for (std::size_t a = 0; a < d; ++a) {
    const auto lo = std::max(wf.first[a] * rf[a], wg.first[a] * rg[a]);
    const auto hi = std::min((wf.first[a] + wf.extent[a]) * rf[a], (wg.first[a] + wg.extent[a]) * rg[a]);
    overlap.first.push_back(lo);
    overlap.extent.push_back(std::max<std::int64_t>(0, hi - lo));
  }
  if (overlap.size() == 0) return 0.0;
  const auto sf = wf.strides(), sg = wg.strides();
  const auto fs = f.samples(), gs = g.samples();
  auto floordiv = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  double sum = 0.0;
  for_each_cell(overlap, [&](std::size_t, std::span<const std::int64_t> idx) {
    std::size_t i = 0, j = 0;
    for (std::size_t a = 0; a < d; ++a) {
      i += static_cast<std::size_t>(floordiv(idx[a], rf[a]) - wf.first[a]) * sf[a];
      j += static_cast<std::size_t>(floordiv(idx[a], rg[a]) - wg.first[a]) * sg[a];
    }
    sum += fs[i] * gs[j];
  });
  return sum * overlap.cell_volume();
}

namespace {

// Multilinear interpolation of cell-midpoint samples, zero outside the window.
double interpolate(const GridFunction& f, std::span<const double> y) {
  const auto& w = f.window();
  const std::size_t d = w.dim();
  const auto stride = w.strides();
  std::vector<std::int64_t> base(d);
  std::vector<double> frac(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double u = y[a] * static_cast<double>(w.resolution[a]) - 0.5;
    const double fl = std::floor(u);
    base[a] = static_cast<std::int64_t>(fl);
    frac[a] = u - fl;
  }
  double sum = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    bool inside = true;
    for (std::size_t a = 0; a < d; ++a) {
      const bool up = (corner >> a) & 1u;
      const auto c = base[a] + (up ? 1 : 0);
      weight *= up ? frac[a] : 1.0 - frac[a];
      if (c < w.first[a] || c >= w.first[a] + w.extent[a]) {
        inside = false;
        break;
      }
      flat += static_cast<std::size_t>(c - w.first[a]) * stride[a];
    }
    if (inside && weight != 0.0) sum += weight * f.samples()[flat];
  }
  return sum;
}

}  // namespace

GridFunction localize(const GridFunction& psi, const Point& x, double lambda, const ScalingVector& scaling,
                      const Box* working_box) {
  const std::size_t d = psi.dim();
  require(x.size() == d && scaling.dim() == d, ErrorKind::argument, "localize: dimension mismatch");
  require(lambda > 0.0 && lambda <= 1.0, ErrorKind::argument, "localize: lambda must lie in (0,1]");
  Box support;
  std::vector<double> factor(d);
  for (std::size_t a = 0; a < d; ++a) {
    factor[a] = std::pow(lambda, scaling[a]);
    support.lo.push_back(x[a] + factor[a] * psi.support().lo[a]);
    support.hi.push_back(x[a] + factor[a] * psi.support().hi[a]);
  }
  if (working_box) {
    require(working_box->contains(support), ErrorKind::domain, "localized support escapes the working box");
  }
  const double amplitude = std::pow(lambda, -scaling.total());
  auto pull_back = [x, factor](std::span<const double> y) {
    Point u(y.size());
    for (std::size_t a = 0; a < y.size(); ++a) u[a] = (y[a] - x[a]) / factor[a];
    return u;
  };
  if (psi.source()) {
    Profile src = psi.source();
    Profile f = [src, pull_back, amplitude](std::span<const double> y) { return amplitude * src(pull_back(y)); };
    return sample(f, support, psi.window().resolution);
  }
  CellWindow w = CellWindow::covering(support, psi.window().resolution);
  std::vector<double> values(w.size());
  Point y(d);
  for_each_cell(w, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    for (std::size_t a = 0; a < d; ++a) y[a] = w.midpoint(a, idx[a]);
    values[flat] = amplitude * interpolate(psi, pull_back(y));
  });
  return GridFunction(std::move(w), std::move(values), support);
}

bool window_contains(const CellWindow& outer, const CellWindow& inner) {
  if (!outer.same_lattice(inner)) return false;
  for (std::size_t a = 0; a < outer.dim(); ++a) {
    if (inner.extent[a] == 0) continue;
    if (inner.first[a] < outer.first[a] || inner.first[a] + inner.extent[a] > outer.first[a] + outer.extent[a])
      return false;
  }
  return true;
}

}  // namespace recon
