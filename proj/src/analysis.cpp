#include <algorithm>
#include <cmath>
#include <sstream>

#include "recon/error.hpp"
#include "recon/fit.hpp"
#include "recon/wavelet.hpp"

namespace recon {

int dyadic_exponent(std::int64_t r) {
  if (r <= 0 || (r & (r - 1)) != 0) return -1;
  int e = 0;
  while ((std::int64_t{1} << e) < r) ++e;
  return e;
}

bool LevelComponent::is_detail() const {
  return std::any_of(axes.begin(), axes.end(), [](const AxisSpec& a) { return a.detail; });
}

std::string LevelComponent::label() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (i) os << 'x';
    os << (axes[i].detail ? "hat" : "phi") << axes[i].level;
  }
  return os.str();
}

LevelComponent scaling_component(int n, const ScalingVector& scaling) {
  require(n >= 0, ErrorKind::argument, "mesh level must be >= 0");
  LevelComponent c;
  for (std::size_t i = 0; i < scaling.dim(); ++i) c.axes.push_back({n * scaling[i], false});
  return c;
}

std::vector<LevelComponent> detail_components(int n, const ScalingVector& scaling) {
  require(n >= 0, ErrorKind::argument, "mesh level must be >= 0");
  const std::size_t d = scaling.dim();
  // Per axis: choice 0 is phi at n s_i, choice j >= 1 is phihat at n s_i + j - 1.
  std::vector<int> choice(d, 0);
  std::vector<LevelComponent> out;
  while (true) {
    std::size_t a = 0;
    while (a < d && choice[a] == scaling[a]) choice[a++] = 0;
    if (a == d) break;
    ++choice[a];
    LevelComponent c;
    for (std::size_t i = 0; i < d; ++i) {
      if (choice[i] == 0)
        c.axes.push_back({n * scaling[i], false});
      else
        c.axes.push_back({n * scaling[i] + choice[i] - 1, true});
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::size_t> CoefficientArray::strides() const {
  std::vector<std::size_t> s(extent.size(), 1);
  for (std::size_t a = extent.size(); a-- > 1;) s[a - 1] = s[a] * static_cast<std::size_t>(extent[a]);
  return s;
}

Point CoefficientArray::point(std::size_t flat) const {
  const std::size_t d = extent.size();
  Point y(d);
  for (std::size_t a = d; a-- > 0;) {
    const auto m = first[a] + static_cast<std::int64_t>(flat % static_cast<std::size_t>(extent[a]));
    flat /= static_cast<std::size_t>(extent[a]);
    y[a] = std::ldexp(static_cast<double>(m), -component.axes[a].level);
  }
  return y;
}

namespace {

struct AxisKernel {
  const std::vector<double>* table = nullptr;
  std::int64_t cells_per_unit_shift = 1;  // 2^D
  std::int64_t table_first = 0;           // C 2^D
  std::int64_t C = 0, R = 0;
  double scale = 1.0;                     // 2^{L/2}

  // Cells touched by translate m: [(m + C) 2^D, (m + R) 2^D)
  std::int64_t cell_lo(std::int64_t m) const { return (m + C) * cells_per_unit_shift; }
  std::int64_t cell_hi(std::int64_t m) const { return (m + R) * cells_per_unit_shift; }
  double value(std::int64_t m, std::int64_t c) const {
    return scale * (*table)[static_cast<std::size_t>(c - m * cells_per_unit_shift - table_first)];
  }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

AxisKernel make_kernel(const WaveletBasis& basis, const AxisSpec& spec, std::int64_t resolution) {
  const int J = dyadic_exponent(resolution);
  require(J >= 0, ErrorKind::resolution, "wavelet analysis needs power-of-two resolutions");
  const int D = J - spec.level;
  require(D >= (spec.detail ? 1 : 0), ErrorKind::resolution,
          "grid resolution 2^" + std::to_string(J) + " too coarse for level " + std::to_string(spec.level));
  AxisKernel k;
  k.table = spec.detail ? &basis.detail_table(D) : &basis.scaling_table(D);
  k.cells_per_unit_shift = std::int64_t{1} << D;
  k.C = basis.support_lo();
  k.R = basis.support_hi();
  k.table_first = k.C * k.cells_per_unit_shift;
  k.scale = std::pow(2.0, 0.5 * spec.level);
  return k;
}

}  // namespace

CoefficientArray analyze(const WaveletBasis& basis, const LevelComponent& component, const CellWindow& window,
                         std::span<const double> data, double weight) {
  const std::size_t d = window.dim();
  require(component.axes.size() == d, ErrorKind::argument, "component and window differ in dimension");
  require(data.size() == window.size(), ErrorKind::argument, "data does not match window");
  CoefficientArray out;
  out.component = component;
  // Work array with shape evolving axis by axis.
  std::vector<std::int64_t> shape(window.extent);
  std::vector<double> cur(data.begin(), data.end());
  for (double& v : cur) v *= weight;
  for (std::size_t a = 0; a < d; ++a) {
    const AxisKernel k = make_kernel(basis, component.axes[a], window.resolution[a]);
    const std::int64_t c0 = window.first[a], n_in = window.extent[a];
    const std::int64_t m_lo = floor_div(c0, k.cells_per_unit_shift) - k.R + 1;
    const std::int64_t m_hi = ceil_div(c0 + n_in, k.cells_per_unit_shift) - k.C - 1;
    const std::int64_t n_out = std::max<std::int64_t>(0, m_hi - m_lo + 1);
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < a; ++i) outer *= static_cast<std::size_t>(shape[i]);
    for (std::size_t i = a + 1; i < d; ++i) inner *= static_cast<std::size_t>(shape[i]);
    std::vector<double> next(outer * static_cast<std::size_t>(n_out) * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = cur.data() + o * static_cast<std::size_t>(n_in) * inner;
      double* dst = next.data() + o * static_cast<std::size_t>(n_out) * inner;
      for (std::int64_t mi = 0; mi < n_out; ++mi) {
        const std::int64_t m = m_lo + mi;
        const std::int64_t lo = std::max(c0, k.cell_lo(m)), hi = std::min(c0 + n_in, k.cell_hi(m));
        double* drow = dst + static_cast<std::size_t>(mi) * inner;
        if (inner == 1) {
          double s = 0.0;
          for (std::int64_t c = lo; c < hi; ++c) s += k.value(m, c) * src[c - c0];
          drow[0] = s;
        } else {
          for (std::int64_t c = lo; c < hi; ++c) {
            const double g = k.value(m, c);
            const double* srow = src + static_cast<std::size_t>(c - c0) * inner;
            for (std::size_t i = 0; i < inner; ++i) drow[i] += g * srow[i];
          }
        }
      }
    }
    shape[a] = n_out;
    out.first.push_back(m_lo);
    out.extent.push_back(n_out);
    cur.swap(next);
  }
  out.values = std::move(cur);
  return out;
}

CellWindow synthesis_window(const WaveletBasis& basis, const CoefficientArray& coefficients,
                            const std::vector<std::int64_t>& resolution) {
  CellWindow w;
  w.resolution = resolution;
  for (std::size_t a = 0; a < coefficients.extent.size(); ++a) {
    const AxisKernel k = make_kernel(basis, coefficients.component.axes[a], resolution[a]);
    const std::int64_t lo = k.cell_lo(coefficients.first[a]);
    const std::int64_t hi = k.cell_hi(coefficients.first[a] + coefficients.extent[a] - 1);
    w.first.push_back(lo);
    w.extent.push_back(std::max<std::int64_t>(0, hi - lo));
  }
  return w;
}

std::vector<double> synthesize(const WaveletBasis& basis, const CoefficientArray& coefficients,
                               const CellWindow& target) {
  const std::size_t d = target.dim();
  require(coefficients.extent.size() == d, ErrorKind::argument, "coefficients and window differ in dimension");
  // Expand one axis at a time; axes not yet expanded keep their coefficient shape.
  std::vector<std::int64_t> shape(coefficients.extent);
  std::vector<double> cur(coefficients.values);
  for (std::size_t a = 0; a < d; ++a) {
    const AxisKernel k = make_kernel(basis, coefficients.component.axes[a], target.resolution[a]);
    const std::int64_t m_lo = coefficients.first[a], n_m = coefficients.extent[a];
    const std::int64_t c0 = target.first[a], n_out = target.extent[a];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < a; ++i) outer *= static_cast<std::size_t>(shape[i]);
    for (std::size_t i = a + 1; i < d; ++i) inner *= static_cast<std::size_t>(shape[i]);
    std::vector<double> next(outer * static_cast<std::size_t>(n_out) * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = cur.data() + o * static_cast<std::size_t>(n_m) * inner;
      double* dst = next.data() + o * static_cast<std::size_t>(n_out) * inner;
      for (std::int64_t mi = 0; mi < n_m; ++mi) {
        const std::int64_t m = m_lo + mi;
        const std::int64_t lo = std::max(c0, k.cell_lo(m)), hi = std::min(c0 + n_out, k.cell_hi(m));
        const double* srow = src + static_cast<std::size_t>(mi) * inner;
        for (std::int64_t c = lo; c < hi; ++c) {
          const double g = k.value(m, c);
          double* drow = dst + static_cast<std::size_t>(c - c0) * inner;
          for (std::size_t i = 0; i < inner; ++i) drow[i] += g * srow[i];
        }
      }
    }
    shape[a] = n_out;
    cur.swap(next);
  }
  return cur;
}

GridFunction basis_function(const WaveletBasis& basis, const LevelComponent& component,
                            std::span<const std::int64_t> m, const std::vector<std::int64_t>& resolution) {
  CoefficientArray unit;
  unit.component = component;
  unit.first.assign(m.begin(), m.end());
  unit.extent.assign(m.size(), 1);
  unit.values = {1.0};
  CellWindow w = synthesis_window(basis, unit, resolution);
  auto values = synthesize(basis, unit, w);
  Box support = w.box();
  return GridFunction(std::move(w), std::move(values), std::move(support));
}

double DyadicMesh::spacing(std::size_t axis) const { return std::ldexp(1.0, -level * scaling[axis]); }

std::size_t DyadicMesh::size() const {
  std::size_t n = 1;
  for (auto e : extent) n *= static_cast<std::size_t>(e);
  return n;
}

Point DyadicMesh::point(std::size_t flat) const {
  const std::size_t d = extent.size();
  Point y(d);
  for (std::size_t a = d; a-- > 0;) {
    const auto m = first[a] + static_cast<std::int64_t>(flat % static_cast<std::size_t>(extent[a]));
    flat /= static_cast<std::size_t>(extent[a]);
    const bool active = a >= first_axis && a <= last_axis;
    y[a] = offset[a] + (active ? static_cast<double>(m) * spacing(a) : 0.0);
  }
  return y;
}

DyadicMesh mesh_points(int n, const ScalingVector& scaling, const Box& box, const WaveletBasis& basis, Point offset,
                       std::size_t first_axis, std::size_t last_axis) {
  const std::size_t d = scaling.dim();
  require(n >= 0, ErrorKind::argument, "mesh level must be >= 0");
  require(box.dim() == d, ErrorKind::argument, "box and scaling differ in dimension");
  if (offset.empty()) offset.assign(d, 0.0);
  require(offset.size() == d, ErrorKind::argument, "offset and scaling differ in dimension");
  if (last_axis == SIZE_MAX) last_axis = d - 1;
  require(first_axis <= last_axis && last_axis < d, ErrorKind::argument, "invalid active axis range");
  DyadicMesh mesh;
  mesh.level = n;
  mesh.scaling = scaling;
  mesh.box = box;
  mesh.first_axis = first_axis;
  mesh.last_axis = last_axis;
  mesh.offset = offset;
  const double C = basis.support_lo(), R = basis.support_hi();
  for (std::size_t a = 0; a < d; ++a) {
    if (a < first_axis || a > last_axis) {
      mesh.first.push_back(0);
      mesh.extent.push_back(1);
      continue;
    }
    const double h = mesh.spacing(a);
    const double lo = (box.lo[a] - offset[a]) / h, hi = (box.hi[a] - offset[a]) / h;
    // In the box, or with support [y + C h, y + R h] meeting it.
    const auto m_lo = static_cast<std::int64_t>(std::min(std::ceil(lo), std::floor(lo - R) + 1.0));
    const auto m_hi = static_cast<std::int64_t>(std::max(std::floor(hi), std::ceil(hi - C) - 1.0));
    mesh.first.push_back(m_lo);
    mesh.extent.push_back(std::max<std::int64_t>(0, m_hi - m_lo + 1));
  }
  return mesh;
}

GridFunction project(const WaveletBasis& basis, const GridFunction& psi, int n, const ScalingVector& scaling,
                     ProjectionKind kind) {
  require(psi.dim() == scaling.dim(), ErrorKind::argument, "function and scaling differ in dimension");
  std::vector<LevelComponent> comps;
  if (kind == ProjectionKind::scaling)
    comps.push_back(scaling_component(n, scaling));
  else
    comps = detail_components(n, scaling);
  const double vol = psi.window().cell_volume();
  std::vector<CoefficientArray> coefs;
  Box hull;
  CellWindow target;
  for (const auto& c : comps) {
    coefs.push_back(analyze(basis, c, psi.window(), psi.samples(), vol));
    const CellWindow w = synthesis_window(basis, coefs.back(), psi.window().resolution);
    hull = hull.dim() == 0 ? w.box() : Box::hull(hull, w.box());
  }
  target = CellWindow::covering(hull, psi.window().resolution);
  std::vector<double> values(target.size(), 0.0);
  for (const auto& cf : coefs) {
    const auto part = synthesize(basis, cf, target);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += part[i];
  }
  return GridFunction(target, std::move(values), target.box());
}

LemmaReport verify_lemma1(const WaveletBasis& basis, const ScalingVector& scaling, const GridFunction& psi,
                          const Point& z, double lambda, int n_min, int n_max) {
  require(n_min >= 0 && n_max >= n_min + 2, ErrorKind::argument, "need at least three levels to fit a slope");
  require(lambda > 0.0 && lambda <= 1.0, ErrorKind::argument, "lambda must lie in (0,1]");
  require(std::ldexp(1.0, -n_min) <= lambda, ErrorKind::argument, "need 2^{-n} <= lambda for every level");
  const GridFunction local = localize(psi, z, lambda, scaling);
  const double vol = local.window().cell_volume();
  LemmaReport rep;
  std::vector<double> xs, ys, yd;
  for (int n = n_min; n <= n_max; ++n) {
    const auto cs = analyze(basis, scaling_component(n, scaling), local.window(), local.samples(), vol);
    double sup_s = 0.0, sup_d = 0.0;
    for (double v : cs.values) sup_s = std::max(sup_s, std::abs(v));
    for (const auto& comp : detail_components(n, scaling)) {
      const auto cd = analyze(basis, comp, local.window(), local.samples(), vol);
      for (double v : cd.values) sup_d = std::max(sup_d, std::abs(v));
    }
    rep.levels.push_back(n);
    rep.sup_scaling.push_back(sup_s);
    rep.sup_detail.push_back(sup_d);
    xs.push_back(n);
    ys.push_back(std::log2(sup_s));
    yd.push_back(std::log2(sup_d));
  }
  rep.slope_scaling = fit_theil_sen(xs, ys).slope;
  rep.slope_detail = fit_theil_sen(xs, yd).slope;
  rep.rtilde = static_cast<double>(basis.moments) * scaling.min_exponent();
  rep.theory_scaling = -0.5 * scaling.total();
  rep.theory_detail = rep.theory_scaling - rep.rtilde;
  return rep;
}

}  // namespace recon
