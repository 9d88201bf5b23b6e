#include "recon/germ.hpp"

#include <cmath>

#include "recon/error.hpp"

namespace recon {

PathSampler::PathSampler(NoiseSampler noise, std::optional<HolderFieldSampler> field, std::uint64_t seed)
    : noise_(std::move(noise)), field_(std::move(field)), seed_(seed) {}

PathSample PathSampler::sample(std::uint64_t path) const {
  PathSample s;
  s.index = path;
  s.noise = noise_.sample(seed_, path);
  if (field_) s.field = field_->sample(seed_, path);
  return s;
}

PathSample PathSampler::resample_future(const PathSample& path, const FiltrationCut& cut, std::uint64_t draw) const {
  PathSample s = path;
  Rng rng(stream_seed(stream_seed(seed_, path.index, tag_resample), draw, tag_resample));
  noise_.resample_after(s.noise, cut.axis, cut.t, rng);
  return s;
}

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::none: return "none";
    case Conditioning::exact_linear: return "exact-linear";
    case Conditioning::monte_carlo: return "monte-carlo";
  }
  return "?";
}

double conditional_value(const std::function<double(const PathSample&)>& functional, Conditioning mode,
                         const PathSample& path, const FiltrationCut& cut, const PathSampler* sampler,
                         std::size_t inner) {
  switch (mode) {
    case Conditioning::exact_linear: {
      if (!path.has_noise()) return functional(path);
      PathSample past = path;
      past.noise = condition_past(path.noise, cut);
      return functional(past);
    }
    case Conditioning::monte_carlo: {
      require(sampler != nullptr && sampler->can_resample(cut.axis), ErrorKind::capability,
              "conditional Monte Carlo needs a sampler able to redraw the future");
      require(inner >= 1, ErrorKind::argument, "conditional Monte Carlo needs at least one redraw");
      double sum = 0.0;
      for (std::size_t k = 0; k < inner; ++k) sum += functional(sampler->resample_future(path, cut, k));
      return sum / static_cast<double>(inner);
    }
    case Conditioning::none:
      break;
  }
  fail(ErrorKind::capability, "germ is not adapted along the requested axis");
}

// ---------------------------------------------------------------------------

Driver Driver::noise() { return Driver{}; }

Driver Driver::density(const Profile& h, const CellWindow& window) {
  auto f = std::make_shared<NoiseField>();
  f->window = window;
  f->covariance.name = "density";
  f->cells.resize(window.size());
  const double vol = window.cell_volume();
  Point y(window.dim());
  for_each_cell(window, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    for (std::size_t a = 0; a < window.dim(); ++a) y[a] = window.midpoint(a, idx[a]);
    f->cells[flat] = h(y) * vol;
  });
  Driver d;
  d.fixed_ = std::move(f);
  return d;
}

const CellWindow& Driver::window(const PathSample& path) const {
  if (fixed_) return fixed_->window;
  require(path.has_noise(), ErrorKind::argument, "path carries no noise");
  return path.noise.window;
}

std::span<const double> Driver::weights(const PathSample& path) const {
  if (fixed_) return fixed_->cells;
  require(path.has_noise(), ErrorKind::argument, "path carries no noise");
  return path.noise.cells;
}

double Driver::apply(const GridFunction& psi, const PathSample& path) const {
  if (fixed_) return eval_functional(*fixed_, psi);
  require(path.has_noise(), ErrorKind::argument, "path carries no noise");
  return eval_functional(path.noise, psi);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::int64_t> translate_index(const CoefficientArray& t, std::size_t flat) {
  std::vector<std::int64_t> m(t.extent.size());
  for (std::size_t a = t.extent.size(); a-- > 0;) {
    m[a] = t.first[a] + static_cast<std::int64_t>(flat % static_cast<std::size_t>(t.extent[a]));
    flat /= static_cast<std::size_t>(t.extent[a]);
  }
  return m;
}

// Sub-block of the cell weights covering the supports of all translates.
struct Cover {
  CellWindow window;
  std::vector<double> weights;
};

Cover cover_translates(const WaveletBasis& basis, const CoefficientArray& translates, const CellWindow& window,
                       std::span<const double> weights) {
  Cover c;
  c.window = synthesis_window(basis, translates, window.resolution);
  require(window_contains(window, c.window), ErrorKind::domain,
          "basis functions of level " + translates.component.label() + " leave the noise window");
  c.weights.resize(c.window.size());
  const auto so = window.strides();
  for_each_cell(c.window, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    std::size_t j = 0;
    for (std::size_t a = 0; a < window.dim(); ++a) j += static_cast<std::size_t>(idx[a] - window.first[a]) * so[a];
    c.weights[flat] = weights[j];
  });
  return c;
}

// Picks the entries of `full` (a superset range) at the translates' indices.
std::vector<double> gather(const CoefficientArray& full, const CoefficientArray& translates) {
  std::vector<double> out(translates.size());
  const auto sf = full.strides();
  for (std::size_t f = 0; f < translates.size(); ++f) {
    const auto m = translate_index(translates, f);
    std::size_t j = 0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      const auto off = m[a] - full.first[a];
      require(off >= 0 && off < full.extent[a], ErrorKind::numeric, "translate outside the analysed range");
      j += static_cast<std::size_t>(off) * sf[a];
    }
    out[f] = full.values[j];
  }
  return out;
}

// h(g_m) for every translate, with h given by cell weights.
std::vector<double> tested_weights(const WaveletBasis& basis, const CoefficientArray& translates, const Cover& cover,
                                   std::span<const double> weights) {
  const CoefficientArray full = analyze(basis, translates.component, cover.window, weights, 1.0);
  return gather(full, translates);
}

}  // namespace

std::vector<double> Germ::evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                              const std::vector<std::int64_t>& resolution,
                                              const PathSample& path) const {
  std::vector<double> out(translates.size());
  for (std::size_t f = 0; f < translates.size(); ++f) {
    const auto m = translate_index(translates, f);
    const GridFunction g = basis_function(basis, translates.component, m, resolution);
    out[f] = evaluate(translates.point(f), g, path);
  }
  return out;
}

// ---------------------------------------------------------------------------

YoungGerm::YoungGerm(Profile g, Driver h, int taylor_order, std::size_t stochastic_dim, double step)
    : g_(std::move(g)), h_(std::move(h)), order_(taylor_order), step_(step) {
  require(static_cast<bool>(g_), ErrorKind::argument, "empty prefactor");
  require(order_ >= 0 && order_ <= 2, ErrorKind::argument, "Taylor order must be 0, 1 or 2");
  require(step_ > 0.0, ErrorKind::argument, "difference step must be positive");
  stochastic_dim_ = stochastic_dim;
}

std::vector<double> YoungGerm::taylor_coefficients(const Point& x) const {
  const std::size_t d = x.size();
  const double g0 = g_(x);
  if (order_ == 0) return {g0};
  Point z = x;
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    z = x;
    z[i] += di;
    z[j] += dj;
    return g_(z);
  };
  std::vector<double> grad(d);
  const double h = step_;
  for (std::size_t i = 0; i < d; ++i) grad[i] = (at(i, h, i, 0.0) - at(i, -h, i, 0.0)) / (2 * h);
  std::vector<double> H(d * d, 0.0);
  if (order_ == 2) {
    const double k = 10 * step_;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        double v;
        if (i == j)
          v = (at(i, k, i, 0.0) - 2 * g0 + at(i, -k, i, 0.0)) / (k * k);
        else
          v = (at(i, k, j, k) - at(i, k, j, -k) - at(i, -k, j, k) + at(i, -k, j, -k)) / (4 * k * k);
        H[i * d + j] = H[j * d + i] = v;
      }
  }
  // T_x g(y) = g0 + grad.(y-x) + (y-x)^T H (y-x) / 2, expanded in monomials of y.
  std::vector<double> c;
  double c0 = g0;
  for (std::size_t i = 0; i < d; ++i) c0 -= grad[i] * x[i];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) c0 += 0.5 * H[i * d + j] * x[i] * x[j];
  c.push_back(c0);
  for (std::size_t i = 0; i < d; ++i) {
    double ci = grad[i];
    for (std::size_t j = 0; j < d; ++j) ci -= H[i * d + j] * x[j];
    c.push_back(ci);
  }
  if (order_ == 2)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) c.push_back(i == j ? 0.5 * H[i * d + i] : H[i * d + j]);
  return c;
}

namespace {

// Monomials 1, y_i, y_i y_j (i <= j) up to the given order.
std::vector<double> monomials(std::span<const double> y, int order) {
  std::vector<double> m{1.0};
  if (order >= 1)
    for (double v : y) m.push_back(v);
  if (order >= 2)
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = i; j < y.size(); ++j) m.push_back(y[i] * y[j]);
  return m;
}

}  // namespace

double YoungGerm::evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const {
  require(x.size() == psi.dim(), ErrorKind::argument, "base point and test function differ in dimension");
  if (order_ == 0) return g_(x) * h_.apply(psi, path);
  const auto c = taylor_coefficients(x);
  const CellWindow& hw = h_.window(path);
  require(psi.window().same_lattice(hw), ErrorKind::resolution, "test function not on the driver lattice");
  require(window_contains(hw, psi.window()), ErrorKind::domain, "test function leaves the driver window");
  const auto w = h_.weights(path);
  const auto sh = hw.strides();
  const auto ps = psi.samples();
  Point y(psi.dim());
  double sum = 0.0;
  for_each_cell(psi.window(), [&](std::size_t flat, std::span<const std::int64_t> idx) {
    if (ps[flat] == 0.0) return;
    std::size_t j = 0;
    for (std::size_t a = 0; a < y.size(); ++a) {
      y[a] = hw.midpoint(a, idx[a]);
      j += static_cast<std::size_t>(idx[a] - hw.first[a]) * sh[a];
    }
    const auto m = monomials(y, order_);
    double t = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) t += c[k] * m[k];
    sum += ps[flat] * t * w[j];
  });
  return sum;
}

std::vector<double> YoungGerm::evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                                   const std::vector<std::int64_t>& resolution,
                                                   const PathSample& path) const {
  if (translates.size() == 0) return {};
  const CellWindow& hw = h_.window(path);
  require(hw.resolution == resolution, ErrorKind::resolution, "driver lattice differs from the requested one");
  const Cover cover = cover_translates(basis, translates, hw, h_.weights(path));
  // One analysis per monomial of the Taylor polynomial.
  std::vector<std::vector<double>> tested;
  const std::size_t d = hw.dim();
  const std::size_t count = monomials(Point(d, 0.0), order_).size();
  std::vector<double> scaled(cover.weights.size());
  Point y(d);
  for (std::size_t k = 0; k < count; ++k) {
    if (k == 0) {
      tested.push_back(tested_weights(basis, translates, cover, cover.weights));
      continue;
    }
    for_each_cell(cover.window, [&](std::size_t flat, std::span<const std::int64_t> idx) {
      for (std::size_t a = 0; a < d; ++a) y[a] = cover.window.midpoint(a, idx[a]);
      scaled[flat] = cover.weights[flat] * monomials(y, order_)[k];
    });
    tested.push_back(tested_weights(basis, translates, cover, scaled));
  }
  std::vector<double> out(translates.size());
  for (std::size_t f = 0; f < out.size(); ++f) {
    const Point x = translates.point(f);
    if (order_ == 0) {
      out[f] = g_(x) * tested[0][f];
      continue;
    }
    const auto c = taylor_coefficients(x);
    double v = 0.0;
    for (std::size_t k = 0; k < count; ++k) v += c[k] * tested[k][f];
    out[f] = v;
  }
  return out;
}

Conditioning YoungGerm::conditioning(std::size_t) const {
  // The prefactor is deterministic, so the germ is linear in the driver with
  // an adapted coefficient.
  return Conditioning::exact_linear;
}

// ---------------------------------------------------------------------------

NoiseProductGerm::NoiseProductGerm(std::size_t stochastic_dim, std::vector<std::size_t> adapted_axes)
    : adapted_(std::move(adapted_axes)) {
  stochastic_dim_ = stochastic_dim;
}

NoiseProductGerm::NoiseProductGerm(RandomField X, std::size_t stochastic_dim)
    : fixed_(std::make_shared<const RandomField>(std::move(X))) {
  stochastic_dim_ = stochastic_dim;
  for (std::size_t a = 0; a < fixed_->dim(); ++a) adapted_.push_back(a);  // deterministic: adapted everywhere
}

const RandomField& NoiseProductGerm::field(const PathSample& path) const {
  if (fixed_) return *fixed_;
  require(path.field.has_value(), ErrorKind::argument, "path carries no random field");
  return *path.field;
}

double NoiseProductGerm::evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const {
  const RandomField& X = field(path);
  require(X.dim() == path.noise.window.dim(), ErrorKind::argument, "field and noise differ in dimension");
  return X.at(x) * eval_functional(path.noise, psi);
}

std::vector<double> NoiseProductGerm::evaluate_translates(const WaveletBasis& basis,
                                                          const CoefficientArray& translates,
                                                          const std::vector<std::int64_t>& resolution,
                                                          const PathSample& path) const {
  if (translates.size() == 0) return {};
  const RandomField& X = field(path);
  require(X.dim() == path.noise.window.dim(), ErrorKind::argument, "field and noise differ in dimension");
  require(path.noise.window.resolution == resolution, ErrorKind::resolution,
          "noise lattice differs from the requested one");
  const Cover cover = cover_translates(basis, translates, path.noise.window, path.noise.cells);
  auto out = tested_weights(basis, translates, cover, cover.weights);
  for (std::size_t f = 0; f < out.size(); ++f) out[f] *= X.at(translates.point(f));
  return out;
}

Conditioning NoiseProductGerm::conditioning(std::size_t axis) const {
  return std::find(adapted_.begin(), adapted_.end(), axis) != adapted_.end() ? Conditioning::exact_linear
                                                                             : Conditioning::none;
}

// ---------------------------------------------------------------------------

SewingGerm::SewingGerm(TwoParameterFactory A, Conditioning conditioning) : factory_(std::move(A)), mode_(conditioning) {
  require(static_cast<bool>(factory_), ErrorKind::argument, "empty two-parameter process");
  stochastic_dim_ = 1;
}

double SewingGerm::apply(const TwoParameter& A, double s, const GridFunction& psi) {
  require(psi.dim() == 1, ErrorKind::argument, "sewing germs are one-dimensional");
  const CellWindow& w = psi.window();
  const std::int64_t n = w.extent[0];
  require(n >= 3, ErrorKind::argument, "test function has no grid derivative (fewer than 3 cells)");
  const auto ps = psi.samples();
  auto at = [&](std::int64_t i) { return i < 0 || i >= n ? 0.0 : ps[static_cast<std::size_t>(i)]; };
  double sum = 0.0;
  for (std::int64_t i = -1; i <= n; ++i) {
    const double dpsi = 0.5 * (at(i + 1) - at(i - 1));  // psi' dt
    if (dpsi == 0.0) continue;
    sum += A(s, w.midpoint(0, w.first[0] + i)) * dpsi;
  }
  return -sum;
}

double SewingGerm::evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const {
  require(x.size() == 1, ErrorKind::argument, "sewing germs are one-dimensional");
  return apply(factory_(path), x[0], psi);
}

std::vector<double> SewingGerm::evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                                    const std::vector<std::int64_t>& resolution,
                                                    const PathSample& path) const {
  const TwoParameter A = factory_(path);
  std::vector<double> out(translates.size());
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto m = translate_index(translates, f);
    out[f] = apply(A, translates.point(f)[0], basis_function(basis, translates.component, m, resolution));
  }
  return out;
}

double BrownianPath::operator()(double t) const {
  const double u = t * static_cast<double>(resolution);
  const double last = static_cast<double>(nodes.size() - 1);
  require(u >= -1e-9 && u <= last + 1e-9, ErrorKind::domain, "Brownian path evaluated outside its window");
  const double c = std::clamp(std::floor(u), 0.0, std::max(0.0, last - 1));
  const auto i = static_cast<std::size_t>(c);
  if (nodes.size() == 1) return nodes[0];
  const double frac = std::clamp(u - c, 0.0, 1.0);
  return nodes[i] + frac * (nodes[i + 1] - nodes[i]);
}

BrownianPath brownian_path(const NoiseField& noise) {
  require(noise.window.dim() == 1, ErrorKind::argument, "Brownian path needs one-dimensional noise");
  require(noise.window.first[0] == 0, ErrorKind::argument, "Brownian path needs noise starting at 0");
  BrownianPath b;
  b.resolution = noise.window.resolution[0];
  b.nodes.resize(noise.cells.size() + 1);
  b.nodes[0] = 0.0;
  for (std::size_t i = 0; i < noise.cells.size(); ++i) b.nodes[i + 1] = b.nodes[i] + noise.cells[i];
  return b;
}

TwoParameterFactory ito_germ() {
  return [](const PathSample& path) -> TwoParameter {
    auto B = std::make_shared<const BrownianPath>(brownian_path(path.noise));
    return [B](double s, double t) {
      const double bs = (*B)(s);
      return bs * ((*B)(t)-bs);
    };
  };
}

}  // namespace recon
