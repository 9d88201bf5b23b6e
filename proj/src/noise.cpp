#include "recon/noise.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "recon/error.hpp"
#include "recon/fft.hpp"

namespace recon {

CovarianceMeasure CovarianceMeasure::white(std::size_t space_dim) {
  CovarianceMeasure c;
  c.kind = CovarianceKind::white;
  c.delta = static_cast<double>(space_dim);
  c.name = "white";
  return c;
}

CovarianceMeasure CovarianceMeasure::from_kernel(
    std::function<double(std::span<const double>, std::span<const double>)> k, double delta, std::string name) {
  require(static_cast<bool>(k), ErrorKind::argument, "empty covariance kernel");
  CovarianceMeasure c;
  c.kind = CovarianceKind::kernel;
  c.kernel = std::move(k);
  c.delta = delta;
  c.name = std::move(name);
  return c;
}

namespace {

constexpr std::size_t max_kernel_block = 4096;

CellWindow spatial_part(const CellWindow& w, bool time_axis) {
  if (!time_axis) return w;
  CellWindow s;
  for (std::size_t a = 1; a < w.dim(); ++a) {
    s.resolution.push_back(w.resolution[a]);
    s.first.push_back(w.first[a]);
    s.extent.push_back(w.extent[a]);
  }
  return s;
}

std::vector<Point> midpoints(const CellWindow& w) {
  std::vector<Point> pts(w.size(), Point(w.dim()));
  for_each_cell(w, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    for (std::size_t a = 0; a < w.dim(); ++a) pts[flat][a] = w.midpoint(a, idx[a]);
  });
  return pts;
}

}  // namespace

NoiseSampler::NoiseSampler(CellWindow window, CovarianceMeasure covariance, bool time_axis)
    : window_(std::move(window)), covariance_(std::move(covariance)), time_axis_(time_axis) {
  require(window_.dim() >= 1, ErrorKind::construction, "noise window needs at least one axis");
  require(window_.size() > 0, ErrorKind::construction, "empty noise window");
  require(!time_axis_ || window_.dim() >= 1, ErrorKind::construction, "martingale measure needs a time axis");
  const CellWindow space = spatial_part(window_, time_axis_);
  const double dt = time_axis_ ? window_.spacing(0) : 1.0;
  block_ = time_axis_ ? space.size() : window_.size();
  if (block_ == 0) block_ = 1;  // time-only martingale measure: one cell per slice
  if (covariance_.kind == CovarianceKind::white) {
    const double vol = space.dim() ? space.cell_volume() : 1.0;
    white_sd_.assign(block_, std::sqrt(dt * vol));
    return;
  }
  require(space.dim() > 0, ErrorKind::construction, "kernel covariance needs spatial axes");
  require(block_ <= max_kernel_block, ErrorKind::construction, "kernel covariance block too large to factorize");
  const auto pts = midpoints(space);
  const double vol = space.cell_volume();
  Eigen::MatrixXd K(static_cast<Eigen::Index>(block_), static_cast<Eigen::Index>(block_));
  for (std::size_t i = 0; i < block_; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = covariance_.kernel(pts[i], pts[j]) * vol * vol * dt;
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  require(es.info() == Eigen::Success, ErrorKind::construction, "covariance factorization failed");
  const auto& ev = es.eigenvalues();
  const double top = std::max(1e-300, ev.cwiseAbs().maxCoeff());
  require(ev.minCoeff() >= -1e-10 * top, ErrorKind::construction, "covariance kernel is not positive semidefinite");
  const Eigen::MatrixXd F = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  factor_.resize(block_ * block_);
  for (std::size_t i = 0; i < block_; ++i)
    for (std::size_t j = 0; j < block_; ++j)
      factor_[i * block_ + j] = F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

void NoiseSampler::draw_block(std::span<double> out, Rng& rng, double scale) const {
  if (factor_.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * white_sd_[i] * rng.normal();
    return;
  }
  std::vector<double> z(block_);
  for (double& v : z) v = rng.normal();
  for (std::size_t i = 0; i < block_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < block_; ++j) s += factor_[i * block_ + j] * z[j];
    out[i] = scale * s;
  }
}

NoiseField NoiseSampler::sample(std::uint64_t seed, std::uint64_t path) const {
  NoiseField f;
  f.covariance = covariance_;
  f.window = window_;
  f.time_axis = time_axis_;
  f.seed = seed;
  f.path = path;
  f.cells.resize(window_.size());
  Rng rng(stream_seed(seed, path, tag_noise));
  for (std::size_t off = 0; off < f.cells.size(); off += block_)
    draw_block(std::span<double>(f.cells).subspan(off, block_), rng, 1.0);
  return f;
}

bool NoiseSampler::supports_resampling(std::size_t axis) const {
  if (covariance_.kind == CovarianceKind::white) return axis < window_.dim();
  return time_axis_ && axis == 0;
}

void NoiseSampler::resample_after(NoiseField& field, std::size_t axis, double t, Rng& rng) const {
  require(supports_resampling(axis), ErrorKind::capability,
          "conditional resampling needs independent cells along the cut axis");
  if (factor_.empty()) {
    for_each_cell(window_, [&](std::size_t flat, std::span<const std::int64_t> idx) {
      if (window_.midpoint(axis, idx[axis]) > t) field.cells[flat] = white_sd_[flat % block_] * rng.normal();
    });
    return;
  }
  for (std::int64_t s = 0; s < window_.extent[0]; ++s) {
    if (window_.midpoint(0, window_.first[0] + s) <= t) continue;
    draw_block(std::span<double>(field.cells).subspan(static_cast<std::size_t>(s) * block_, block_), rng, 1.0);
  }
}

NoiseField sample_white_noise(const CellWindow& window, std::uint64_t seed, std::uint64_t path,
                              const CovarianceMeasure& covariance) {
  return NoiseSampler(window, covariance, false).sample(seed, path);
}

NoiseField sample_martingale_measure(const CovarianceMeasure& covariance, const CellWindow& window,
                                     std::uint64_t seed, std::uint64_t path) {
  return NoiseSampler(window, covariance, true).sample(seed, path);
}

double eval_functional(const NoiseField& noise, const GridFunction& psi) {
  require(psi.dim() == noise.window.dim(), ErrorKind::argument, "test function and noise differ in dimension");
  require(psi.window().same_lattice(noise.window), ErrorKind::resolution, "test function not on the noise lattice");
  require(window_contains(noise.window, psi.window()), ErrorKind::domain, "test function leaves the noise window");
  const CellWindow common = intersect(noise.window, psi.window());
  if (common.size() == 0) return 0.0;
  const auto sn = noise.window.strides(), sp = psi.window().strides();
  const std::size_t d = common.dim();
  const std::size_t last = d - 1;
  const auto ps = psi.samples();
  double sum = 0.0;
  // Iterate over rows of the last axis.
  CellWindow rows = common;
  rows.extent[last] = 1;
  for_each_cell(rows, [&](std::size_t, std::span<const std::int64_t> idx) {
    std::size_t i = 0, j = 0;
    for (std::size_t a = 0; a < d; ++a) {
      i += static_cast<std::size_t>(idx[a] - noise.window.first[a]) * sn[a];
      j += static_cast<std::size_t>(idx[a] - psi.window().first[a]) * sp[a];
    }
    for (std::int64_t c = 0; c < common.extent[last]; ++c) sum += noise.cells[i + static_cast<std::size_t>(c)] * ps[j + static_cast<std::size_t>(c)];
  });
  return sum;
}

double k_norm_squared(const CovarianceMeasure& covariance, const CellWindow& space, std::span<const double> f) {
  require(f.size() == space.size(), ErrorKind::argument, "values do not match the spatial window");
  const double vol = space.cell_volume();
  if (covariance.kind == CovarianceKind::white) {
    double s = 0.0;
    for (double v : f) s += v * v;
    return s * vol;
  }
  const auto pts = midpoints(space);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0) continue;
    for (std::size_t j = 0; j < f.size(); ++j)
      if (f[j] != 0.0) s += f[i] * f[j] * covariance.kernel(pts[i], pts[j]);
  }
  return s * vol * vol;
}

NoiseField condition_past(const NoiseField& noise, const FiltrationCut& cut) {
  require(cut.axis < noise.window.dim(), ErrorKind::argument, "cut axis out of range");
  NoiseField out = noise;
  for_each_cell(out.window, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    if (out.window.midpoint(cut.axis, idx[cut.axis]) > cut.t) out.cells[flat] = 0.0;
  });
  return out;
}

// ---------------------------------------------------------------------------

CellWindow node_window(const Box& box, std::vector<std::int64_t> resolution) {
  require(box.dim() == resolution.size(), ErrorKind::argument, "box and resolution differ in dimension");
  CellWindow w;
  w.resolution = std::move(resolution);
  for (std::size_t a = 0; a < box.dim(); ++a) {
    const double r = static_cast<double>(w.resolution[a]);
    const auto lo = static_cast<std::int64_t>(std::floor(box.lo[a] * r + 1e-9));
    const auto hi = static_cast<std::int64_t>(std::ceil(box.hi[a] * r - 1e-9));
    w.first.push_back(lo);
    w.extent.push_back(hi - lo + 1);
  }
  return w;
}

double RandomField::at_node(std::span<const std::int64_t> node) const {
  require(node.size() == dim(), ErrorKind::argument, "node dimension mismatch");
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dim(); ++a) {
    const auto c = node[a] - first[a];
    require(c >= 0 && c < count[a], ErrorKind::domain, "field evaluated outside its node window");
    flat = flat * static_cast<std::size_t>(count[a]) + static_cast<std::size_t>(c);
  }
  return values[flat];
}

double RandomField::at(std::span<const double> x) const {
  require(x.size() == dim(), ErrorKind::argument, "point dimension mismatch");
  std::vector<std::int64_t> node(dim());
  for (std::size_t a = 0; a < dim(); ++a)
    node[a] = static_cast<std::int64_t>(std::floor(x[a] * static_cast<double>(resolution[a]) + 1e-7));
  return at_node(node);
}

struct HolderFieldSampler::Axis {
  bool adapted = false;
  std::int64_t reach = 0;  // cells within the radius
  std::int64_t aux_extent = 0, node_count = 0;
  std::int64_t output_offset = 0;  // q = c' + output_offset
  std::unique_ptr<Convolver> conv;
};

HolderFieldSampler::HolderFieldSampler(FieldSpec spec, CellWindow nodes) : spec_(std::move(spec)), nodes_(std::move(nodes)) {
  const double alpha = spec_.holder_exponent;
  require(alpha > 0.0 && alpha <= 1.0, ErrorKind::argument, "holder exponent must lie in (0,1]");
  require(spec_.radius > 0.0, ErrorKind::argument, "moving-average radius must be positive");
  for (auto a : spec_.adapted_axes) require(a < nodes_.dim(), ErrorKind::argument, "adapted axis out of range");
  const double kappa = alpha < 1.0 ? alpha - 0.5 : 1.0;
  aux_.resolution = nodes_.resolution;
  for (std::size_t a = 0; a < nodes_.dim(); ++a) {
    auto ax = std::make_shared<Axis>();
    ax->adapted = std::find(spec_.adapted_axes.begin(), spec_.adapted_axes.end(), a) != spec_.adapted_axes.end();
    const double r = static_cast<double>(nodes_.resolution[a]);
    ax->reach = static_cast<std::int64_t>(std::ceil(spec_.radius * r));
    ax->node_count = nodes_.extent[a];
    auto weight = [&](std::int64_t lag) {
      const double v = std::abs(static_cast<double>(lag) - 0.5) / r;
      if (v >= spec_.radius) return 0.0;
      const double t = v / spec_.radius;
      return std::pow(v, kappa) * (1.0 - t * t) * (1.0 - t * t);
    };
    std::vector<double> kernel;
    std::int64_t lag0 = 0;
    if (ax->adapted) {
      lag0 = 1;
      for (std::int64_t j = 1; j <= ax->reach; ++j) kernel.push_back(weight(j));
      ax->aux_extent = ax->node_count - 1 + ax->reach;
      aux_.first.push_back(nodes_.first[a] - ax->reach);
    } else {
      lag0 = -ax->reach + 1;
      for (std::int64_t j = -ax->reach + 1; j <= ax->reach; ++j) kernel.push_back(weight(j));
      ax->aux_extent = ax->node_count + 2 * ax->reach - 1;
      aux_.first.push_back(nodes_.first[a] - ax->reach);
    }
    aux_.extent.push_back(ax->aux_extent);
    double norm = 0.0;
    for (double w : kernel) norm += w * w / r;
    require(norm > 0.0, ErrorKind::argument, "moving-average radius below one cell");
    for (double& w : kernel) w /= std::sqrt(norm);
    ax->output_offset = nodes_.first[a] - aux_.first[a] - lag0;
    ax->conv = std::make_unique<Convolver>(std::move(kernel), static_cast<std::size_t>(ax->aux_extent));
    axes_.push_back(std::move(ax));
  }
}

RandomField HolderFieldSampler::sample(std::uint64_t seed, std::uint64_t path) const {
  const std::size_t d = nodes_.dim();
  Rng rng(stream_seed(seed, path, tag_field));
  const double sd = std::sqrt(aux_.cell_volume());
  std::vector<double> cur(aux_.size());
  for (double& v : cur) v = sd * rng.normal();
  std::vector<std::int64_t> shape(aux_.extent);
  for (std::size_t a = 0; a < d; ++a) {
    const Axis& ax = *axes_[a];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < a; ++i) outer *= static_cast<std::size_t>(shape[i]);
    for (std::size_t i = a + 1; i < d; ++i) inner *= static_cast<std::size_t>(shape[i]);
    const auto n_in = static_cast<std::size_t>(shape[a]);
    const auto n_out = static_cast<std::size_t>(ax.node_count);
    std::vector<double> next(outer * n_out * inner);
    std::vector<double> line(n_in);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        for (std::size_t c = 0; c < n_in; ++c) line[c] = cur[(o * n_in + c) * inner + i];
        const auto full = ax.conv->apply(line);
        for (std::size_t c = 0; c < n_out; ++c)
          next[(o * n_out + c) * inner + i] = full[c + static_cast<std::size_t>(ax.output_offset)];
      }
    shape[a] = static_cast<std::int64_t>(n_out);
    cur.swap(next);
  }
  RandomField f;
  f.holder_exponent = spec_.holder_exponent;
  f.adapted_axes = spec_.adapted_axes;
  f.resolution = nodes_.resolution;
  f.first = nodes_.first;
  f.count = nodes_.extent;
  f.values = std::move(cur);
  return f;
}

RandomField sample_holder_field(double alpha, const CellWindow& nodes, const std::vector<std::size_t>& adapted_axes,
                                std::uint64_t seed, std::uint64_t path, double radius) {
  return HolderFieldSampler(FieldSpec{alpha, adapted_axes, radius}, nodes).sample(seed, path);
}

RandomField deterministic_field(const Profile& g, const CellWindow& nodes, double holder_exponent) {
  RandomField f;
  f.holder_exponent = holder_exponent;
  f.resolution = nodes.resolution;
  f.first = nodes.first;
  f.count = nodes.extent;
  f.values.resize(nodes.size());
  Point x(nodes.dim());
  for_each_cell(nodes, [&](std::size_t flat, std::span<const std::int64_t> idx) {
    for (std::size_t a = 0; a < nodes.dim(); ++a) x[a] = static_cast<double>(idx[a]) / static_cast<double>(nodes.resolution[a]);
    f.values[flat] = g(x);
  });
  return f;
}

// ---------------------------------------------------------------------------

void export_noise(const NoiseField& noise, const std::string& prefix) {
  static_assert(std::endian::native == std::endian::little, "snapshot format is little-endian");
  require(noise.covariance.kind == CovarianceKind::white, ErrorKind::argument,
          "only white-noise snapshots can be exported (kernels are not serializable)");
  nlohmann::json h;
  h["format"] = "recon-noise";
  h["version"] = 1;
  h["kind"] = noise.covariance.name;
  h["delta"] = noise.covariance.delta;
  h["time_axis"] = noise.time_axis;
  h["resolution"] = noise.window.resolution;
  h["first"] = noise.window.first;
  h["extent"] = noise.window.extent;
  h["seed"] = noise.seed;
  h["path"] = noise.path;
  h["count"] = noise.cells.size();
  h["dtype"] = "float64-le";
  std::ofstream js(prefix + ".json");
  require(static_cast<bool>(js), ErrorKind::argument, "cannot write " + prefix + ".json");
  js << h.dump(2) << '\n';
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  require(static_cast<bool>(bin), ErrorKind::argument, "cannot write " + prefix + ".bin");
  bin.write(reinterpret_cast<const char*>(noise.cells.data()), static_cast<std::streamsize>(noise.cells.size() * sizeof(double)));
}

NoiseField import_noise(const std::string& prefix) {
  std::ifstream js(prefix + ".json");
  require(static_cast<bool>(js), ErrorKind::argument, "cannot read " + prefix + ".json");
  nlohmann::json h;
  try {
    js >> h;
  } catch (const std::exception& e) {
    fail(ErrorKind::argument, std::string("snapshot header: ") + e.what());
  }
  require(h.value("format", "") == "recon-noise" && h.value("version", 0) == 1, ErrorKind::argument,
          "snapshot header: unknown format");
  require(h.value("dtype", "") == "float64-le", ErrorKind::argument, "snapshot header: unsupported dtype");
  NoiseField f;
  f.covariance = CovarianceMeasure::white(0);
  f.covariance.delta = h.at("delta").get<double>();
  f.time_axis = h.at("time_axis").get<bool>();
  f.window.resolution = h.at("resolution").get<std::vector<std::int64_t>>();
  f.window.first = h.at("first").get<std::vector<std::int64_t>>();
  f.window.extent = h.at("extent").get<std::vector<std::int64_t>>();
  f.seed = h.at("seed").get<std::uint64_t>();
  f.path = h.at("path").get<std::uint64_t>();
  const auto count = h.at("count").get<std::size_t>();
  require(count == f.window.size(), ErrorKind::argument, "snapshot header: count does not match window");
  f.cells.resize(count);
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  require(static_cast<bool>(bin), ErrorKind::argument, "cannot read " + prefix + ".bin");
  bin.read(reinterpret_cast<char*>(f.cells.data()), static_cast<std::streamsize>(count * sizeof(double)));
  require(bin.gcount() == static_cast<std::streamsize>(count * sizeof(double)), ErrorKind::argument,
          "snapshot payload truncated");
  return f;
}

}  // namespace recon
