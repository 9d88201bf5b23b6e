#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recon/fit.hpp"
#include "recon/geometry.hpp"
#include "recon/grid.hpp"
#include "recon/noise.hpp"
#include "recon/stats.hpp"
#include "recon/wavelet.hpp"

namespace recon {

/// Everything random that a germ may read on one Monte Carlo path.
struct PathSample {
  std::uint64_t index = 0;
  NoiseField noise;
  std::optional<RandomField> field;

  bool has_noise() const { return !noise.cells.empty(); }
};

/// Draws paths from fixed samplers; path i only depends on (seed, i).
class PathSampler {
 public:
  PathSampler(NoiseSampler noise, std::optional<HolderFieldSampler> field, std::uint64_t seed);

  PathSample sample(std::uint64_t path) const;
  /// Copy of `path` whose noise cells after the cut are redrawn (draw-th
  /// independent redraw). The auxiliary field is kept as it is.
  PathSample resample_future(const PathSample& path, const FiltrationCut& cut, std::uint64_t draw) const;
  bool can_resample(std::size_t axis) const { return noise_.supports_resampling(axis); }

  const NoiseSampler& noise() const { return noise_; }
  const std::optional<HolderFieldSampler>& field() const { return field_; }
  std::uint64_t seed() const { return seed_; }

 private:
  NoiseSampler noise_;
  std::optional<HolderFieldSampler> field_;
  std::uint64_t seed_ = 0;
};

/// How E^{F_t} of an evaluation can be computed.
enum class Conditioning {
  none,          // germ is not adapted along the axis
  exact_linear,  // evaluate on the past-restricted noise
  monte_carlo,   // average over redrawn futures (an estimator)
};

std::string to_string(Conditioning c);

/// E^{F_cut} of a functional of the path. For exact_linear the functional is
/// evaluated once on the past-restricted noise; for monte_carlo it is averaged
/// over `inner` redraws of the future cells.
double conditional_value(const std::function<double(const PathSample&)>& functional, Conditioning mode,
                         const PathSample& path, const FiltrationCut& cut, const PathSampler* sampler,
                         std::size_t inner = 64);

/// A distribution h given by weights on lattice cells, h(psi) = sum_c psi_c w_c:
/// either the noise of the path or a fixed density sampled at midpoints.
class Driver {
 public:
  static Driver noise();
  static Driver density(const Profile& h, const CellWindow& window);

  bool random() const { return !fixed_; }
  const CellWindow& window(const PathSample& path) const;
  std::span<const double> weights(const PathSample& path) const;
  double apply(const GridFunction& psi, const PathSample& path) const;

 private:
  std::shared_ptr<const NoiseField> fixed_;
};

/// A random germ x -> F_x, each F_x a linear functional on grid test functions.
class Germ {
 public:
  virtual ~Germ() = default;

  virtual std::string name() const = 0;
  /// F_x(psi) on one path.
  virtual double evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const = 0;
  /// F_{y_m}(g_m) for every translate m of `translates` (its values are
  /// ignored), where g_m is the basis function with that index sampled on
  /// `resolution`. The default builds every basis function.
  virtual std::vector<double> evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                                  const std::vector<std::int64_t>& resolution,
                                                  const PathSample& path) const;
  virtual Conditioning conditioning(std::size_t axis) const = 0;
  virtual bool random() const = 0;

  /// e: the first e axes carry filtrations the germ is adapted to.
  std::size_t stochastic_dimension() const { return stochastic_dim_; }

 protected:
  std::size_t stochastic_dim_ = 0;
};

/// F_x(psi) = h(T_x g psi) with T_x g the Taylor polynomial of order k <= 2
/// of g at x (derivatives by central differences of step `step`).
class YoungGerm final : public Germ {
 public:
  YoungGerm(Profile g, Driver h, int taylor_order, std::size_t stochastic_dim = 0, double step = 1e-4);

  std::string name() const override { return "young"; }
  double evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const override;
  std::vector<double> evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                          const std::vector<std::int64_t>& resolution,
                                          const PathSample& path) const override;
  Conditioning conditioning(std::size_t axis) const override;
  bool random() const override { return h_.random(); }

  /// Monomial coefficients of T_x g: [c0, c_i..., c_ij (i <= j)...].
  std::vector<double> taylor_coefficients(const Point& x) const;

 private:
  Profile g_;
  Driver h_;
  int order_ = 0;
  double step_ = 1e-4;
};

/// F_x(psi) = X(x) xi(psi). X is either fixed or the field of the path.
class NoiseProductGerm final : public Germ {
 public:
  /// X taken from each path; `adapted_axes` are those X is adapted along.
  NoiseProductGerm(std::size_t stochastic_dim, std::vector<std::size_t> adapted_axes);
  /// Fixed (deterministic) X.
  NoiseProductGerm(RandomField X, std::size_t stochastic_dim);

  std::string name() const override { return "noise-product"; }
  double evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const override;
  std::vector<double> evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                          const std::vector<std::int64_t>& resolution,
                                          const PathSample& path) const override;
  Conditioning conditioning(std::size_t axis) const override;
  bool random() const override { return true; }

  const RandomField& field(const PathSample& path) const;

 private:
  std::shared_ptr<const RandomField> fixed_;
  std::vector<std::size_t> adapted_;
};

/// Two-parameter process (s,t) -> A(s,t) on one path.
using TwoParameter = std::function<double(double, double)>;
using TwoParameterFactory = std::function<TwoParameter(const PathSample&)>;

/// F_s(psi) = -sum_c A(s, t_c) psi'(t_c) dt, t_c the cell midpoints and psi'
/// by centered differences (psi extended by zero). One dimension only.
class SewingGerm final : public Germ {
 public:
  explicit SewingGerm(TwoParameterFactory A, Conditioning conditioning = Conditioning::monte_carlo);

  std::string name() const override { return "sewing"; }
  double evaluate(const Point& x, const GridFunction& psi, const PathSample& path) const override;
  std::vector<double> evaluate_translates(const WaveletBasis& basis, const CoefficientArray& translates,
                                          const std::vector<std::int64_t>& resolution,
                                          const PathSample& path) const override;
  Conditioning conditioning(std::size_t axis) const override { return axis == 0 ? mode_ : Conditioning::none; }
  bool random() const override { return true; }

  /// The germ with A already built (for repeated evaluation on one path).
  static double apply(const TwoParameter& A, double s, const GridFunction& psi);

 private:
  TwoParameterFactory factory_;
  Conditioning mode_;
};

/// Brownian motion from one-dimensional white noise on a window starting at 0:
/// node values B(c/r), linear in between.
struct BrownianPath {
  std::int64_t resolution = 1;
  std::vector<double> nodes;

  double operator()(double t) const;
  double end() const { return static_cast<double>(nodes.size() - 1) / static_cast<double>(resolution); }
};

BrownianPath brownian_path(const NoiseField& noise);

/// A(s,t) = B_s (B_t - B_s), the germ of the Ito integral of B against itself.
TwoParameterFactory ito_germ();

// ---------------------------------------------------------------------------
// Coherence.

enum class CoherenceMode { plain, conditional, covariance };
std::string to_string(CoherenceMode m);
CoherenceMode parse_coherence_mode(const std::string& name);

struct CoherenceDesign {
  Point x;                                 // base point
  std::size_t direction = 0;               // y = x + dist^{s_i} e_i
  std::vector<double> scales;              // epsilon ladder
  std::vector<double> distances;           // |x - y| ladder
  ScalingVector scaling;
  double p = 2.0;
  std::size_t paths = 2000;
  std::size_t inner_paths = 64;  // monte_carlo conditioning
  int workers = 1;
  double support_radius = 1.0;  // Rtilde, for the covariance pairs

  static CoherenceDesign standard(Point x, ScalingVector scaling);
};

struct CoherencePoint {
  double scale = 0.0, distance = 0.0;
  double value = 0.0, se = 0.0;  // L_p norm, or mixed moment in covariance mode
};

struct CoherenceReport {
  CoherenceMode mode = CoherenceMode::plain;
  double alpha_hat = 0.0, gamma_hat = 0.0, gap_exponent = 0.0;
  double se_alpha = 0.0, se_gamma = 0.0, r_squared = 0.0;
  int stochastic_total = 0;  // E
  std::size_t paths = 0;
  double p = 2.0;
  std::uint64_t seed = 0;
  std::vector<CoherencePoint> points;
  bool degenerate = false;             // every difference below 1e-12: coherent at every gamma
  bool vanishing_conditional = false;  // conditional parts vanish: gamma not identifiable
  bool moments_within_3se = false;     // covariance mode

  std::string to_json() const;
};

/// Fits log value = a log eps + b log(|x-y| + eps) + c over the full design.
/// alpha_hat = a; gamma_hat = a + b (+ E/2 in plain mode, whose gap exponent
/// is gamma - E/2 - alpha). In covariance mode the fit is to the magnitude
/// |mean| + 3 SE of the mixed moment and a, b are halved.
CoherenceReport estimate_coherence(const Germ& germ, const GridFunction& psi, const CoherenceDesign& design,
                                   CoherenceMode mode, const PathSampler* sampler);

struct EffectiveSupport {
  Box box;
  std::size_t stochastic_dim = 0;

  bool disjoint(const EffectiveSupport& other) const;
};

/// Smallest box containing x, y and the support of psi.
EffectiveSupport difference_support(const Point& x, const Point& y, const Box& psi_support, std::size_t e);
/// [x_i, x_i + 2 lambda^{s_i} Rtilde] on stochastic axes, symmetric elsewhere.
EffectiveSupport residual_support(const Point& x, double lambda, double Rtilde, const ScalingVector& scaling,
                                  std::size_t e);

}  // namespace recon
