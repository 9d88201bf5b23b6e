#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recon/geometry.hpp"
#include "recon/grid.hpp"
#include "recon/rng.hpp"

namespace recon {

enum class CovarianceKind { white, kernel };

/// Spatial covariance K of a martingale measure, or of a Gaussian field when
/// used without a time axis. For the kernel kind K(A x B) = int_A int_B k(x,y).
struct CovarianceMeasure {
  CovarianceKind kind = CovarianceKind::white;
  std::function<double(std::span<const double>, std::span<const double>)> kernel;
  double delta = 0.0;  // K(lambda A x lambda B) ~ lambda^delta K(A x B)
  std::string name = "white";

  static CovarianceMeasure white(std::size_t space_dim);
  static CovarianceMeasure from_kernel(std::function<double(std::span<const double>, std::span<const double>)> k,
                                       double delta, std::string name);
};

/// Sampled increments on the cells of a window: xi(psi) = sum_c psi(c) w_c.
/// With a time axis (axis 0) the cells are W(dt x A) of a martingale measure.
struct NoiseField {
  CovarianceMeasure covariance;
  CellWindow window;
  bool time_axis = false;
  std::vector<double> cells;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

/// Sampler with the covariance factorization done once.
class NoiseSampler {
 public:
  NoiseSampler() = default;
  NoiseSampler(CellWindow window, CovarianceMeasure covariance, bool time_axis);

  NoiseField sample(std::uint64_t seed, std::uint64_t path) const;
  /// Redraw, from rng, every cell lying after the cut (conditional resampling).
  void resample_after(NoiseField& field, std::size_t axis, double t, Rng& rng) const;
  bool supports_resampling(std::size_t axis) const;

  const CellWindow& window() const { return window_; }
  const CovarianceMeasure& covariance() const { return covariance_; }
  bool time_axis() const { return time_axis_; }

 private:
  void draw_block(std::span<double> out, Rng& rng, double scale) const;

  CellWindow window_;
  CovarianceMeasure covariance_;
  bool time_axis_ = false;
  std::size_t block_ = 0;         // cells per independent block
  std::vector<double> factor_;    // block x block, row-major; empty for white noise
  std::vector<double> white_sd_;  // per cell of a block, white noise
};

NoiseField sample_white_noise(const CellWindow& window, std::uint64_t seed, std::uint64_t path = 0,
                              const CovarianceMeasure& covariance = CovarianceMeasure::white(0));

/// E[W_s(A) W_t(B)] = (s ^ t) K(A x B); axis 0 of the window is time.
NoiseField sample_martingale_measure(const CovarianceMeasure& covariance, const CellWindow& window,
                                     std::uint64_t seed, std::uint64_t path = 0);

/// xi(psi) by midpoint quadrature; psi must live on the noise lattice.
double eval_functional(const NoiseField& noise, const GridFunction& psi);

/// ||f||_K^2 = sum_ij f_i f_j K(A_i x A_j) for one time slice (or a spatial field).
double k_norm_squared(const CovarianceMeasure& covariance, const CellWindow& space, std::span<const double> f);

struct FiltrationCut {
  std::size_t axis = 0;
  double t = 0.0;
};

/// Zero every cell whose midpoint has coordinate > t on the cut axis. For noise
/// with independent cells along that axis this is E[. | F_t] of any functional
/// linear in the cells.
NoiseField condition_past(const NoiseField& noise, const FiltrationCut& cut);

/// One realization of a field on lattice nodes: node c sits at c / r.
struct RandomField {
  double holder_exponent = 0.0;
  std::vector<std::size_t> adapted_axes;
  std::vector<std::int64_t> resolution, first, count;
  std::vector<double> values;

  std::size_t dim() const { return resolution.size(); }
  /// Value at the node at or below x on every axis (predictable in adapted axes).
  double at(std::span<const double> x) const;
  double at_node(std::span<const std::int64_t> node) const;
};

/// Nodes covering a box (lower corner rounded down, upper corner up).
CellWindow node_window(const Box& box, std::vector<std::int64_t> resolution);

struct FieldSpec {
  double holder_exponent = 0.5;
  std::vector<std::size_t> adapted_axes;
  double radius = 1.0;  // moving-average window T
};

/// Separable moving average X(x) = int prod_i k_i(x_i - u_i) zeta(du) of an
/// auxiliary white noise zeta, one-sided (u_i < x_i) on adapted axes. Each
/// k_i(v) = |v|^{alpha - 1/2} (1 - (v/T)^2)^2 on |v| < T, or |v| (1 - (v/T)^2)^2
/// for alpha = 1; normalized to unit variance.
class HolderFieldSampler {
 public:
  HolderFieldSampler(FieldSpec spec, CellWindow nodes);
  RandomField sample(std::uint64_t seed, std::uint64_t path) const;
  const FieldSpec& spec() const { return spec_; }
  const CellWindow& nodes() const { return nodes_; }

 private:
  struct Axis;
  FieldSpec spec_;
  CellWindow nodes_;
  CellWindow aux_;
  std::vector<std::shared_ptr<const Axis>> axes_;
};

RandomField sample_holder_field(double alpha, const CellWindow& nodes, const std::vector<std::size_t>& adapted_axes,
                                std::uint64_t seed, std::uint64_t path = 0, double radius = 1.0);

RandomField deterministic_field(const Profile& g, const CellWindow& nodes, double holder_exponent = 1.0);

/// Flat float64 little-endian cells in <prefix>.bin, JSON header in <prefix>.json.
void export_noise(const NoiseField& noise, const std::string& prefix);
NoiseField import_noise(const std::string& prefix);

}  // namespace recon
