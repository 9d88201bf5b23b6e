#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "recon/geometry.hpp"

namespace recon {

/// A rectangular block of cells of a uniform lattice. Along axis i the cell
/// with index c covers [c/r_i, (c+1)/r_i) where r_i = resolution[i] is the
/// number of cells per unit length. Samples are stored row-major, last axis
/// fastest.
struct CellWindow {
  std::vector<std::int64_t> resolution;
  std::vector<std::int64_t> first;
  std::vector<std::int64_t> extent;

  std::size_t dim() const { return resolution.size(); }
  std::size_t size() const;
  double cell_volume() const;
  double spacing(std::size_t axis) const { return 1.0 / static_cast<double>(resolution[axis]); }
  double midpoint(std::size_t axis, std::int64_t cell) const {
    return (static_cast<double>(cell) + 0.5) / static_cast<double>(resolution[axis]);
  }
  Box box() const;
  std::vector<std::size_t> strides() const;
  bool same_lattice(const CellWindow& other) const { return resolution == other.resolution; }

  /// Smallest window of cells covering the box.
  static CellWindow covering(const Box& box, std::vector<std::int64_t> resolution);
};

/// Window of cells shared by two windows on the same lattice (extent may be 0).
CellWindow intersect(const CellWindow& a, const CellWindow& b);

/// True when every cell of `inner` is a cell of `outer` (same lattice).
bool window_contains(const CellWindow& outer, const CellWindow& inner);

using Profile = std::function<double(std::span<const double>)>;

/// Samples of a compactly supported test function at cell midpoints. When the
/// sampled function is known analytically it is kept, so that rescaling can
/// resample instead of interpolating.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(CellWindow window, std::vector<double> samples, Box support, Profile source = {});

  const CellWindow& window() const { return window_; }
  std::span<const double> samples() const { return samples_; }
  std::span<double> samples() { return samples_; }
  const Box& support() const { return support_; }
  const Profile& source() const { return source_; }
  std::size_t dim() const { return window_.dim(); }

  /// Estimated C^r norm: sum over |k| <= r of sup |D^k psi| (finite differences).
  double reg_norm(int r = 1) const;
  double sup_norm() const;
  double l1_norm() const;
  double l2_norm() const;

 private:
  CellWindow window_;
  std::vector<double> samples_;
  Box support_;
  Profile source_;
};

GridFunction sample(const Profile& f, const Box& support, std::vector<std::int64_t> resolution);

/// prod_i bump((y_i - center_i)/radius_i) with bump(t) = exp(-1/(1-t^2)) on (-1,1).
Profile bump_profile(Point center, std::vector<double> radius);
Box bump_support(const Point& center, const std::vector<double>& radius);

/// Midpoint-quadrature <f,g>. Resolutions must be commensurable on every axis
/// (one divides the other); the coarser function is treated as piecewise constant.
double inner_product(const GridFunction& f, const GridFunction& g);

/// psi_x^lambda(y) = lambda^{-|S|} psi(S^{1/lambda}(y - x)).
GridFunction localize(const GridFunction& psi, const Point& x, double lambda, const ScalingVector& scaling,
                      const Box* working_box = nullptr);

/// Multi-index helper: iterate over all cells of a window in storage order.
template <class F>
void for_each_cell(const CellWindow& w, F&& f) {
  const std::size_t d = w.dim();
  std::vector<std::int64_t> idx(w.first);
  const std::size_t total = w.size();
  for (std::size_t flat = 0; flat < total; ++flat) {
    f(flat, std::span<const std::int64_t>(idx));
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < w.first[a] + w.extent[a]) break;
      idx[a] = w.first[a];
    }
  }
}

}  // namespace recon
