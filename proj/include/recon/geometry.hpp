#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace recon {

using Point = std::vector<double>;

/// Integer exponents s_1..s_d >= 1 of an anisotropic dilation.
class ScalingVector {
 public:
  ScalingVector() = default;
  explicit ScalingVector(std::vector<int> exponents);

  static ScalingVector canonical(std::size_t d);
  static ScalingVector parabolic(std::size_t d);  // (2,1,...,1)

  std::size_t dim() const { return s_.size(); }
  int operator[](std::size_t i) const { return s_[i]; }
  const std::vector<int>& exponents() const { return s_; }
  int total() const;  // |S|
  int min_exponent() const;
  /// E = s_1 + ... + s_e for the first e (stochastic) axes.
  int partial_total(std::size_t e) const;

  /// |x| = sum_i |x_i|^{1/s_i}
  double norm(std::span<const double> x) const;
  /// S^lambda x
  Point dilate(double lambda, std::span<const double> x) const;

 private:
  std::vector<int> s_;
};

struct Box {
  std::vector<double> lo, hi;

  std::size_t dim() const { return lo.size(); }
  bool contains(const Box& inner) const;
  bool contains(std::span<const double> x) const;
  static Box hull(const Box& a, const Box& b);
};

/// True when the boxes have disjoint interiors in at least one of the first
/// `axes` coordinates.
bool disjoint_on_axes(const Box& a, const Box& b, std::size_t axes);

}  // namespace recon
