#include "recon/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "recon/error.hpp"

namespace recon {

ScalingVector::ScalingVector(std::vector<int> exponents) : s_(std::move(exponents)) {
  require(!s_.empty(), ErrorKind::argument, "scaling vector needs at least one axis");
  for (int s : s_) require(s >= 1, ErrorKind::argument, "scaling exponents must be >= 1");
}

ScalingVector ScalingVector::canonical(std::size_t d) { return ScalingVector(std::vector<int>(d, 1)); }

ScalingVector ScalingVector::parabolic(std::size_t d) {
  std::vector<int> s(d, 1);
  s.at(0) = 2;
  return ScalingVector(std::move(s));
}

int ScalingVector::total() const {
  int t = 0;
  for (int s : s_) t += s;
  return t;
}

int ScalingVector::min_exponent() const { return *std::min_element(s_.begin(), s_.end()); }

int ScalingVector::partial_total(std::size_t e) const {
  require(e <= s_.size(), ErrorKind::argument, "more stochastic axes than dimensions");
  int t = 0;
  for (std::size_t i = 0; i < e; ++i) t += s_[i];
  return t;
}

double ScalingVector::norm(std::span<const double> x) const {
  require(x.size() == s_.size(), ErrorKind::argument, "point dimension differs from scaling");
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r += std::pow(std::abs(x[i]), 1.0 / s_[i]);
  return r;
}

Point ScalingVector::dilate(double lambda, std::span<const double> x) const {
  require(x.size() == s_.size(), ErrorKind::argument, "point dimension differs from scaling");
  Point y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::pow(lambda, s_[i]) * x[i];
  return y;
}

bool Box::contains(const Box& inner) const {
  if (inner.dim() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (inner.lo[i] < lo[i] || inner.hi[i] > hi[i]) return false;
  return true;
}

bool Box::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

Box Box::hull(const Box& a, const Box& b) {
  require(a.dim() == b.dim(), ErrorKind::argument, "box dimensions differ");
  Box h = a;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    h.lo[i] = std::min(a.lo[i], b.lo[i]);
    h.hi[i] = std::max(a.hi[i], b.hi[i]);
  }
  return h;
}

bool disjoint_on_axes(const Box& a, const Box& b, std::size_t axes) {
  require(a.dim() == b.dim() && axes <= a.dim(), ErrorKind::argument, "box dimensions differ");
  for (std::size_t i = 0; i < axes; ++i)
    if (a.hi[i] <= b.lo[i] || b.hi[i] <= a.lo[i]) return true;
  return false;
}

}  // namespace recon
