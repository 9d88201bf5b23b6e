#include <doctest.h>

#include <cmath>

#include "recon/error.hpp"
#include "recon/geometry.hpp"
#include "recon/germ.hpp"
#include "recon/grid.hpp"
#include "recon/reconstruct.hpp"

using namespace recon;

namespace {

// int_{-1}^{1} exp(-1/(1-t^2)) dt, scipy.integrate.quad oracle
constexpr double bump_mass = 0.44399381616807943;

double total(const GridFunction& f) {
  double s = 0.0;
  for (double v : f.samples()) s += v;
  return s * f.window().cell_volume();
}

}  // namespace

TEST_CASE("scaling vectors") {
  const ScalingVector s({2, 1});
  CHECK(s.total() == 3);
  CHECK(s.min_exponent() == 1);
  CHECK(s.partial_total(1) == 2);
  const std::vector<double> x{4.0, -3.0};
  CHECK(s.norm(x) == doctest::Approx(2.0 + 3.0));
  const Point y = s.dilate(0.5, x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(-1.5));
  CHECK(ScalingVector::parabolic(3).exponents() == std::vector<int>{2, 1, 1});
  CHECK_THROWS_AS(ScalingVector({0, 1}), Error);
}

TEST_CASE("scaled norm is homogeneous under dilation") {
  const ScalingVector s({2, 1, 3});
  const std::vector<double> x{0.3, -1.2, 0.7};
  for (double l : {0.5, 0.125, 2.0}) CHECK(s.norm(s.dilate(l, x)) == doctest::Approx(l * s.norm(x)));
}

TEST_CASE("covering windows and cell geometry") {
  const Box b{{0.1, -0.5}, {0.9, 0.5}};
  const CellWindow w = CellWindow::covering(b, {4, 8});
  CHECK(w.first == std::vector<std::int64_t>{0, -4});
  CHECK(w.extent == std::vector<std::int64_t>{4, 8});
  CHECK(w.size() == 32);
  CHECK(w.cell_volume() == doctest::Approx(1.0 / 32));
  CHECK(w.midpoint(0, 1) == doctest::Approx(0.375));
  CHECK(w.strides() == std::vector<std::size_t>{8, 1});
}

TEST_CASE("window intersection and containment") {
  CellWindow a{{16}, {0}, {10}}, b{{16}, {5}, {10}}, c{{16}, {2}, {3}}, other{{8}, {0}, {4}};
  const CellWindow i = intersect(a, b);
  CHECK(i.first[0] == 5);
  CHECK(i.extent[0] == 5);
  CHECK(window_contains(a, c));
  CHECK_FALSE(window_contains(b, c));
  CHECK_FALSE(window_contains(a, other));
}

TEST_CASE("sampled bump integrates to its closed-form mass") {
  const GridFunction f = sample(bump_profile({0.0}, {1.0}), bump_support({0.0}, {1.0}), {1024});
  CHECK(total(f) == doctest::Approx(bump_mass).epsilon(1e-6));
  const GridFunction g = sample(bump_profile({0.5, 1.0}, {0.25, 0.5}), bump_support({0.5, 1.0}, {0.25, 0.5}), {256, 256});
  CHECK(total(g) == doctest::Approx(0.25 * 0.5 * bump_mass * bump_mass).epsilon(1e-4));
}

TEST_CASE("localization keeps the integral and moves the support") {
  const ScalingVector s({2, 1});
  const GridFunction psi = sample(bump_profile({1.5, 0.0}, {0.5, 1.0}), bump_support({1.5, 0.0}, {0.5, 1.0}), {256, 256});
  const GridFunction loc = localize(psi, {0.25, 0.5}, 0.5, s);
  CHECK(loc.support().lo[0] == doctest::Approx(0.25 + 0.25 * 1.0));
  CHECK(loc.support().hi[0] == doctest::Approx(0.25 + 0.25 * 2.0));
  CHECK(loc.support().lo[1] == doctest::Approx(0.0));
  CHECK(total(loc) == doctest::Approx(total(psi)).epsilon(1e-3));
  CHECK_THROWS_AS(localize(psi, {0.0, 0.0}, 1.5, s), Error);
  const Box small{{0.0, 0.0}, {0.4, 1.0}};
  CHECK_THROWS_AS(localize(psi, {0.25, 0.5}, 0.5, s, &small), Error);
}

TEST_CASE("inner products on commensurable lattices") {
  const auto p = bump_profile({0.0}, {1.0});
  const GridFunction f = sample(p, bump_support({0.0}, {1.0}), {512});
  const GridFunction g = sample(p, bump_support({0.0}, {1.0}), {1024});
  CHECK(inner_product(f, f) == doctest::Approx(inner_product(f, g)).epsilon(1e-4));
  CHECK(inner_product(f, f) == doctest::Approx(f.l2_norm() * f.l2_norm()));
}

TEST_CASE("box disjointness on the leading axes") {
  const Box a{{0, 0}, {1, 1}}, b{{1, 0.5}, {2, 2}};
  CHECK(disjoint_on_axes(a, b, 1));
  CHECK(disjoint_on_axes(b, a, 1));
  CHECK_FALSE(disjoint_on_axes(a, Box{{0.5, 0}, {2, 2}}, 2));
  CHECK(Box::hull(a, b).hi == std::vector<double>{2, 2});
}

TEST_CASE("difference effective support is the smallest covering box") {
  const EffectiveSupport e = difference_support({0, 0}, {1, 2}, Box{{0, 0}, {1, 1}}, 2);
  CHECK(e.box.lo == std::vector<double>{0, 0});
  CHECK(e.box.hi == std::vector<double>{1, 2});
}

TEST_CASE("residual effective support carries the factor two") {
  const EffectiveSupport e = residual_support({0.0}, 0.5, 1.0, ScalingVector::canonical(1), 1);
  CHECK(e.box.lo[0] == doctest::Approx(0.0));
  CHECK(e.box.hi[0] == doctest::Approx(1.0));
  const EffectiveSupport f = residual_support({1.0}, 0.5, 1.0, ScalingVector::canonical(1), 1);
  CHECK(e.disjoint(f) == f.disjoint(e));
  CHECK(e.disjoint(f));
  CHECK_FALSE(e.disjoint(e));
}

TEST_CASE("two-sided cut offsets") {
  const auto c = two_sided_offsets({0.0}, 1.0, 2.0, 3.0, ScalingVector::canonical(1), 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0].t == doctest::Approx(-5.0));
  const auto p = two_sided_offsets({0.0}, 0.5, 1.0, 3.0, ScalingVector({2}), 1);
  CHECK(p[0].t == doctest::Approx(-1.0));
  const auto z = two_sided_offsets({0.7}, 1e-9, 2.0, 3.0, ScalingVector::canonical(1), 1);
  CHECK(z[0].t == doctest::Approx(0.7));
}
