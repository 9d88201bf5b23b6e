#include <doctest.h>

#include <cmath>
#include <sstream>

#include "recon/error.hpp"
#include "recon/wavelet.hpp"

using namespace recon;

namespace {

double cell_value(const GridFunction& f, std::span<const std::int64_t> idx) {
  const CellWindow& w = f.window();
  std::size_t flat = 0;
  const auto st = w.strides();
  for (std::size_t a = 0; a < w.dim(); ++a) {
    const auto i = idx[a] - w.first[a];
    if (i < 0 || i >= w.extent[a]) return 0.0;
    flat += static_cast<std::size_t>(i) * st[a];
  }
  return f.samples()[flat];
}

// max |f - g| over the cells of either window
double max_difference(const GridFunction& f, const GridFunction& g) {
  double worst = 0.0;
  for (const GridFunction* h : {&f, &g})
    for_each_cell(h->window(), [&](std::size_t, std::span<const std::int64_t> idx) {
      worst = std::max(worst, std::abs(cell_value(f, idx) - cell_value(g, idx)));
    });
  return worst;
}

const WaveletBasis& db2() {
  static const WaveletBasis b = build_basis(WaveletFamily::daubechies, 2, 12);
  return b;
}

}  // namespace

TEST_CASE("filter constraints, orthonormality, moments and refinement") {
  for (int N = 1; N <= 6; ++N) {
    CAPTURE(N);
    const WaveletBasis b = build_basis(N == 1 ? WaveletFamily::haar : WaveletFamily::daubechies, N, 12);
    const BasisCheck c = check_basis(b);
    CHECK(c.filter_sum_error < 1e-12);
    CHECK(c.filter_orthogonality_error < 1e-12);
    CHECK(c.shift_orthonormality_error < 1e-4);
    CHECK(c.max_vanishing_moment < 1e-6);
    CHECK(c.refinement_residual < 1e-6);
    CHECK(b.support_lo() == 1);
    CHECK(b.support_hi() == 2 * N);
  }
}

TEST_CASE("daubechies taps match the published values") {
  const double s3 = std::sqrt(3.0), r = 4.0 * std::sqrt(2.0);
  const auto a = daubechies_filter(2);
  REQUIRE(a.size() == 4);
  CHECK(a[0] == doctest::Approx((1 + s3) / r).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx((3 + s3) / r).epsilon(1e-14));
  CHECK(a[2] == doctest::Approx((3 - s3) / r).epsilon(1e-14));
  CHECK(a[3] == doctest::Approx((1 - s3) / r).epsilon(1e-14));
  // six-tap filter, Daubechies' Ten Lectures table 6.1 (normalized to sum sqrt 2)
  const double db3[] = {0.3326705529500826,  0.8068915093110925,  0.4598775021184915,
                        -0.1350110200102546, -0.0854412738820267, 0.0352262918857095};
  const auto b = daubechies_filter(3);
  for (int k = 0; k < 6; ++k) CHECK(b[static_cast<std::size_t>(k)] == doctest::Approx(db3[k]).epsilon(1e-12));
  CHECK_THROWS_AS(daubechies_filter(0), Error);
}

TEST_CASE("cascade point values of DB2 at half integers") {
  const double s3 = std::sqrt(3.0);
  const auto v = cascade_eval(db2(), 1);  // phi(1 + j/2)
  REQUIRE(v.size() == 7);
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx((2 + s3) / 4).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx((1 + s3) / 2).epsilon(1e-12));
  CHECK(std::abs(v[3]) < 1e-12);
  CHECK(v[4] == doctest::Approx((1 - s3) / 2).epsilon(1e-12));
  CHECK(v[5] == doctest::Approx((2 - s3) / 4).epsilon(1e-12));
}

TEST_CASE("refinement relation holds on the samples") {
  CHECK(refinement_residual(db2()) < 1e-6);
  CHECK(refinement_residual(build_basis(WaveletFamily::daubechies, 4, 10)) < 1e-6);
}

TEST_CASE("detail family sizes") {
  CHECK(detail_components(2, ScalingVector::canonical(1)).size() == 1);
  CHECK(detail_components(2, ScalingVector::canonical(2)).size() == 3);
  CHECK(detail_components(2, ScalingVector::canonical(3)).size() == 7);
  CHECK(detail_components(2, ScalingVector({2, 1})).size() == 5);
  CHECK(detail_components(2, ScalingVector({2, 2})).size() == 8);
  for (const auto& c : detail_components(3, ScalingVector({2, 1}))) {
    CHECK(c.is_detail());
    CHECK(c.axes[0].level >= 6);
    CHECK(c.axes[0].level <= 7);
    CHECK(c.axes[1].level == 3);
  }
  const auto s = scaling_component(3, ScalingVector({2, 1}));
  CHECK_FALSE(s.is_detail());
  CHECK(s.axes[0].level == 6);
}

TEST_CASE("discrete basis functions are orthonormal on the fine grid") {
  const std::vector<std::int64_t> res{1 << 10};
  for (bool detail : {false, true}) {
    LevelComponent comp{{AxisSpec{4, detail}}};
    const std::int64_t m0 = 7;
    const GridFunction g = basis_function(db2(), comp, std::span<const std::int64_t>(&m0, 1), res);
    for (bool other : {false, true}) {
      const auto c = analyze(db2(), LevelComponent{{AxisSpec{4, other}}}, g.window(), g.samples(),
                             g.window().cell_volume());
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto m = c.first[0] + static_cast<std::int64_t>(i);
        const double expect = (other == detail && m == m0) ? 1.0 : 0.0;
        CHECK(c.values[i] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("coefficient points sit on the dyadic mesh") {
  CoefficientArray c;
  c.component = scaling_component(2, ScalingVector({2, 1}));
  c.first = {-1, 3};
  c.extent = {2, 3};
  c.values.assign(6, 0.0);
  const Point y = c.point(4);  // m = (0, 4)
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 1.0);
}

TEST_CASE("detail coefficients annihilate low-degree polynomials") {
  for (int N : {2, 3}) {
    const WaveletBasis b = build_basis(WaveletFamily::daubechies, N, 12);
    CellWindow w{{1 << 10}, {0}, {1 << 11}};
    for (int m = 0; m < N; ++m) {
      std::vector<double> data(w.size());
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::pow(w.midpoint(0, static_cast<std::int64_t>(i)), m);
      const auto c = analyze(b, LevelComponent{{AxisSpec{5, true}}}, w, data, w.cell_volume());
      // translates fully inside the window: support [m + 1, m + 2N] 2^-5 within [0, 2]
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto k = c.first[0] + static_cast<std::int64_t>(i);
        if (k + 1 < 0 || k + 2 * N > 64) continue;
        CHECK(std::abs(c.values[i]) < 1e-9);
      }
    }
  }
}

TEST_CASE("scaling projection plus details gives the next scaling projection") {
  const GridFunction psi = sample(bump_profile({0.6}, {0.4}), bump_support({0.6}, {0.4}), {1 << 12});
  const ScalingVector s = ScalingVector::canonical(1);
  for (int n : {2, 5}) {
    const GridFunction p = project(db2(), psi, n, s, ProjectionKind::scaling);
    const GridFunction d = project(db2(), psi, n, s, ProjectionKind::detail);
    const GridFunction next = project(db2(), psi, n + 1, s, ProjectionKind::scaling);
    double worst = 0.0;
    for_each_cell(next.window(), [&](std::size_t, std::span<const std::int64_t> idx) {
      worst = std::max(worst, std::abs(cell_value(next, idx) - cell_value(p, idx) - cell_value(d, idx)));
    });
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("anisotropic projections split the same way") {
  const ScalingVector s({2, 1});
  const GridFunction psi =
      sample(bump_profile({0.5, 0.5}, {0.3, 0.4}), bump_support({0.5, 0.5}, {0.3, 0.4}), {1 << 8, 1 << 7});
  const GridFunction p = project(db2(), psi, 2, s, ProjectionKind::scaling);
  const GridFunction d = project(db2(), psi, 2, s, ProjectionKind::detail);
  const GridFunction next = project(db2(), psi, 3, s, ProjectionKind::scaling);
  double worst = 0.0;
  for_each_cell(next.window(), [&](std::size_t, std::span<const std::int64_t> idx) {
    worst = std::max(worst, std::abs(cell_value(next, idx) - cell_value(p, idx) - cell_value(d, idx)));
  });
  CHECK(worst < 1e-10);
}

TEST_CASE("projections converge to the test function") {
  const GridFunction psi = sample(bump_profile({0.6}, {0.4}), bump_support({0.6}, {0.4}), {1 << 12});
  double prev = 1e9;
  for (int n = 3; n <= 8; ++n) {
    const double e = max_difference(project(db2(), psi, n, ScalingVector::canonical(1), ProjectionKind::scaling), psi);
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("basis files round trip") {
  std::stringstream ss;
  write_basis(ss, db2());
  const WaveletBasis back = read_basis(ss);
  CHECK(back.moments == 2);
  CHECK(back.filter == db2().filter);
  CHECK(back.scaling_samples == db2().scaling_samples);
  std::stringstream bad("not a basis");
  CHECK_THROWS_AS(read_basis(bad), Error);
}

TEST_CASE("dyadic exponents") {
  CHECK(dyadic_exponent(1) == 0);
  CHECK(dyadic_exponent(1024) == 10);
  CHECK(dyadic_exponent(12) == -1);
  CHECK(dyadic_exponent(0) == -1);
}

TEST_CASE("mesh points cover the box and the supports meeting it") {
  const Box box{{0.0}, {1.0}};
  const DyadicMesh m = mesh_points(3, ScalingVector::canonical(1), box, db2());
  const double h = m.spacing(0);
  CHECK(h == 0.125);
  // y = m h with [y + h, y + 3h] meeting [0, 1]: m from -3 to 7, plus y in the box up to 8
  CHECK(m.first[0] == -3);
  CHECK(m.first[0] + m.extent[0] - 1 == 8);
  CHECK(m.point(0)[0] == doctest::Approx(-0.375));
}

TEST_CASE("lemma bounds in one dimension") {
  const GridFunction psi = sample(bump_profile({0.0}, {1.0}), bump_support({0.0}, {1.0}), {1 << 14});
  const LemmaReport r = verify_lemma1(db2(), ScalingVector::canonical(1), psi, {0.0}, 1.0, 2, 9);
  CHECK(r.slope_scaling == doctest::Approx(-0.5).epsilon(0.1 / 0.5));
  CHECK(r.rtilde == 2.0);
  CHECK(r.slope_detail <= r.theory_detail + 0.3);
  CHECK_THROWS_AS(verify_lemma1(db2(), ScalingVector::canonical(1), psi, {0.0}, 0.1, 1, 5), Error);
}
