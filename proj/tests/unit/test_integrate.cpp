#include <doctest.h>

#include <cmath>
#include <numbers>

#include "recon/error.hpp"
#include "recon/integrate.hpp"

using namespace recon;

namespace {

PathSampler brownian_sampler(std::int64_t res, std::uint64_t seed) {
  return PathSampler(NoiseSampler(CellWindow::covering(Box{{0.0}, {1.0}}, {res}), CovarianceMeasure::white(0), true),
                     std::nullopt, seed);
}

double wave(double t) { return 0.3 * std::sin(2.0 * std::numbers::pi * t); }

}  // namespace

TEST_CASE("sewing an additive germ is exact") {
  const TwoParameter A = [](double s, double t) { return wave(t) - wave(s) + t * t - s * s; };
  const SewingOutput I = sew({A, 1.0}, 5);
  CHECK(I.nodes.size() == 33);
  for (double t : {0.0, 0.1, 0.5, 0.77, 1.0}) CHECK(I.at(t) == doctest::Approx(wave(t) + t * t).epsilon(1e-12).scale(1.0));
  const SewingOutput Z = sew({[](double, double) { return 0.0; }, 1.0}, 4);
  for (double v : Z.nodes) CHECK(v == 0.0);
  CHECK_THROWS_AS(sew({A, 1.0}, 1), Error);
  CHECK_THROWS_AS(I.at(1.5), Error);
}

TEST_CASE("domain extension of a two-parameter germ") {
  const SewingInput e = extend_domain([](double s, double t) { return t - s; }, 1.0);
  CHECK(e.A(0.2, 0.5) == doctest::Approx(0.3));
  CHECK(e.A(0.5, 0.2) == doctest::Approx(-0.3));
  CHECK(e.A(-1.0, 0.5) == doctest::Approx(0.5));
  CHECK(e.A(-1.0, 2.0) == doctest::Approx(1.0));
  CHECK(e.A(0.5, 3.0) == doctest::Approx(0.5));
  CHECK(e.A(1.5, 2.0) == 0.0);
  CHECK(e.A(-2.0, -1.0) == 0.0);
  CHECK_THROWS_AS(extend_domain([](double, double) { return 0.0; }, 0.0), Error);
}

TEST_CASE("ito sums converge at rate one half") {
  const PathSampler s = brownian_sampler(1 << 12, 21);
  auto exact = [](const PathSample& p) {
    const double b = brownian_path(p.noise)(1.0);
    return 0.5 * (b * b - 1.0);
  };
  const SewingRate r = sewing_error_rate(ito_germ(), exact, 1.0, {4, 5, 6, 7, 8, 9}, s, 400, 4);
  CHECK(r.fit.slope == doctest::Approx(-0.5).epsilon(0.2));
  // E (I_n - exact)^2 = T^2 / (2 2^n)
  const double n4 = std::sqrt(1.0 / 32);
  CHECK(std::abs(r.errors[0].value - n4) < 4 * r.errors[0].se);
}

TEST_CASE("walsh integral: zero, linearity and constant integrands") {
  const CellWindow w{{64, 32}, {0, -16}, {64, 32}};
  const NoiseField W = sample_martingale_measure(CovarianceMeasure::white(1), w, 4);
  const CellWindow nodes = node_window(w.box(), w.resolution);
  const RandomField one = deterministic_field([](std::span<const double>) { return 1.0; }, nodes);
  const RandomField X = deterministic_field([](std::span<const double> x) { return std::cos(x[0] + x[1]); }, nodes);
  const GridFunction psi =
      sample(bump_profile({0.5, 0.0}, {0.3, 0.4}), bump_support({0.5, 0.0}, {0.3, 0.4}), w.resolution);
  const GridFunction zero(psi.window(), std::vector<double>(psi.samples().size(), 0.0), psi.support());
  CHECK(walsh_integral(X, W, zero) == 0.0);
  CHECK(walsh_integral(one, W, psi) == doctest::Approx(eval_functional(W, psi)).epsilon(1e-12));
  std::vector<double> twice(psi.samples().begin(), psi.samples().end());
  for (double& v : twice) v *= -2.0;
  CHECK(walsh_integral(X, W, GridFunction(psi.window(), twice, psi.support())) ==
        doctest::Approx(-2.0 * walsh_integral(X, W, psi)).epsilon(1e-12));
}

TEST_CASE("walsh integrand is read at the start of each time cell") {
  const CellWindow w{{8}, {0}, {8}};
  const NoiseField W = sample_martingale_measure(CovarianceMeasure::white(0), w, 9);
  const CellWindow nodes = node_window(w.box(), w.resolution);
  // X jumps at t = 0.5: cells starting at 0.5 or later see 1, earlier ones 0
  const RandomField X = deterministic_field([](std::span<const double> x) { return x[0] >= 0.5 ? 1.0 : 0.0; }, nodes);
  const GridFunction psi(w, std::vector<double>(8, 1.0), w.box());
  double late = 0.0;
  for (std::size_t i = 4; i < 8; ++i) late += W.cells[i];
  CHECK(walsh_integral(X, W, psi) == doctest::Approx(late).epsilon(1e-12));
}

TEST_CASE("walsh variance of a constant integrand is the L2 norm") {
  const std::vector<std::int64_t> res{128, 128};
  const GridFunction psi = sample(bump_profile({0.5, 0.5}, {0.3, 0.4}), bump_support({0.5, 0.5}, {0.3, 0.4}), res);
  const RandomField one =
      deterministic_field([](std::span<const double>) { return 1.0; }, node_window(Box{{0, 0}, {1, 1}}, res));
  CHECK(walsh_variance(one, CovarianceMeasure::white(1), psi) ==
        doctest::Approx(psi.l2_norm() * psi.l2_norm()).epsilon(1e-12));
}

TEST_CASE("walsh integral variance matches the isometry") {
  const CellWindow w{{32, 16}, {0, 0}, {32, 16}};
  const CellWindow nodes = node_window(w.box(), w.resolution);
  const RandomField X = deterministic_field([](std::span<const double> x) { return 1.0 + x[0] * x[1]; }, nodes);
  const GridFunction psi =
      sample(bump_profile({0.5, 0.5}, {0.4, 0.4}), bump_support({0.5, 0.5}, {0.4, 0.4}), w.resolution);
  std::vector<double> v(3000);
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] = walsh_integral(X, sample_martingale_measure(CovarianceMeasure::white(1), w, 2, k), psi);
  const NormEstimate n = estimate_lp_norm(v, 2.0);
  const double expect = std::sqrt(walsh_variance(X, CovarianceMeasure::white(1), psi));
  CHECK(std::abs(n.value - expect) < 4 * n.se);
}

TEST_CASE("homogeneity of the white-noise K norm") {
  for (std::size_t sd : {1u, 2u}) {
    CAPTURE(sd);
    const Point center(sd + 1, 0.0), radius(sd + 1, 0.5);
    const HomogeneityReport r = homogeneity_check(CovarianceMeasure::white(sd), sd, bump_profile(center, radius),
                                                  bump_support(center, radius), Point(sd + 1, 0.25),
                                                  {1.0, 0.5, 0.25, 0.125}, sd == 1 ? 10 : 6);
    CHECK(r.expected_slope == doctest::Approx(-1.0 - static_cast<double>(sd)));
    CHECK(std::abs(r.fit.slope - r.expected_slope) < 0.05);
  }
}

TEST_CASE("homogeneity with a constant kernel follows its own scaling") {
  const CovarianceMeasure K =
      CovarianceMeasure::from_kernel([](std::span<const double>, std::span<const double>) { return 1.0; }, 2.0, "constant");
  const Point center{0.0, 0.0}, radius{0.5, 0.5};
  const HomogeneityReport r =
      homogeneity_check(K, 1, bump_profile(center, radius), bump_support(center, radius), center, {1.0, 0.5, 0.25}, 6);
  // (int phi dx)^2 ds scales like lambda^{-1}
  CHECK(r.expected_slope == doctest::Approx(-1.0));
  CHECK(std::abs(r.fit.slope + 1.0) < 0.05);
  CHECK_THROWS_AS(homogeneity_check(K, 1, bump_profile(center, radius), bump_support(center, radius), center, {1.0}, 6),
                  Error);
}

TEST_CASE("reconstruction of an additive sewing germ matches the sewn process") {
  const WaveletBasis basis = build_basis(WaveletFamily::daubechies, 2, 12);
  const PathSampler s = brownian_sampler(1 << 12, 5);
  const TwoParameterFactory A = [](const PathSample& p) {
    const BrownianPath B = brownian_path(p.noise);
    return TwoParameter([B](double u, double t) { return wave(t) - wave(u) + B(t) - B(u); });
  };
  const GridFunction psi = sample(bump_profile({0.5}, {0.25}), bump_support({0.5}, {0.25}), {1 << 12});
  SewingEquivalenceOptions o;
  o.n_min = 4;
  o.n_max = 8;
  o.sew_level = 10;
  o.paths = 60;
  o.workers = 4;
  const SewingEquivalence r = sewing_equivalence_check(A, basis, psi, o, s);
  CHECK(r.pass);
  CHECK(r.difference.value <= r.threshold);
  CHECK(r.increments.size() == 4);

  const GridFunction edge = sample(bump_profile({0.1}, {0.25}), bump_support({0.1}, {0.25}), {1 << 12});
  try {
    sewing_equivalence_check(A, basis, edge, o, s);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
}
