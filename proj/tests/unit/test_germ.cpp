#include <doctest.h>

#include <cmath>

#include "recon/error.hpp"
#include "recon/germ.hpp"

using namespace recon;

namespace {

constexpr std::int64_t R = 1 << 10;

GridFunction bump(double c, double r) { return sample(bump_profile({c}, {r}), bump_support({c}, {r}), {R}); }

GridFunction scaled_sum(const GridFunction& f, double a, const GridFunction& g, double b) {
  const CellWindow u = CellWindow::covering(Box::hull(f.support(), g.support()), {R});
  std::vector<double> h(u.size(), 0.0);
  for (const auto& [fn, c] : {std::pair{&f, a}, std::pair{&g, b}}) {
    const auto off = static_cast<std::size_t>(fn->window().first[0] - u.first[0]);
    for (std::size_t i = 0; i < fn->samples().size(); ++i) h[off + i] += c * fn->samples()[i];
  }
  return GridFunction(u, h, u.box());
}

PathSampler sampler_1d(double alpha, std::uint64_t seed = 3) {
  const Box box{{0.0}, {4.0}};
  return PathSampler(NoiseSampler(CellWindow::covering(box, {R}), CovarianceMeasure::white(0), true),
                     HolderFieldSampler(FieldSpec{alpha, {0}, 1.0}, node_window(box, {R})), seed);
}

}  // namespace

TEST_CASE("noise-product germ is the field times the noise") {
  const PathSampler s = sampler_1d(0.75);
  const NoiseProductGerm germ(1, {0});
  const PathSample p = s.sample(2);
  const GridFunction psi = bump(1.5, 0.5);
  for (double x : {0.25, 1.0, 2.7})
    CHECK(germ.evaluate({x}, psi, p) == doctest::Approx(p.field->at(std::vector<double>{x}) * eval_functional(p.noise, psi)));
  CHECK(germ.conditioning(0) == Conditioning::exact_linear);
  CHECK(NoiseProductGerm(1, {}).conditioning(0) == Conditioning::none);
}

TEST_CASE("germs are linear in the test function") {
  const PathSampler s = sampler_1d(0.5);
  const PathSample p = s.sample(0);
  const GridFunction f = bump(1.2, 0.3), g = bump(1.5, 0.4);
  const GridFunction h = scaled_sum(f, 1.5, g, -2.0);
  const NoiseProductGerm np(1, {0});
  const YoungGerm young([](std::span<const double> x) { return 1.0 + x[0] * x[0]; }, Driver::noise(), 2, 1);
  const SewingGerm sew([](const PathSample&) { return [](double s, double t) { return std::sin(s + 2 * t); }; });
  for (const Germ* germ : std::initializer_list<const Germ*>{&np, &young, &sew}) {
    CAPTURE(germ->name());
    const Point x{1.1};
    CHECK(germ->evaluate(x, h, p) ==
          doctest::Approx(1.5 * germ->evaluate(x, f, p) - 2.0 * germ->evaluate(x, g, p)).epsilon(1e-10));
  }
}

TEST_CASE("young germ of order zero matches the product with a deterministic field") {
  const PathSampler s = sampler_1d(0.5);
  const PathSample p = s.sample(4);
  const Profile g = [](std::span<const double> x) { return std::cos(x[0]); };
  const YoungGerm young(g, Driver::noise(), 0, 1);
  const NoiseProductGerm np(deterministic_field(g, node_window(Box{{0.0}, {4.0}}, {R})), 1);
  const GridFunction psi = bump(2.0, 0.5);
  for (double x : {0.5, 1.25, 3.0})  // lattice nodes
    CHECK(young.evaluate({x}, psi, p) == doctest::Approx(np.evaluate({x}, psi, p)).epsilon(1e-12));
}

TEST_CASE("young germ with a constant prefactor does not depend on the base point") {
  const PathSampler s = sampler_1d(0.5);
  const PathSample p = s.sample(1);
  const GridFunction psi = bump(1.5, 0.5);
  for (int k : {0, 1, 2}) {
    const YoungGerm young([](std::span<const double>) { return 2.5; }, Driver::noise(), k, 1);
    CHECK(young.evaluate({0.3}, psi, p) == doctest::Approx(young.evaluate({3.1}, psi, p)).epsilon(1e-9));
  }
}

TEST_CASE("second order taylor coefficients reproduce a quadratic") {
  const Profile g = [](std::span<const double> y) {
    return 1 + 2 * y[0] + 3 * y[1] + 4 * y[0] * y[0] + 5 * y[0] * y[1] + 6 * y[1] * y[1];
  };
  const YoungGerm young(g, Driver::noise(), 2);
  const std::vector<double> expect{1, 2, 3, 4, 5, 6};
  for (const Point& x : {Point{0.0, 0.0}, Point{0.7, -1.3}}) {
    const auto c = young.taylor_coefficients(x);
    REQUIRE(c.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) CHECK(c[k] == doctest::Approx(expect[k]).epsilon(1e-5).scale(1.0));
  }
  const YoungGerm linear(g, Driver::noise(), 1);
  const auto c = linear.taylor_coefficients({0.0, 0.0});
  REQUIRE(c.size() == 3);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("fast translate evaluation agrees with the basis-function path") {
  const WaveletBasis basis = build_basis(WaveletFamily::daubechies, 2, 12);
  const PathSampler s = sampler_1d(0.75);
  const PathSample p = s.sample(7);
  CoefficientArray t;
  t.component = LevelComponent{{AxisSpec{5, true}}};
  t.first = {40};
  t.extent = {12};
  t.values.assign(12, 0.0);
  const NoiseProductGerm np(1, {0});
  const YoungGerm young([](std::span<const double> x) { return std::sin(x[0]); }, Driver::noise(), 1, 1);
  const YoungGerm dens([](std::span<const double> x) { return x[0]; },
                       Driver::density([](std::span<const double> x) { return std::exp(-x[0]); },
                                       CellWindow::covering(Box{{0.0}, {4.0}}, {R})),
                       2);
  for (const Germ* germ : std::initializer_list<const Germ*>{&np, &young, &dens}) {
    CAPTURE(germ->name());
    const auto fast = germ->evaluate_translates(basis, t, {R}, p);
    const auto slow = germ->Germ::evaluate_translates(basis, t, {R}, p);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("sewing germ on simple two-parameter processes") {
  const GridFunction psi = bump(0.5, 0.25);
  double mass = 0.0;
  for (double v : psi.samples()) mass += v;
  mass *= psi.window().cell_volume();
  // A(s,t) = c (t - s): -int A psi' = c int psi
  const double c = 1.7;
  CHECK(SewingGerm::apply([c](double s, double t) { return c * (t - s); }, 0.2, psi) ==
        doctest::Approx(c * mass).epsilon(1e-9));
  CHECK(SewingGerm::apply([](double, double) { return 0.0; }, 0.2, psi) == 0.0);
  CHECK(SewingGerm::apply([](double, double) { return 3.0; }, 0.2, psi) == doctest::Approx(0.0).scale(1.0));
  const CellWindow tiny{{R}, {0}, {2}};
  CHECK_THROWS_AS(SewingGerm::apply([](double, double) { return 1.0; }, 0.0, GridFunction(tiny, {1.0, 1.0}, tiny.box())),
                  Error);
}

TEST_CASE("brownian path from white noise") {
  const NoiseField xi = sample_white_noise(CellWindow{{8}, {0}, {8}}, 1, 0);
  const BrownianPath b = brownian_path(xi);
  CHECK(b(0.0) == 0.0);
  CHECK(b.end() == 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sum += xi.cells[i];
  CHECK(b(0.5) == doctest::Approx(sum));
  CHECK(b(0.5625) == doctest::Approx(sum + 0.5 * xi.cells[4]));
}

TEST_CASE("conditional evaluation of a noise-product germ at the cut vanishes") {
  const PathSampler s = sampler_1d(0.75);
  const NoiseProductGerm germ(1, {0});
  const GridFunction psi = localize(bump(1.5, 0.5), {1.0}, 0.25, ScalingVector::canonical(1));
  for (std::uint64_t i = 0; i < 5; ++i) {
    const PathSample p = s.sample(i);
    auto f = [&](const PathSample& q) { return germ.evaluate({1.0}, psi, q); };
    CHECK(conditional_value(f, Conditioning::exact_linear, p, {0, 1.0}, &s) == 0.0);
    CHECK(f(p) != 0.0);
  }
  auto f = [&](const PathSample& q) { return germ.evaluate({1.0}, psi, q); };
  CHECK_THROWS_AS(conditional_value(f, Conditioning::none, s.sample(0), {0, 1.0}, &s), Error);
}

TEST_CASE("monte carlo conditioning averages redrawn futures") {
  const PathSampler s = sampler_1d(0.5);
  const PathSample p = s.sample(0);
  const GridFunction psi = bump(1.5, 0.5);
  auto f = [&](const PathSample& q) { return eval_functional(q.noise, psi); };
  // xi(psi) with psi on [1, 2] and the cut at 1.5: exact value is the past part
  const double exact = conditional_value(f, Conditioning::exact_linear, p, {0, 1.5}, &s);
  const double mc = conditional_value(f, Conditioning::monte_carlo, p, {0, 1.5}, &s, 400);
  CHECK(std::abs(mc - exact) < 0.05);
  CHECK_THROWS_AS(conditional_value(f, Conditioning::monte_carlo, p, {0, 1.5}, nullptr), Error);
}

TEST_CASE("coherence estimation: degenerate, vanishing and capability cases") {
  const PathSampler s = sampler_1d(0.75);
  const GridFunction psi = bump(1.5, 0.5);
  CoherenceDesign d = CoherenceDesign::standard({1.0}, ScalingVector::canonical(1));
  d.paths = 20;

  const YoungGerm flat([](std::span<const double>) { return 1.0; }, Driver::noise(), 0, 1);
  const CoherenceReport a = estimate_coherence(flat, psi, d, CoherenceMode::plain, &s);
  CHECK(a.degenerate);
  CHECK_FALSE(a.vanishing_conditional);

  const NoiseProductGerm np(1, {0});
  const CoherenceReport b = estimate_coherence(np, psi, d, CoherenceMode::conditional, &s);
  CHECK(b.degenerate);
  CHECK(b.vanishing_conditional);

  const NoiseProductGerm unadapted(1, {});
  CHECK_THROWS_AS(estimate_coherence(unadapted, psi, d, CoherenceMode::conditional, &s), Error);
  try {
    estimate_coherence(unadapted, psi, d, CoherenceMode::conditional, &s);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::capability);
  }

  CoherenceDesign small = d;
  small.scales.resize(2);  // 10 points
  try {
    estimate_coherence(np, psi, small, CoherenceMode::plain, &s);
    FAIL("expected an argument error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::argument);
  }
  CHECK(parse_coherence_mode("covariance") == CoherenceMode::covariance);
  CHECK_THROWS_AS(parse_coherence_mode("joint"), Error);
}

TEST_CASE("plain coherence of a noise-product germ") {
  const PathSampler s = sampler_1d(0.75, 11);
  const GridFunction psi = bump(1.5, 0.5);
  CoherenceDesign d = CoherenceDesign::standard({1.0}, ScalingVector::canonical(1));
  d.paths = 300;
  d.workers = 4;
  const CoherenceReport r = estimate_coherence(NoiseProductGerm(1, {0}), psi, d, CoherenceMode::plain, &s);
  CHECK_FALSE(r.degenerate);
  CHECK(r.stochastic_total == 1);
  CHECK(r.points.size() == 25);
  CHECK(std::abs(r.gamma_hat - 0.75) <= 0.2);
  // the regressors cannot separate eps^{-1/2} d^{3/4} exactly; exact-data fit gives -0.8906
  CHECK(std::abs(r.alpha_hat + 0.8906) < 0.1);
}
