#include <doctest.h>

#include <cmath>
#include <limits>

#include "recon/error.hpp"
#include "recon/reconstruct.hpp"

using namespace recon;

namespace {

constexpr std::int64_t R = 1 << 12;

const WaveletBasis& db2() {
  static const WaveletBasis b = build_basis(WaveletFamily::daubechies, 2, 12);
  return b;
}

GridFunction bump(double c, double r) { return sample(bump_profile({c}, {r}), bump_support({c}, {r}), {R}); }

const Box domain{{-1.0}, {4.0}};

double density(std::span<const double> x) { return 1.0 + 0.5 * std::sin(3.0 * x[0]); }

PathSampler white_sampler(double alpha) {
  return PathSampler(NoiseSampler(CellWindow::covering(domain, {R}), CovarianceMeasure::white(0), true),
                     HolderFieldSampler(FieldSpec{alpha, {0}, 1.0}, node_window(domain, {R})), 5);
}

}  // namespace

TEST_CASE("a constant germ reconstructs the driver tested against the projection") {
  const double c = 1.75;
  const Driver h = Driver::density(density, CellWindow::covering(domain, {R}));
  const YoungGerm germ([c](std::span<const double>) { return c; }, h, 0);
  const GridFunction psi = bump(1.5, 0.5);
  ReconstructionOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.n_min = 2;
  o.n_max = 6;
  const ReconstructionRun run = reconstruct(germ, db2(), {psi}, o, nullptr);
  REQUIRE(run.paths == 1);
  for (std::size_t i = 0; i < run.levels.size(); ++i) {
    const GridFunction pn = project(db2(), psi, run.levels[i], o.scaling, ProjectionKind::scaling);
    CHECK(run.value(i, 0, 0) == doctest::Approx(c * h.apply(pn, PathSample{})).epsilon(1e-10));
  }
}

TEST_CASE("reconstruction of a young germ converges to the product at rate k + 1") {
  const Driver h = Driver::density(density, CellWindow::covering(domain, {R}));
  const Profile g = [](std::span<const double> x) { return std::cos(x[0]); };
  const GridFunction psi = bump(1.5, 0.5);
  // oracle: sum over cells of g h psi dx on the same lattice
  double exact = 0.0;
  for_each_cell(psi.window(), [&](std::size_t flat, std::span<const std::int64_t> idx) {
    const double x = psi.window().midpoint(0, idx[0]);
    exact += std::cos(x) * density(std::vector<double>{x}) * psi.samples()[flat];
  });
  exact *= psi.window().cell_volume();
  ReconstructionOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.n_min = 3;
  o.n_max = 9;
  for (int k : {0, 1}) {
    CAPTURE(k);
    const YoungGerm germ(g, h, k);
    const ReconstructionRun run = reconstruct(germ, db2(), {psi}, o, nullptr);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < run.levels.size(); ++i) {
      lx.push_back(run.levels[i]);
      ly.push_back(std::log2(std::abs(run.value(i, 0, 0) - exact)));
    }
    CHECK(fit_least_squares(lx, ly).slope == doctest::Approx(-(k + 1)).epsilon(0.15));
    CHECK(run.cauchy_fit[0].slope == doctest::Approx(-(k + 1)).epsilon(0.15));
    CHECK(std::isfinite(run.tail_bound[0]));
    // increments bound the total change
    double sum = 0.0;
    for (const auto& inc : run.increments) sum += inc.value;
    CHECK(sum >= std::abs(run.value(run.levels.size() - 1, 0, 0) - run.value(0, 0, 0)) - 1e-15);
  }
}

TEST_CASE("one-sided reconstruction only reads noise near the test function") {
  const PathSampler s = white_sampler(0.75);
  const NoiseProductGerm germ(1, {0});
  const GridFunction psi = bump(1.5, 0.5);
  ReconstructionOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.n_min = 4;
  o.n_max = 8;
  const Reconstructor rec(germ, db2(), {psi}, o);
  PathSample p = s.sample(3);
  const auto before = rec.values(p);
  // perturb cells well away from [1, 2] + basis supports at level 4
  const CellWindow& w = p.noise.window;
  for (std::int64_t c = 0; c < w.extent[0]; ++c) {
    const double t = w.midpoint(0, w.first[0] + c);
    if (t < 0.5 || t > 2.5) p.noise.cells[static_cast<std::size_t>(c)] += 10.0;
  }
  CHECK(rec.values(p) == before);
}

TEST_CASE("one-sided precondition and resolution checks") {
  const NoiseProductGerm germ(1, {0});
  const GridFunction psi = bump(1.5, 0.5);
  ReconstructionOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.n_min = 4;
  o.n_max = 6;
  o.anchors = {{1.0}};
  try {
    Reconstructor(germ, db2(), {psi}, o);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
  o.variant = Variant::two_sided;
  CHECK_NOTHROW(Reconstructor(germ, db2(), {psi}, o));
  o.n_max = 11;
  try {
    Reconstructor(germ, db2(), {psi}, o);
    FAIL("expected a resolution error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::resolution);
  }
  CHECK(parse_variant("two-sided") == Variant::two_sided);
  CHECK_THROWS_AS(parse_variant("sideways"), Error);
}

TEST_CASE("geometric tail extrapolation") {
  const std::vector<double> halving{4, 2, 1}, growing{1, 2, 3}, zero{1, 0.5, 0}, empty;
  CHECK(geometric_tail(halving) == doctest::Approx(1.0));
  CHECK(std::isinf(geometric_tail(growing)));
  CHECK(geometric_tail(zero) == 0.0);
  CHECK(geometric_tail(empty) == 0.0);
  CHECK(std::isinf(geometric_tail(std::vector<double>{1, 0.5})));
}

TEST_CASE("error rate: vanishing germ and vanishing conditional residuals") {
  const PathSampler s = white_sampler(0.75);
  ErrorRateOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.lambdas = {0.25, 0.125, 0.0625};
  o.points = {{1.0}};
  o.n_max = 8;
  o.paths = 40;
  o.conditional = true;
  o.workers = 2;
  const GridFunction psi = bump(1.5, 0.5);

  const YoungGerm zero([](std::span<const double>) { return 0.0; }, Driver::noise(), 0, 1);
  const ErrorRateReport z = fit_error_rate(zero, db2(), psi, o, &s);
  CHECK(z.degenerate);
  CHECK(z.conditional_vanishes);
  CHECK(z.fit.method == "none");

  const NoiseProductGerm np(1, {0});
  const ErrorRateReport r = fit_error_rate(np, db2(), psi, o, &s);
  CHECK_FALSE(r.degenerate);
  CHECK(r.conditional_vanishes);
  CHECK(r.norms.size() == 3);
  CHECK(r.norms[2].value < r.norms[0].value);

  const NoiseProductGerm unadapted(1, {});
  try {
    fit_error_rate(unadapted, db2(), psi, o, &s);
    FAIL("expected a capability error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::capability);
  }
}

TEST_CASE("covariance moments need separated residual supports") {
  const PathSampler s = white_sampler(0.75);
  const NoiseProductGerm np(1, {0});
  const GridFunction psi = bump(1.5, 0.5);
  CovarianceCheckOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.Rtilde = 3.0;
  o.n_max = 8;
  o.paths = 10;
  try {
    covariance_moment(np, db2(), psi, {1.0}, 0.125, psi, {1.0}, 0.125, o, &s);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
  CHECK_NOTHROW(covariance_moment(np, db2(), psi, {0.5}, 0.125, psi, {1.5}, 0.125, o, &s));
}

TEST_CASE("bdg inequality for a deterministic family") {
  const BdgReport r = bdg_verify(constant_family(), 2.0, {4, 16, 64}, 10, 1);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) CHECK(row.ratio <= 1.0 + 1e-12);
  CHECK_THROWS_AS(bdg_verify(constant_family(), 0.5, {4}, 10, 1), Error);
}

TEST_CASE("bdg families are adapted") {
  Rng rng(1);
  std::vector<double> Z(8), C(8);
  martingale_family().draw(8, rng, Z, C);
  for (double c : C) CHECK(c == 0.0);
  gaussian_family().draw(8, rng, Z, C);
  for (double c : C) CHECK(c == 0.0);
  constant_family().draw(8, rng, Z, C);
  CHECK(Z[0] == 1.0);
  CHECK(Z[4] == 2.0);
  CHECK(C == Z);
}

TEST_CASE("kolmogorov constant of the zero distribution vanishes") {
  KolmogorovOptions o;
  o.scaling = ScalingVector::canonical(1);
  o.box = Box{{0.0}, {2.0}};
  o.n_max = 4;
  o.paths = 3;
  const CellWindow w = CellWindow::covering(Box{{-1.0}, {3.0}}, {1 << 10});
  const KolmogorovEstimate k =
      kolmogorov_constant(db2(), o, [&](std::size_t) { return CellMeasure{w, std::vector<double>(w.size(), 0.0)}; });
  CHECK(k.norm.value == 0.0);
  for (double b : k.B) CHECK(b == 0.0);
  o.alpha = 0.5;
  CHECK_THROWS_AS(
      kolmogorov_constant(db2(), o, [&](std::size_t) { return CellMeasure{w, std::vector<double>(w.size(), 0.0)}; }),
      Error);
}

TEST_CASE("capability warnings for too few vanishing moments") {
  const WaveletBasis haar = build_basis(WaveletFamily::haar, 1, 8);
  CHECK_FALSE(capability_warning(-1.5, 0.75, 1, haar, ScalingVector::canonical(1)).empty());
  CHECK_FALSE(capability_warning(-0.5, -1.0, 2, haar, ScalingVector::canonical(1)).empty());
  CHECK(capability_warning(-0.5, 0.75, 1, haar, ScalingVector::canonical(1)).empty());
  CHECK(capability_warning(-1.5, 0.75, 1, db2(), ScalingVector::canonical(1)).empty());
}
