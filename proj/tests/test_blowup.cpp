#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "vmf/blowup.hpp"

using namespace vmf;

namespace {

Field liouville_field(const Grid& g, double mu) {
  Field v(g.count());
  for (int p = 0; p < g.count(); ++p) {
    double r2 = g.xs[p] * g.xs[p] + g.ys[p] * g.ys[p];
    v[p] = 2.0 * std::log((1.0 + mu) / (1.0 + mu * r2));
  }
  return v;
}

}  // namespace

TEST_CASE("peak detection on constructed fields") {
  Grid g = build_grid(Domain::unit_disk(), 48);

  CHECK(detect_peaks(g, Field(g.count(), 0.0), 1.0, 0.1).empty());
  CHECK_THROWS_AS(detect_peaks(g, Field(g.count(), 0.0), 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(detect_peaks(g, Field(g.count(), 0.0), 1.0, -1.0), std::invalid_argument);

  Field one = bump_field(g, {0.2, -0.1, 5.0, 0.2});
  auto p1 = detect_peaks(g, one, 1.0, 0.1);
  REQUIRE(p1.size() == 1);
  CHECK(p1[0].sign == 1);
  CHECK(p1[0].height == Catch::Approx(5.0).margin(0.1));
  CHECK(g.distance(p1[0].x, p1[0].y, 0.2, -0.1) <= g.h);

  Field two = bump_field(g, {0.4, 0.0, 5.0, 0.15});
  Field neg = bump_field(g, {-0.4, 0.0, 4.0, 0.15});
  for (int q = 0; q < g.count(); ++q) two[q] -= neg[q];
  auto p2 = detect_peaks(g, two, 1.0, 0.1);
  REQUIRE(p2.size() == 2);
  CHECK(p2[0].sign == 1);   // sorted by height
  CHECK(p2[1].sign == -1);
  CHECK(p2[0].height > p2[1].height);

  // Two candidates inside one separation radius: keep the higher.
  Field close = bump_field(g, {0.0, 0.0, 5.0, 0.1});
  Field side = bump_field(g, {0.18, 0.0, 3.0, 0.06});
  for (int q = 0; q < g.count(); ++q) close[q] += side[q];
  auto thin = detect_peaks(g, close, 1.0, 0.4);
  REQUIRE(thin.size() == 1);
  CHECK(thin[0].height >= 4.5);
  auto loose = detect_peaks(g, close, 1.0, 0.05);
  CHECK(loose.size() == 2);
}

TEST_CASE("local masses against the radial oracle") {
  constexpr double kSixteenTenthsPi = 5.026548245743669181540229;
  Grid g = build_grid(Domain::unit_disk(), 96);
  MeanFieldProblem p{Variant::Neri, liouville_measure(), 4.0 * kPi};
  Field v = liouville_field(g, 1.0);
  Peak center{0.0, 0.0, g.nearest_node(0.0, 0.0), 1, v[g.nearest_node(0.0, 0.0)]};

  LocalMasses m = local_masses(g, p, v, center, 0.5);
  CHECK(m.m_plus == Catch::Approx(kSixteenTenthsPi).margin(2e-2));
  CHECK(m.m_minus == 0.0);

  // Ball reaching outside the domain is rejected.
  Peak offside{0.8, 0.0, g.nearest_node(0.8, 0.0), 1, 1.0};
  CHECK_THROWS_AS(local_masses(g, p, v, offside, 0.3), std::invalid_argument);

  // Symmetric measure at v = 0: both densities are lambda/(2 |Omega|).
  MeanFieldProblem sp{Variant::Neri, sinh_measure(), 6.0};
  Field z(g.count(), 0.0);
  double area = integrate(g, Field(g.count(), 1.0));
  LocalMasses ms = local_masses(g, sp, z, Peak{0.2, 0.1, -1, 1, 0.0}, 0.3);
  double expect = 6.0 * (kPi * 0.09) / (2.0 * area);
  CHECK(ms.m_plus == Catch::Approx(expect).epsilon(2e-3));
  CHECK(ms.m_minus == Catch::Approx(ms.m_plus).epsilon(1e-12));
}

TEST_CASE("mass additivity over disjoint balls") {
  Grid g = build_grid(Domain::unit_disk(), 64);
  MeanFieldProblem p{Variant::Neri, liouville_measure(), 4.0 * kPi};
  Field v = liouville_field(g, 1.0);
  Nonlinearity nl = nonlinearity(g, p, v);
  LocalMasses a = local_masses(g, nl, -0.4, 0.0, 0.3);
  LocalMasses b = local_masses(g, nl, 0.4, 0.0, 0.3);
  CHECK(a.m_plus + b.m_plus <= 4.0 * kPi + 1e-9);
  CHECK(a.m_plus >= 0.0);
  CHECK(b.m_plus >= 0.0);
}

TEST_CASE("mass relation residual") {
  BetaCoefficients unit{1.0, 1.0};
  CHECK(mass_relation_residual({8.0 * kPi, 0.0}, unit) == Catch::Approx(0.0).margin(1e-9));
  CHECK(mass_relation_residual({0.0, 8.0 * kPi}, unit) == Catch::Approx(0.0).margin(1e-9));
  CHECK(mass_relation_residual({0.0, 0.0}, unit) == 0.0);

  BetaCoefficients two{2.0, 0.5};
  CHECK(mass_relation_residual({16.0 * kPi, 0.0}, two) == Catch::Approx(0.0).margin(1e-9));

  // Root of (s - 8 pi)^2 = 8 pi (s + 8 pi) by the quadratic formula: s = 24 pi.
  constexpr double kTwentyFourPi = 75.39822368615503772310344;
  CHECK(mass_relation_residual({kTwentyFourPi, 8.0 * kPi}, unit) ==
        Catch::Approx(0.0).margin(1e-9));

  // Swapping the masses together with the betas is the v -> -v symmetry.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 50; ++i) {
    MassPair m{u(rng), u(rng)};
    BetaCoefficients b{u(rng) / 10.0, u(rng) / 10.0};
    double r1 = mass_relation_residual(m, b);
    double r2 = mass_relation_residual({m.t, m.s}, {b.beta_minus, b.beta_plus});
    REQUIRE(r1 == Catch::Approx(r2).margin(1e-12));
  }
}

TEST_CASE("mass pair classification and the relation curve") {
  BetaCoefficients unit{1.0, 1.0};
  CHECK(classify_mass_pair({8.0 * kPi, 0.0}, unit) == MassRegion::DPlus);
  CHECK(classify_mass_pair({0.0, 8.0 * kPi}, unit) == MassRegion::DMinus);
  CHECK(classify_mass_pair({0.0, 0.0}, unit) == MassRegion::Neither);
  CHECK(std::string(mass_region_name(MassRegion::DPlus)) == "D+");

  // Every curve point except the origin lies strictly in D+ or D-.
  for (int i = 0; i < 500; ++i) {
    double s_up = 40.0 * kPi * i / 499.0;
    MassPair up = curve_mass_pair(s_up, unit, true);
    REQUIRE(classify_mass_pair(up, unit) == MassRegion::DMinus);
    double s_lo = 8.0 * kPi + 40.0 * kPi * i / 499.0;
    MassPair lo = curve_mass_pair(s_lo, unit, false);
    REQUIRE(classify_mass_pair(lo, unit) == MassRegion::DPlus);
  }
  CHECK(classify_mass_pair({0.0, 0.0}, unit) == MassRegion::Neither);
  CHECK_THROWS_AS(curve_mass_pair(-1.0, unit, true), std::invalid_argument);
  CHECK_THROWS_AS(curve_mass_pair(kPi, unit, false), std::domain_error);

  // Curve points satisfy the relation itself to rounding.
  MassPair q = curve_mass_pair(30.0, unit, true);
  CHECK(mass_relation_residual(q, unit) <= 1e-9);
}

TEST_CASE("residual vanishing error on manufactured profiles") {
  Grid g = build_grid(Domain::unit_disk(), 48);
  GreensEvaluator green = GreensEvaluator::analytic_disk();
  Vec2 x0{0.21, -0.13};
  Field v(g.count());
  for (int p = 0; p < g.count(); ++p) v[p] = 25.0 * green.G({g.xs[p], g.ys[p]}, x0);
  std::vector<Peak> peaks{{x0.x, x0.y, g.nearest_node(x0.x, x0.y), 1, 25.0}};

  CHECK(residual_vanishing_error(g, v, peaks, {25.0}, green, 0.05) <= 1e-12);
  CHECK(residual_vanishing_error(g, Field(g.count(), 0.0), peaks, {0.0}, green, 0.05) == 0.0);
  CHECK(residual_vanishing_error(g, v, peaks, {24.0}, green, 0.05) > 0.01);

  CHECK_THROWS_AS(residual_vanishing_error(g, v, {}, {}, green, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(residual_vanishing_error(g, v, peaks, {1.0, 2.0}, green, 0.05),
                  std::invalid_argument);
  CHECK_THROWS_AS(residual_vanishing_error(g, v, peaks, {25.0}, green, 0.0),
                  std::invalid_argument);
}

TEST_CASE("peak boundary distances") {
  Domain disk = Domain::unit_disk();
  std::vector<Peak> peaks{{0.0, 0.0, 0, 1, 5.0}};
  CHECK(boundary_distance(disk, peaks) == Catch::Approx(1.0));
  peaks.push_back({0.9, 0.0, 1, -1, 5.0});
  CHECK(boundary_distance(disk, peaks) == Catch::Approx(0.1).margin(1e-12));
  CHECK(std::isinf(boundary_distance(Domain::flat_torus(1.0, 1.0), peaks)));
  CHECK(std::isinf(boundary_distance(disk, {})));
}

TEST_CASE("interior ball identity on exact solutions") {
  MeanFieldProblem p{Variant::Neri, liouville_measure(), 4.0 * kPi};

  Grid g64 = build_grid(Domain::unit_disk(), 64);
  Grid g128 = build_grid(Domain::unit_disk(), 128);
  double d64 = pohozaev_residual(g64, p, liouville_field(g64, 1.0), 0.0, 0.0, 0.5);
  double d128 = pohozaev_residual(g128, p, liouville_field(g128, 1.0), 0.0, 0.0, 0.5);
  CHECK(d64 < 0.2);
  CHECK(d64 / d128 >= 1.8);

  // Constant solution of the symmetric problem: kinetic terms vanish and the
  // identity reduces to the ball-area defect.
  MeanFieldProblem sp{Variant::Neri, sinh_measure(), 6.0};
  Grid g = build_grid(Domain::unit_disk(), 64);
  CHECK(pohozaev_residual(g, sp, Field(g.count(), 0.0), 0.1, 0.0, 0.4) < 1e-2);

  CHECK_THROWS_AS(pohozaev_residual(g, sp, Field(g.count(), 0.0), 0.8, 0.0, 0.3),
                  std::invalid_argument);
}

TEST_CASE("exponential integrability bound") {
  constexpr double kSixteenPi = 50.26548245743669181540229;

  Grid rect = build_grid(Domain::rectangle(1.0, 1.0), 32);
  Field f = bump_field(rect, {0.5, 0.5, 1.0, 0.15});
  double l1 = 0.0;
  for (int q = 0; q < rect.count(); ++q) l1 += rect.w[q] * std::abs(f[q]);
  for (double& x : f) x /= l1;
  BrezisMerleReport rep = brezis_merle_check(rect, f, kPi);
  CHECK(rep.holds);
  CHECK(rep.f_l1 == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(rep.lhs > 0.0);

  Grid disk = build_grid(Domain::unit_disk(), 32);
  Field fd = bump_field(disk, {0.0, 0.0, 3.0, 0.2});
  BrezisMerleReport rd = brezis_merle_check(disk, fd, kPi);
  CHECK(rd.rhs == Catch::Approx(kSixteenPi).epsilon(1e-14));
  CHECK(rd.holds);

  // Randomized nonnegative sources on both Dirichlet domains.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const Grid* g : {&rect, &disk}) {
    for (int rep_i = 0; rep_i < 3; ++rep_i) {
      Field fr(g->count());
      for (double& x : fr) x = u(rng);
      for (double delta : {kPi / 2.0, kPi, 2.0 * kPi})
        REQUIRE(brezis_merle_check(*g, fr, delta).holds);
    }
  }

  CHECK_THROWS_AS(brezis_merle_check(rect, Field(rect.count(), 0.0), kPi),
                  std::invalid_argument);
  CHECK_THROWS_AS(brezis_merle_check(rect, f, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(brezis_merle_check(rect, f, 13.0), std::invalid_argument);
  Grid torus = build_grid(Domain::flat_torus(1.0, 1.0), 16);
  CHECK_THROWS_AS(brezis_merle_check(torus, Field(torus.count(), 1.0), kPi),
                  std::invalid_argument);
}

TEST_CASE("two-radius mass extrapolation") {
  // Exact concentrating family: recovery is exact.
  double M = 8.0 * kPi, k = 4.0;
  auto mass = [&](double r) { return M * k * r * r / (1.0 + k * r * r); };
  CHECK(limit_mass(mass(0.25), mass(0.35), 0.25, 0.35) == Catch::Approx(M).epsilon(1e-12));

  // Constant density scales like the area: no concentration, fall back.
  double c = 3.0;
  CHECK(limit_mass(c * 0.25 * 0.25, c * 0.35 * 0.35, 0.25, 0.35) ==
        Catch::Approx(c * 0.35 * 0.35));
  CHECK(limit_mass(0.0, 0.0, 0.25, 0.35) == 0.0);

  CHECK_THROWS_AS(limit_mass(1.0, 1.0, 0.35, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(limit_mass(-1.0, 1.0, 0.25, 0.35), std::invalid_argument);
}

TEST_CASE("full report on the concentrating branch") {
  Grid g = build_grid(Domain::unit_disk(), 64);
  MeanFieldProblem base{Variant::Neri, liouville_measure(), 0.0};
  std::vector<double> lambdas = {4.0 * kPi, 16.0 * kPi / 3.0, 6.0 * kPi, 48.0 * kPi / 7.0};
  ContinuationResult cr = continuation(g, base, lambdas, {});
  REQUIRE(cr.completed);

  GreensEvaluator green = GreensEvaluator::analytic_disk();
  BlowupOptions opt;
  opt.peak_threshold = 1.0;
  opt.rv_radius = 0.3;

  std::vector<BlowupReport> reps;
  for (const auto& step : cr.steps) {
    MeanFieldProblem p{Variant::Neri, liouville_measure(), step.lambda};
    reps.push_back(make_blowup_report(g, p, step.result.v, green, opt));
  }

  for (std::size_t i = 0; i < reps.size(); ++i) {
    const BlowupReport& r = reps[i];
    REQUIRE(r.peaks.size() == 1);
    CHECK(g.distance(r.peaks[0].peak.x, r.peaks[0].peak.y, 0.0, 0.0) <= 2.0 * g.h);
    CHECK(r.peaks[0].radius == Catch::Approx(0.25));      // 0.25 * boundary distance
    CHECK(r.peaks[0].alt_radius == Catch::Approx(0.35));
    CHECK(r.peaks[0].m_minus == 0.0);
    CHECK(r.min_boundary_distance == Catch::Approx(1.0).margin(2.0 * g.h));
    CHECK(r.denominator > 0.0);
    CHECK(r.pohozaev.size() == 2);
    for (double d : r.pohozaev) CHECK(d < 0.5);
    // mu = lambda/(8 pi - lambda); exact ball mass 8 pi mu r^2/(1 + mu r^2).
    double mu = r.lambda / (8.0 * kPi - r.lambda);
    double exact = 8.0 * kPi * mu * 0.0625 / (1.0 + 0.0625 * mu);
    CHECK(r.peaks[0].m_plus == Catch::Approx(exact).epsilon(0.02));
    CHECK(r.peaks[0].m_plus_limit == Catch::Approx(8.0 * kPi).epsilon(0.15));
    CHECK(r.peaks[0].region == "D+");
  }

  // Trend along the branch: ball mass increases toward 8 pi, and the
  // extrapolated-mass relation residual shrinks.
  for (std::size_t i = 1; i < reps.size(); ++i)
    CHECK(reps[i].peaks[0].m_plus > reps[i - 1].peaks[0].m_plus);
  BetaCoefficients unit{1.0, 0.0};
  double first = mass_relation_residual({reps.front().peaks[0].m_plus_limit, 0.0}, unit);
  double last = mass_relation_residual({reps.back().peaks[0].m_plus_limit, 0.0}, unit);
  CHECK(last < first);
  // The profile comparison error also shrinks as the peak concentrates.
  CHECK(reps.back().rv_sup_error < reps.front().rv_sup_error);
}

TEST_CASE("report on a torus field") {
  Grid g = build_grid(Domain::flat_torus(1.0, 1.0), 32);
  Field v = bump_field(g, {0.5, 0.5, 7.0, 0.12});
  double mean = integrate(g, v) / g.domain.area();
  for (double& x : v) x -= mean;
  MeanFieldProblem p{Variant::TorusNeri, sinh_measure(), 40.0};

  GreensEvaluator green = GreensEvaluator::fourier_torus(g.domain, 15);
  BlowupOptions opt;
  opt.peak_threshold = 5.0;
  opt.rv_radius = 0.2;
  opt.pohozaev_radii = {0.2};
  BlowupReport rep = make_blowup_report(g, p, v, green, opt);
  REQUIRE(rep.peaks.size() == 1);
  CHECK(std::isinf(rep.min_boundary_distance));
  CHECK(rep.peaks[0].radius == Catch::Approx(0.2));  // capped by the period
  CHECK(rep.peaks[0].m_plus > rep.peaks[0].m_minus);
  CHECK(rep.rv_sup_error > 0.0);
  REQUIRE(rep.pohozaev_radii.size() == 1);
}
