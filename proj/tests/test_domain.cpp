#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <stdexcept>

#include "vmf/domain.hpp"

using namespace vmf;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("domain factories, areas and boundary distances") {
  Domain r = Domain::rectangle(2.0, 1.0);
  CHECK(r.area() == Catch::Approx(2.0));
  CHECK(r.diameter() == Catch::Approx(std::sqrt(5.0)));
  CHECK(boundary_distance(r, 0.3, 0.4) == Catch::Approx(0.3));
  CHECK(boundary_distance(r, 1.9, 0.5) == Catch::Approx(0.1));

  Domain d = Domain::unit_disk();
  CHECK(d.area() == Catch::Approx(kPi));
  CHECK(d.diameter() == 2.0);
  CHECK(boundary_distance(d, 0.6, 0.0) == Catch::Approx(0.4));

  Domain t = Domain::flat_torus(1.0, 1.5);
  CHECK(t.area() == Catch::Approx(1.5));
  CHECK(std::isinf(boundary_distance(t, 0.2, 0.2)));

  CHECK_THROWS_AS(Domain::rectangle(-1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(Domain::flat_torus(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(Domain::unit_disk(), 3), std::invalid_argument);
}

TEST_CASE("rectangle grid tiles the area and owns interior nodes only") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 8);
  CHECK(g.h == Catch::Approx(0.125));
  CHECK(g.count() == 49);  // (8-1)^2 interior nodes
  double wsum = 0.0;
  for (double w : g.w) wsum += w;
  CHECK(wsum == Catch::Approx(1.0).epsilon(1e-13));
  for (int p = 0; p < g.count(); ++p) {
    CHECK(g.xs[p] > 0.0);
    CHECK(g.xs[p] < 1.0);
    CHECK(g.ys[p] > 0.0);
    CHECK(g.ys[p] < 1.0);
  }
  CHECK(g.nearest_node(0.26, 0.51) >= 0);
  int p = g.nearest_node(0.26, 0.51);
  CHECK(g.xs[p] == Catch::Approx(0.25));
  CHECK(g.ys[p] == Catch::Approx(0.5));
}

TEST_CASE("five-point stencil is exact on products of quadratics") {
  // u = x(1-x) y(1-y) vanishes on the boundary and has biquadratic form, so
  // both the stencil and the Dirichlet closure are exact.
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 16);
  Field u(g.count());
  for (int p = 0; p < g.count(); ++p)
    u[p] = g.xs[p] * (1.0 - g.xs[p]) * g.ys[p] * (1.0 - g.ys[p]);
  Field lap = laplacian_apply(g, u);
  for (int p = 0; p < g.count(); ++p) {
    double exact = -2.0 * (g.ys[p] * (1.0 - g.ys[p]) + g.xs[p] * (1.0 - g.xs[p]));
    REQUIRE(lap[p] == Catch::Approx(exact).margin(1e-12));
  }
}

TEST_CASE("rectangle Poisson solve reproduces the exact discrete solution") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 24);
  Field f(g.count());
  for (int p = 0; p < g.count(); ++p)
    f[p] = 2.0 * (g.ys[p] * (1.0 - g.ys[p]) + g.xs[p] * (1.0 - g.xs[p]));
  Field u = poisson_solve(g, f);
  double err = 0.0;
  for (int p = 0; p < g.count(); ++p) {
    double exact = g.xs[p] * (1.0 - g.xs[p]) * g.ys[p] * (1.0 - g.ys[p]);
    err = std::max(err, std::abs(u[p] - exact));
  }
  CHECK(err < 1e-9);
}

TEST_CASE("disk grid node count, weights and geometry") {
  Grid g = build_grid(Domain::unit_disk(), 64);
  CHECK(g.h == Catch::Approx(2.0 / 64));
  double expected = kPi / (g.h * g.h);
  CHECK(std::abs(g.count() - expected) < 4.0 / g.h);  // perimeter-order deviation
  double wsum = 0.0, wmin = 1.0;
  for (double w : g.w) {
    wsum += w;
    wmin = std::min(wmin, w);
  }
  CHECK(wsum == Catch::Approx(kPi).margin(0.02));
  CHECK(wmin >= 0.0);
  for (int p = 0; p < g.count(); ++p)
    REQUIRE(g.xs[p] * g.xs[p] + g.ys[p] * g.ys[p] < 1.0);
  // Quadrature refines with the grid.
  Grid g2 = build_grid(Domain::unit_disk(), 128);
  double wsum2 = 0.0;
  for (double w : g2.w) wsum2 += w;
  CHECK(std::abs(wsum2 - kPi) < std::abs(wsum - kPi) + 1e-6);
}

TEST_CASE("cut-cell stencil is exact on the paraboloid vanishing at the circle") {
  Grid g = build_grid(Domain::unit_disk(), 48);
  Field u(g.count());
  for (int p = 0; p < g.count(); ++p)
    u[p] = 1.0 - g.xs[p] * g.xs[p] - g.ys[p] * g.ys[p];
  Field lap = laplacian_apply(g, u);
  double err = 0.0;
  for (int p = 0; p < g.count(); ++p) err = std::max(err, std::abs(lap[p] + 4.0));
  CHECK(err < 1e-6);  // roundoff amplified by short cut arms only
}

TEST_CASE("disk Poisson solve recovers the paraboloid") {
  Grid g = build_grid(Domain::unit_disk(), 48);
  Field f(g.count(), 4.0);
  Field u = poisson_solve(g, f);
  double err = 0.0;
  for (int p = 0; p < g.count(); ++p) {
    double exact = 1.0 - g.xs[p] * g.xs[p] - g.ys[p] * g.ys[p];
    err = std::max(err, std::abs(u[p] - exact));
  }
  CHECK(err < 1e-8);
}

TEST_CASE("matrix form agrees with the matrix-free Laplacian") {
  Grid g = build_grid(Domain::unit_disk(), 24);
  Field u(g.count());
  for (int p = 0; p < g.count(); ++p)
    u[p] = std::sin(1.3 * g.xs[p] + 0.4) * std::cos(0.7 * g.ys[p]);
  Field lap = laplacian_apply(g, u);
  Eigen::SparseMatrix<double> A = neg_laplacian_matrix(g);
  Eigen::VectorXd uv = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
  Eigen::VectorXd Au = A * uv;
  for (int p = 0; p < g.count(); ++p)
    REQUIRE(Au[p] == Catch::Approx(-lap[p]).margin(1e-9 * (1.0 + std::abs(lap[p]))));

  // Uniform-arm grids are already symmetric; the cut-cell grid is not.
  Grid gr = build_grid(Domain::rectangle(1.0, 1.0), 12);
  Eigen::SparseMatrix<double> Ar = neg_laplacian_matrix(gr);
  Eigen::SparseMatrix<double> Art = Ar.transpose();
  Eigen::SparseMatrix<double> Dr = Art - Ar;
  CHECK(Dr.norm() < 1e-12);
  Eigen::SparseMatrix<double> S = neg_laplacian_matrix_symmetrized(g);
  Eigen::SparseMatrix<double> St = S.transpose();
  Eigen::SparseMatrix<double> Ds = St - S;
  CHECK(Ds.norm() < 1e-12);
}

TEST_CASE("torus grid wraps, tiles exactly and rejects incommensurate periods") {
  Grid g = build_grid(Domain::flat_torus(1.0, 0.5), 16);
  CHECK(g.h == Catch::Approx(1.0 / 16));
  CHECK(g.count() == 16 * 8);
  double wsum = 0.0;
  for (double w : g.w) wsum += w;
  CHECK(wsum == Catch::Approx(0.5).epsilon(1e-13));
  // Every node has four neighbors; the seam wraps.
  for (int p = 0; p < g.count(); ++p)
    for (int d = 0; d < 4; ++d) REQUIRE(g.st[p].nb[d] >= 0);
  int left = g.node_of_site(0, 3);
  int right = g.node_of_site(15, 3);
  CHECK(g.st[left].nb[1] == right);
  CHECK(g.distance(0.99, 0.1, 0.01, 0.1) == Catch::Approx(0.02));
  CHECK_THROWS_AS(build_grid(Domain::flat_torus(1.0, 0.33), 16), std::invalid_argument);
}

TEST_CASE("torus Poisson solve matches the plane-wave eigenpair") {
  Grid g = build_grid(Domain::flat_torus(1.0, 1.0), 32);
  Field f(g.count());
  for (int p = 0; p < g.count(); ++p) f[p] = std::cos(2.0 * kPi * g.xs[p]);
  double lam_h = (2.0 - 2.0 * std::cos(2.0 * kPi * g.h)) / (g.h * g.h);
  Field u = poisson_solve(g, f, true);
  double err = 0.0;
  for (int p = 0; p < g.count(); ++p) err = std::max(err, std::abs(u[p] - f[p] / lam_h));
  CHECK(err < 1e-9);
  CHECK(std::abs(integrate(g, u)) < 1e-10);
  CHECK(lam_h == Catch::Approx(4.0 * kPi * kPi).epsilon(0.01));

  CHECK_THROWS_AS(poisson_solve(g, f, false), std::invalid_argument);
  Field bad(g.count(), 1.0);
  CHECK_THROWS_AS(poisson_solve(g, bad, true), std::invalid_argument);
}

TEST_CASE("node gradients are exact for quadratics away from the boundary") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 10);
  Field u(g.count());
  for (int p = 0; p < g.count(); ++p) u[p] = g.xs[p] * g.xs[p] + 3.0 * g.ys[p];
  Field gx, gy;
  node_gradient(g, u, gx, gy);
  for (int p = 0; p < g.count(); ++p) {
    if (g.xs[p] < 0.15 || g.xs[p] > 0.85 || g.ys[p] < 0.15 || g.ys[p] > 0.85) continue;
    REQUIRE(gx[p] == Catch::Approx(2.0 * g.xs[p]).margin(1e-12));
    REQUIRE(gy[p] == Catch::Approx(3.0).margin(1e-12));
  }
}

TEST_CASE("bilinear interpolation is exact on affine data and wraps on the torus") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 16);
  Field u(g.count());
  for (int p = 0; p < g.count(); ++p) u[p] = 2.0 * g.xs[p] - 3.0 * g.ys[p] + 0.5;
  CHECK(bilinear_value(g, u, 0.37, 0.41) ==
        Catch::Approx(2.0 * 0.37 - 3.0 * 0.41 + 0.5).epsilon(1e-13));

  Grid gt = build_grid(Domain::flat_torus(1.0, 1.0), 16);
  Field v(gt.count());
  for (int p = 0; p < gt.count(); ++p) v[p] = std::sin(2.0 * kPi * gt.xs[p]);
  // Midpoint of the seam cell: average of the last column and the wrapped first.
  double h = gt.h;
  int last = gt.node_of_site(15, 4);
  int first = gt.node_of_site(0, 4);
  double expect = 0.5 * (v[last] + v[first]);
  CHECK(bilinear_value(gt, v, 1.0 - 0.5 * h, 4 * h) == Catch::Approx(expect).epsilon(1e-13));
}

TEST_CASE("ball weights integrate indicator functions") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 64);
  auto wb = ball_weights(g, 0.5, 0.5, 0.2);
  double s = 0.0;
  for (int p = 0; p < g.count(); ++p) {
    s += wb[p];
    REQUIRE(wb[p] <= g.w[p] + 1e-15);
  }
  CHECK(s == Catch::Approx(kPi * 0.04).margin(5e-4));

  Grid gd = build_grid(Domain::unit_disk(), 64);
  auto wd = ball_weights(gd, 0.3, 0.0, 0.25);
  double sd = 0.0;
  for (double w : wd) sd += w;
  CHECK(sd == Catch::Approx(kPi * 0.0625).margin(5e-4));

  // Ball hanging over the torus seam keeps its full area.
  Grid gt = build_grid(Domain::flat_torus(1.0, 1.0), 64);
  auto wt = ball_weights(gt, 0.02, 0.5, 0.2);
  double st = 0.0;
  for (double w : wt) st += w;
  CHECK(st == Catch::Approx(kPi * 0.04).margin(5e-4));
}

TEST_CASE("nearest node respects periodic wrap") {
  Grid gt = build_grid(Domain::flat_torus(1.0, 1.0), 32);
  int p = gt.nearest_node(0.999, 0.001);
  CHECK(gt.xs[p] == 0.0);
  CHECK(gt.ys[p] == 0.0);
}

TEST_CASE("size mismatches are rejected") {
  Grid g = build_grid(Domain::rectangle(1.0, 1.0), 8);
  Field bad(g.count() + 1, 0.0);
  CHECK_THROWS_AS(laplacian_apply(g, bad), std::invalid_argument);
  CHECK_THROWS_AS(integrate(g, bad), std::invalid_argument);
  CHECK_THROWS_AS(poisson_solve(g, bad), std::invalid_argument);
}
