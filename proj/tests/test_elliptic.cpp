#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "glpin/bessel.hpp"
#include "glpin/elliptic.hpp"
#include "glpin/error.hpp"

using namespace glpin;

namespace {

PerforatedDomain unit_disk(std::vector<Point> holes, double delta) {
  return PerforatedDomain{Disk{{0.0, 0.0}, 1.0}, std::move(holes), delta};
}

double xi0_origin_error(double h) {
  const auto domain = unit_disk({}, 0.05);
  const GridPtr g = make_grid(domain, h);
  const ScalarField xi = solve_xi0(domain, g);
  return std::abs(xi[g->nearest_node({0, 0})] - 1.0 / bessel_i0(1.0));
}

}  // namespace

TEST_CASE("constant solution is reproduced exactly") {
  const GridPtr g = make_grid(unit_disk({{0.2, 0.1}}, 0.1), 0.025);
  const ScalarField one(g, 1.0);
  const double hole_bc[] = {1.0};
  const auto sys = assemble_screened(g, one, [](Point) { return 1.0; }, hole_bc);
  const auto res = solve_cg(sys, 1e-14, 10000);
  for (int n = 0; n < g->node_count(); ++n)
    if (!g->is_exterior(n)) CHECK(res.field[n] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("operator is symmetric with positive diagonal") {
  const GridPtr g = make_grid(unit_disk({{0.2, 0.1}}, 0.1), 0.025);
  const double hole_bc[] = {0.0};
  const auto sys = assemble_screened(g, ScalarField(g), {}, hole_bc);
  const CsrMatrix& a = sys.matrix;
  for (int r = 0; r < a.rows; ++r) {
    CHECK(a.entry(r, r) > 0.0);
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) CHECK(a.val[k] == a.entry(a.col[k], r));
  }
}

TEST_CASE("xi0 on the unit disk against the Bessel solution") {
  const auto domain = unit_disk({}, 0.05);
  const GridPtr g = make_grid(domain, 0.01);
  const ScalarField xi = solve_xi0(domain, g);
  CHECK(std::abs(xi[g->nearest_node({0, 0})] - 0.789847) < 2e-3);
  CHECK(std::abs(xi.interpolate({0.5, 0.0}) - bessel_i0(0.5) / bessel_i0(1.0)) < 2e-3);
  CHECK(bessel_i0(0.5) / bessel_i0(1.0) == doctest::Approx(0.840).epsilon(1e-3));
  for (int n = 0; n < g->node_count(); ++n) {
    if (g->kind(n) == NodeKind::DirichletOuter) CHECK(xi[n] == 1.0);
    if (g->kind(n) == NodeKind::Interior) {
      CHECK(xi[n] > 0.0);
      CHECK(xi[n] < 1.0);
    }
  }
}

TEST_CASE("xi0 ignores holes") {
  const auto domain = unit_disk({{0.0, 0.0}}, 0.1);
  const GridPtr g = make_grid(domain, 0.02);
  const ScalarField xi = solve_xi0(domain, g);
  CHECK(std::abs(xi.interpolate({0, 0}) - 1.0 / bessel_i0(1.0)) < 5e-3);
}

TEST_CASE("xi0 grid convergence") {
  const double e1 = xi0_origin_error(0.02), e2 = xi0_origin_error(0.01), e3 = xi0_origin_error(0.005);
  MESSAGE("errors " << e1 << " " << e2 << " " << e3);
  CHECK(std::log2(e1 / e2) >= 1.5);
  CHECK(std::log2(e2 / e3) >= 1.5);
  CHECK(e3 <= 2e-3);
}

TEST_CASE("pcg on a 3x3 system") {
  CsrBuilder b;
  const double a[3][3] = {{4, 1, 0}, {1, 3, -1}, {0, -1, 5}};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c)
      if (a[r][c] != 0.0) b.add(c, a[r][c]);
    b.end_row();
  }
  const CsrMatrix m = b.finish();
  const double rhs[] = {1, 2, 3};
  // Oracle: Cramer's rule.
  auto det = [](const double (&q)[3][3]) {
    return q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0]) +
           q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
  };
  const double d = det(a);
  std::vector<double> x(3, 0.0);
  pcg(m, rhs, x, 1e-15, 100);
  for (int c = 0; c < 3; ++c) {
    double q[3][3];
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) q[r][k] = k == c ? rhs[r] : a[r][k];
    CHECK(std::abs(x[c] - det(q) / d) < 1e-12);
  }
}

TEST_CASE("solver convergence and forced failure") {
  const auto domain = unit_disk({}, 0.05);
  const GridPtr g = make_grid(domain, 0.02);
  const auto sys = assemble_screened(g, ScalarField(g), [](Point) { return 1.0; }, {});
  const auto res = solve_cg(sys, 1e-10, 5000);
  CHECK(res.stats.residual <= 1e-10);
  try {
    solve_cg(sys, 1e-10, 1);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
  }
}

TEST_CASE("basis fields obey the maximum principle") {
  const auto domain = unit_disk({{0.3, 0.2}, {-0.35, -0.1}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  const ScalarField z0 = solve_basis_zeta(domain, g, 0);
  for (int n = 0; n < g->node_count(); ++n) {
    CHECK(z0[n] >= 0.0);
    CHECK(z0[n] <= 1.0);
  }
  for (int n : g->hole_ring(0)) CHECK(z0[n] == 1.0);
  for (int n : g->hole_ring(1)) CHECK(z0[n] == 0.0);
  CHECK_THROWS_AS(solve_basis_zeta(domain, g, 2), Error);
}

TEST_CASE("central-hole basis field against the radial solution") {
  const double delta = 0.05, h = 0.0125;
  const auto domain = unit_disk({{0, 0}}, delta);
  const GridPtr g = make_grid(domain, h);
  const ScalarField z = solve_basis_zeta(domain, g, 0);
  const RadialProfile oracle = solve_radial(delta, 1.0, RadialEquation::Screened, 1.0, 0.0);
  double worst = 0.0;
  for (int k = 0; k < g->unknown_count(); ++k) {
    const int n = g->node_of_unknown(k);
    const double r = distance(g->position(n), {0, 0});
    worst = std::max(worst, std::abs(z[n] - oracle.value(r)));
  }
  MESSAGE("max deviation " << worst);
  CHECK(worst < h);

  // Sandwich between the radial sub- and supersolutions.
  const double r_min = 0.5, r_max = 1.0;
  for (int k = 0; k < g->unknown_count(); ++k) {
    const int n = g->node_of_unknown(k);
    const double r = distance(g->position(n), {0, 0});
    const double upper = bessel_k0(std::max(r - 2 * h, delta) / r_max) / bessel_k0(delta / r_max);
    CHECK(z[n] <= upper + 1e-12);
    if (r + 2 * h < r_min) {
      const double lower = bessel_k0((r + 2 * h) / r_min) / bessel_k0(delta / r_min);
      CHECK(z[n] >= lower - 1e-12);
    }
  }
}

TEST_CASE("fluxes") {
  SUBCASE("constant field has no flux") {
    const GridPtr g = make_grid(unit_disk({{0.1, 0.0}}, 0.1), 0.025);
    const ScalarField c(g, 3.0);
    CHECK(std::abs(boundary_flux(c, 0)) < 1e-10);
    CHECK(std::abs(outer_flux(c)) < 1e-10);
  }
  SUBCASE("flux identity") {
    const auto domain = unit_disk({{0.3, 0.2}, {-0.35, -0.1}}, 0.08);
    const GridPtr g = make_grid(domain, 0.02);
    ScalarField f(g);
    for (int n = 0; n < g->node_count(); ++n) f[n] = std::sin(3 * g->position(n).x) + g->position(n).y;
    const double hole_bc[] = {0.7, -0.4};
    const BoundaryFunction bc = [](Point p) { return p.x * p.y; };
    const auto u = solve_cg(assemble_screened(g, f, bc, hole_bc), 1e-13, 100000).field;
    double volume = 0.0;
    for (int k = 0; k < g->unknown_count(); ++k) {
      const int n = g->node_of_unknown(k);
      volume += g->spacing() * g->spacing() * (u[n] - f[n]);
    }
    const double total = boundary_flux(u, 0) + boundary_flux(u, 1) + outer_flux(u, bc);
    CHECK(std::abs(total - volume) < 1e-9);
  }
  SUBCASE("hole flux against the radial derivative") {
    const double delta = 0.05;
    const auto domain = unit_disk({{0, 0}}, delta);
    const GridPtr g = make_grid(domain, delta / 8);
    const ScalarField z = solve_basis_zeta(domain, g, 0);
    const RadialProfile oracle = solve_radial(delta, 1.0, RadialEquation::Screened, 1.0, 0.0);
    const double expected = -2 * std::numbers::pi * delta * oracle.inner_derivative();
    MESSAGE("flux " << boundary_flux(z, 0) << " oracle " << expected);
    CHECK(std::abs(boundary_flux(z, 0) / expected - 1.0) < 0.1);
  }
}

TEST_CASE("inner products") {
  const auto domain = unit_disk({{0.2, 0.0}}, 0.1);
  const GridPtr g = make_grid(domain, 0.01);
  const ScalarField one(g, 1.0);
  CHECK(std::abs(l2_inner(one, one, Region::Full) - std::numbers::pi) < 0.05);
  CHECK(std::abs(l2_inner(one, one) - std::numbers::pi * (1 - 0.01)) < 0.05);
  ScalarField a(g), b(g);
  for (int n = 0; n < g->node_count(); ++n) {
    if (g->is_exterior(n)) continue;
    const Point p = g->position(n);
    a[n] = std::cos(p.x) * p.y;
    b[n] = p.x * p.x - p.y;
  }
  CHECK(h1_inner(a, b) == h1_inner(b, a));
  CHECK(l2_inner(a, b) == l2_inner(b, a));

  // H1 norm of xi0 equals the boundary integral of xi0 * dxi0/dr = 2 pi I1(1)/I0(1).
  const auto plain = unit_disk({}, 0.05);
  const GridPtr gp = make_grid(plain, 0.005);
  const ScalarField xi = solve_xi0(plain, gp);
  const double target = 2 * std::numbers::pi * bessel_i1(1.0) / bessel_i0(1.0);
  CHECK(std::abs(h1_inner(xi, xi, Region::Full) / target - 1.0) < 0.03);

  const GridPtr other = make_grid(domain, 0.02);
  CHECK_THROWS_AS(l2_inner(one, ScalarField(other, 1.0)), Error);
}

TEST_CASE("radial solver") {
  SUBCASE("screened annulus matches the Bessel combination") {
    const double d = 0.05;
    const RadialProfile p = solve_radial(d, 1.0, RadialEquation::Screened, 1.0, 0.0);
    // u = C1 I0 + C2 K0 with u(d) = 1, u(1) = 0.
    const double det = bessel_i0(d) * bessel_k0(1.0) - bessel_k0(d) * bessel_i0(1.0);
    const double c1 = bessel_k0(1.0) / det, c2 = -bessel_i0(1.0) / det;
    double worst = 0.0;
    for (double r = d; r <= 1.0; r += 0.0137) worst = std::max(worst, std::abs(p.value(r) - (c1 * bessel_i0(r) + c2 * bessel_k0(r))));
    CHECK(worst < 1e-8);
    const double exact_slope = c1 * bessel_i1(d) - c2 * bessel_k1(d);
    CHECK(std::abs(p.inner_derivative() / exact_slope - 1.0) < 1e-6);
  }
  SUBCASE("harmonic annulus") {
    const RadialProfile p = solve_radial(0.1, 1.0, RadialEquation::Poisson, 1.0, 0.0);
    for (double r = 0.1; r <= 1.0; r += 0.05) CHECK(std::abs(p.value(r) - std::log(r) / std::log(0.1)) < 1e-8);
  }
  SUBCASE("constant solution with unit source") {
    const RadialProfile p = solve_radial(0.05, 1.0, RadialEquation::Screened, 1.0, 1.0, [](double) { return 1.0; });
    double worst = 0.0;
    for (double u : p.u()) worst = std::max(worst, std::abs(u - 1.0));
    MESSAGE("constant deviation " << worst);
    CHECK(worst < 1e-12);
  }
  SUBCASE("full disk") {
    const RadialProfile p = solve_radial(0.0, 1.0, RadialEquation::Screened, 0.0, 1.0);
    CHECK(std::abs(p.value(0.0) - 1.0 / bessel_i0(1.0)) < 1e-7);
    CHECK(std::abs(p.value(0.5) - bessel_i0(0.5) / bessel_i0(1.0)) < 1e-7);
  }
  SUBCASE("invalid interval") {
    CHECK_THROWS_AS(solve_radial(1.0, 0.5, RadialEquation::Screened, 0, 0), Error);
  }
}

TEST_CASE("field csv dump") {
  const GridPtr g = make_grid(unit_disk({}, 0.05), 0.5);
  std::ostringstream os;
  write_field_csv(os, ScalarField(g, 2.0));
  CHECK(os.str().rfind("x,y,value\n", 0) == 0);
}
