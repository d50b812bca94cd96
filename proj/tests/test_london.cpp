#include <cmath>
#include <numbers>

#include "doctest.h"
#include "glpin/bessel.hpp"
#include "glpin/error.hpp"
#include "glpin/london.hpp"

using namespace glpin;

namespace {

constexpr double kPi = std::numbers::pi;

PerforatedDomain unit_disk(std::vector<Point> holes, double delta) {
  return PerforatedDomain{Disk{{0.0, 0.0}, 1.0}, std::move(holes), delta};
}

// Closed form for a central hole with h_ext = 0 and degree D: h = H u(r) with
// u = c1 I0 + c2 K0, u(delta) = 1, u(1) = 0, and the flux condition
// -2 pi delta H u'(delta) = 2 pi D - H pi delta^2.
struct CentralHoleOracle {
  double c1, c2, H;
  CentralHoleOracle(double delta, int D) {
    const double det = bessel_i0(delta) * bessel_k0(1.0) - bessel_k0(delta) * bessel_i0(1.0);
    c1 = bessel_k0(1.0) / det;
    c2 = -bessel_i0(1.0) / det;
    const double slope = c1 * bessel_i1(delta) - c2 * bessel_k1(delta);
    H = 2 * kPi * D / (-2 * kPi * delta * slope + kPi * delta * delta);
  }
  double field(double r) const { return H * (c1 * bessel_i0(r) + c2 * bessel_k0(r)); }
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::DomainError;
}

}  // namespace

TEST_CASE("zero data gives a zero field") {
  const auto domain = unit_disk({{0.2, 0.1}, {-0.3, -0.2}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  const LondonSolution sol = solve_london(domain, g, 0.0, std::vector<int>{0, 0});
  CHECK(sol.h.max_abs() == 0.0);
  CHECK(sol.H[0] == 0.0);
  CHECK(london_energy(sol).total == 0.0);
}

TEST_CASE("central hole against the Bessel closed form") {
  const double delta = 0.05;
  const auto domain = unit_disk({{0, 0}}, delta);
  const GridPtr g = make_grid(domain, delta / 4);
  const LondonSolution sol = solve_london(domain, g, 0.0, std::vector<int>{1});
  const CentralHoleOracle oracle(delta, 1);
  MESSAGE("H = " << sol.H[0] << " oracle " << oracle.H);
  CHECK(std::abs(sol.H[0] / oracle.H - 1.0) < 1e-2);
  double worst = 0.0;
  for (int k = 0; k < g->unknown_count(); ++k) {
    const int n = g->node_of_unknown(k);
    worst = std::max(worst, std::abs(sol.h[n] - oracle.field(distance(g->position(n), {0, 0}))));
  }
  MESSAGE("max field deviation " << worst);
  CHECK(worst < oracle.H * g->spacing());

  // Energy of the S^1 minimiser reduces to pi H by Green's formula.
  const EnergyBreakdown e = london_energy(sol);
  MESSAGE("energy " << e.total << " closed form " << kPi * oracle.H);
  CHECK(std::abs(e.total / (kPi * oracle.H) - 1.0) < 1e-2);
  CHECK(std::abs(e.total / (kPi * std::abs(std::log(delta))) - 1.0) < 0.1);
  CHECK(e.total == doctest::Approx(e.gradient_term + e.field_term));
  CHECK(e.gradient_term > 0.0);
  CHECK(e.field_term > 0.0);
}

TEST_CASE("flux constraints and the Dirichlet cross-check") {
  const auto domain = unit_disk({{0.3, 0.2}, {-0.35, -0.1}, {0.0, -0.5}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  const double h_ext = 2.0 * std::abs(std::log(domain.delta));
  const LondonBasis basis(domain, g, h_ext);
  const std::vector<int> D{1, -2, 3};
  const LondonSolution sol = basis.solve(D);
  for (int j = 0; j < 3; ++j) {
    const double lhs = boundary_flux(sol.h, j);
    const double rhs = 2 * kPi * D[j] - sol.H[j] * kPi * domain.delta * domain.delta;
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, 2 * kPi * std::abs(D[j])));
  }
  for (int n = 0; n < g->node_count(); ++n) {
    if (g->kind(n) == NodeKind::DirichletOuter) CHECK(sol.h[n] == doctest::Approx(h_ext));
    if (g->kind(n) == NodeKind::HoleInterior) CHECK(sol.h[n] == doctest::Approx(sol.H[g->label(n).hole]));
  }
  // Independent route: one Dirichlet solve with the recovered hole constants.
  const auto direct =
      solve_cg(assemble_screened(g, ScalarField(g), [h_ext](Point) { return h_ext; }, sol.H), 1e-13, 200000).field;
  double worst = 0.0;
  for (int n = 0; n < g->node_count(); ++n) worst = std::max(worst, std::abs(direct[n] - sol.h[n]));
  CHECK(worst < 1e-8 * h_ext);
  CHECK(basis.flux_condition() < 1e12);
}

TEST_CASE("quadratic form reproduces direct energies") {
  const auto domain = unit_disk({{0.3, 0.2}, {-0.35, -0.1}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  const double h_ext = 3.0 * std::abs(std::log(domain.delta));
  const LondonBasis basis(domain, g, h_ext);
  const QuadraticEnergyForm form = energy_quadratic_form(basis);
  CHECK(form.Q(0, 1) == form.Q(1, 0));
  CHECK(form.Q.ldlt().isPositive());

  for (const std::vector<int>& D : {std::vector<int>{2, 0}, {1, 3}, {-1, 2}}) {
    const double direct = london_energy(solve_london(domain, g, h_ext, D)).total;
    CHECK(std::abs(form.evaluate(std::span<const int>(D)) / direct - 1.0) < 1e-8);
  }
  // Third differences vanish along each axis and across.
  auto l = [&](double a, double b) { return basis.energy(std::vector<double>{a, b}).total; };
  const double third = l(3, 0) - 3 * l(2, 0) + 3 * l(1, 0) - l(0, 0);
  CHECK(std::abs(third) < 1e-8 * std::abs(l(3, 0)));
  const double mixed = l(2, 1) - 2 * l(1, 1) + l(0, 1) - (l(2, 0) - 2 * l(1, 0) + l(0, 0));
  CHECK(std::abs(mixed) < 1e-8 * std::abs(l(2, 1)));

  QuadraticEnergyForm shifted = form;
  shifted.c += 123.0;
  CHECK(minimize_degrees(shifted).D == minimize_degrees(form).D);
}

TEST_CASE("well separated holes barely interact") {
  const auto domain = unit_disk({{-0.5, 0.0}, {0.5, 0.0}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  const QuadraticEnergyForm form = energy_quadratic_form(domain, g, 1.0);
  MESSAGE("Q = " << form.Q);
  CHECK(std::abs(form.Q(0, 1)) < 0.2 * form.Q(0, 0));
  CHECK(std::abs(form.Q(0, 1)) < 0.2 * form.Q(1, 1));
}

TEST_CASE("integer minimisation") {
  SUBCASE("one hole") {
    QuadraticEnergyForm f;
    f.Q = Eigen::MatrixXd::Constant(1, 1, 2 * kPi * 3);
    f.b = Eigen::VectorXd::Constant(1, -2 * kPi * 3 * 2.3);
    const DegreeMinimum m = minimize_degrees(f);
    CHECK(m.D == DegreeVector{2});
    CHECK(m.is_unique);
  }
  SUBCASE("tie at a half-integer vertex") {
    QuadraticEnergyForm f;
    f.Q = Eigen::MatrixXd::Constant(1, 1, 2.0);
    f.b = Eigen::VectorXd::Constant(1, -3.0);
    CHECK_FALSE(minimize_degrees(f).is_unique);
  }
  SUBCASE("separable rounding") {
    QuadraticEnergyForm f;
    f.Q = Eigen::Vector2d(4.0, 7.0).asDiagonal();
    f.b = -(f.Q * Eigen::Vector2d(0.4, 2.6));
    CHECK(minimize_degrees(f).D == DegreeVector{0, 3});
  }
  SUBCASE("box too small along a valley") {
    QuadraticEnergyForm f;
    f.Q.resize(2, 2);
    f.Q << 1.0, 0.999, 0.999, 1.0;
    f.b = -(f.Q * Eigen::Vector2d(3.3, -3.6));
    CHECK(code_of([&] { minimize_degrees(f, 1); }) == ErrorCode::BoxTooSmall);
    CHECK(minimize_degrees(f, 2).D == DegreeVector{3, -3});
  }
}

TEST_CASE("predicted degrees and thresholds") {
  const auto domain = unit_disk({{0, 0}}, 0.05);
  const GridPtr g = make_grid(domain, 0.005);
  const ScalarField xi0 = solve_xi0(domain, g);
  CHECK(predicted_degrees(xi0, domain, 10.0) == DegreeVector{2});
  CHECK(predicted_degrees(xi0, domain, 0.0) == DegreeVector{0});
  const double s = 1.0 - xi0.interpolate({0, 0});
  try {
    predicted_degrees(xi0, domain, 0.5 / s);
    FAIL("expected AtThreshold");
  } catch (const HoleError& e) {
    CHECK(e.code() == ErrorCode::AtThreshold);
    CHECK(e.hole() == 0);
  }
  CHECK(0.5 / s == doctest::Approx(0.5 / (1 - 1 / bessel_i0(1.0))).epsilon(1e-4));

  const auto t = threshold_set(xi0, domain, 13.0);
  REQUIRE(t.size() == 3);
  CHECK(t[0].sigma == doctest::Approx(2.379).epsilon(1e-3));
  CHECK(t[1].sigma == doctest::Approx(7.136).epsilon(1e-3));
  CHECK(t[2].sigma == doctest::Approx(11.89).epsilon(1e-3));
  CHECK(threshold_set(xi0, domain, 2.0).empty());

  const auto sym = unit_disk({{-0.4, 0.0}, {0.4, 0.0}}, 0.05);
  const GridPtr gs = make_grid(sym, 0.0125);
  const auto ts = threshold_set(solve_xi0(sym, gs), sym, 6.0);
  REQUIRE(ts.size() >= 2);
  CHECK(ts[0].sigma == doctest::Approx(ts[1].sigma).epsilon(1e-9));
  CHECK(ts[0].hole != ts[1].hole);
}

TEST_CASE("truncated Bessel ansatz") {
  const auto domain = unit_disk({{0.1, 0.0}}, 0.05);
  const GridPtr g = make_grid(domain, 0.0125);
  CHECK(h2_ansatz(domain, g, std::vector<int>{0}).max_abs() == 0.0);
  const ScalarField h2 = h2_ansatz(domain, g, std::vector<int>{2});
  for (int n : g->hole_ring(0)) CHECK(h2[n] == doctest::Approx(2 * bessel_k0(0.05)).epsilon(1e-14));
  CHECK(h2[g->nearest_node({-0.7, 0.0})] == 0.0);

  // The remainder h - h_ext xi0 - h2 stays bounded while h2 grows like K0.
  std::vector<double> remainder, peak;
  for (double delta : {0.16, 0.08, 0.04}) {
    const auto d = unit_disk({{0.1, 0.0}}, delta);
    const GridPtr gd = make_grid(d, delta / 4);
    const double h_ext = 2.0;
    const LondonSolution sol = solve_london(d, gd, h_ext, std::vector<int>{1});
    const ScalarField xi = solve_xi0(d, gd);
    const ScalarField a = h2_ansatz(d, gd, std::vector<int>{1});
    double r = 0.0;
    for (int n = 0; n < gd->node_count(); ++n)
      if (!gd->is_exterior(n)) r = std::max(r, std::abs(sol.h[n] - h_ext * xi[n] - a[n]));
    remainder.push_back(r);
    peak.push_back(a.max_abs());
    const double tilde = sol.H[0] - h_ext * xi.interpolate(d.holes[0]) - bessel_k0(delta);
    MESSAGE("delta " << delta << " remainder " << r << " h2 " << a.max_abs() << " H tilde " << tilde);
    CHECK(std::abs(tilde) < 1.0);
  }
  CHECK(peak[2] > peak[0] + 0.9 * (bessel_k0(0.04) - bessel_k0(0.16)));
  CHECK(remainder[2] < remainder[0] + 0.25);
}

TEST_CASE("S1 reconstruction") {
  SUBCASE("zero data") {
    const auto domain = unit_disk({{0, 0}}, 0.1);
    const GridPtr g = make_grid(domain, 0.025);
    const auto topo = std::make_shared<const LatticeTopology>(g);
    const S1Minimizer s1 = reconstruct_s1_minimizer(solve_london(domain, g, 0.0, std::vector<int>{0}), topo);
    for (double a : s1.A) CHECK(a == 0.0);
    for (int k = 0; k < topo->state_node_count(); ++k) CHECK(std::abs(s1.phase[topo->state_node(k)]) < 1e-12);
  }
  SUBCASE("central hole with one quantum") {
    const double delta = 0.05;
    const auto domain = unit_disk({{0, 0}}, delta);
    const GridPtr g = make_grid(domain, delta / 4);
    const auto topo = std::make_shared<const LatticeTopology>(g);
    const LondonSolution sol = solve_london(domain, g, 0.0, std::vector<int>{1});
    const S1Minimizer s1 = reconstruct_s1_minimizer(sol, topo);
    const double circ = loop_circulation(*topo, s1.current, circle_loop(*g, {0, 0}, 0.5));
    MESSAGE("circulation " << circ << " near hole " << s1.circulation[0]);
    CHECK(std::abs(circ / (2 * kPi) - 1.0) < 0.05);

    // curl A equals the cell average of h; the divergence vanishes at every
    // node with four domain edges.
    const int nx = g->nx();
    for (int c = 0; c < topo->cell_count(); ++c) {
      const auto e = topo->cell_edges(c);
      const double curl = s1.A[e[0]] + s1.A[e[1]] - s1.A[e[2]] - s1.A[e[3]];
      const int k = topo->cell_corner(c);
      const double hc = 0.25 * (sol.h[k] + sol.h[k + 1] + sol.h[k + nx] + sol.h[k + nx + 1]);
      CHECK(std::abs(curl / (g->spacing() * g->spacing()) - hc) < 1e-8 * std::max(1.0, sol.H[0]));
    }
    for (int n = 0; n < g->node_count(); ++n) {
      if (g->is_exterior(n)) continue;
      const int ex = topo->edge_xplus(n), ey = topo->edge_yplus(n);
      const int wx = topo->edge_xplus(n - 1), wy = topo->edge_yplus(n - nx);
      if (ex < 0 || ey < 0 || wx < 0 || wy < 0) continue;
      CHECK(std::abs(s1.A[ex] - s1.A[wx] + s1.A[ey] - s1.A[wy]) < 1e-12);
    }
  }
  SUBCASE("inconsistent degrees are rejected") {
    const double delta = 0.05;
    const auto domain = unit_disk({{0, 0}}, delta);
    const GridPtr g = make_grid(domain, delta / 4);
    const auto topo = std::make_shared<const LatticeTopology>(g);
    LondonSolution sol = solve_london(domain, g, 0.0, std::vector<int>{1});
    sol.D = {3};
    CHECK(code_of([&] { reconstruct_s1_minimizer(sol, topo); }) == ErrorCode::NonIntegerCirculation);
  }
}
