#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "glpin/error.hpp"
#include "glpin/gl.hpp"
#include "glpin/vortex.hpp"

using namespace glpin;

namespace {

constexpr double kPi = std::numbers::pi;

struct Fixture {
  PerforatedDomain domain{Disk{{0.0, 0.0}, 1.0}, {{0.1, -0.05}}, 0.2};
  GridPtr grid = make_grid(domain, 0.05);
  TopologyPtr topo = std::make_shared<LatticeTopology>(grid);
};

GLState random_state(const TopologyPtr& topo, unsigned seed, double h_ext = 3.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> mod(0.3, 1.2), ang(-kPi, kPi), a(-0.1, 0.1);
  GLState s = make_state(topo, GLParams{0.1, 0.2, 1.0, h_ext});
  for (auto& v : s.u) v = std::polar(mod(rng), ang(rng));
  for (auto& v : s.A) v = a(rng);
  return s;
}

double weight_sum(const Fixture& f) {
  double w = 0.0;
  for (int k = 0; k < f.topo->state_node_count(); ++k) w += node_weight(*f.grid, f.topo->state_node(k));
  return w;
}

}  // namespace

TEST_CASE("gl energy of constant states") {
  Fixture f;
  GLState s = make_state(f.topo, GLParams{0.1, 0.2, 0.0, 0.0});
  CHECK(gl_energy(s).total == doctest::Approx(0.0));
  CHECK(gl_gradient(s).max_norm() < 1e-14);

  s = make_state(f.topo, GLParams{0.1, 0.2, 0.0, 0.0}, 0.0);
  const auto e0 = gl_energy(s);
  CHECK(e0.kinetic == 0.0);
  const double area = kPi * (1.0 - 0.04);
  CHECK(e0.potential == doctest::Approx(weight_sum(f) / (4 * 0.01)));
  CHECK(std::abs(e0.potential - area / (4 * 0.01)) / e0.potential < 0.03);

  const double h_ext = 1.0 * std::abs(std::log(0.2));
  s = make_state(f.topo, GLParams::make(0.2, 1.0, 0.1));
  const auto e1 = gl_energy(s);
  CHECK(e1.kinetic == doctest::Approx(0.0));
  CHECK(e1.potential == doctest::Approx(0.0));
  CHECK(std::abs(e1.magnetic - 0.5 * h_ext * h_ext * kPi) / e1.magnetic < 0.1);
  CHECK(e1.total == doctest::Approx(e1.kinetic + e1.potential + e1.magnetic));
}

TEST_CASE("potential gradient vanishes on the unit circle") {
  Fixture f;
  GLState s = make_state(f.topo, GLParams{0.1, 0.2, 0.0, 0.0});
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (auto& v : s.u) v = std::polar(1.0, ang(rng));
  GLState kin_only = s;
  kin_only.params.eps = 1e6;
  const auto g = gl_gradient(s), gk = gl_gradient(kin_only);
  for (std::size_t k = 0; k < g.du.size(); ++k) CHECK(std::abs(g.du[k] - gk.du[k]) < 1e-12);
}

TEST_CASE("gauge invariance of the lattice energy") {
  Fixture f;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> phi(-10.0, 10.0);
  for (unsigned seed : {1u, 2u, 3u}) {
    const GLState s = random_state(f.topo, seed);
    std::vector<double> p(f.grid->node_count());
    for (auto& v : p) v = phi(rng);
    const double e = gl_energy(s).total;
    const double e2 = gl_energy(gauge_transform(s, p)).total;
    CHECK(std::abs(e2 - e) / e <= 1e-12);
  }
}

TEST_CASE("coulomb projection") {
  Fixture f;
  const GLState s = random_state(f.topo, 5);
  const CoulombProjector proj(f.topo);
  const GLState c = proj.project(s);
  const double e = gl_energy(s).total;
  CHECK(std::abs(gl_energy(c).total - e) / e <= 1e-12);

  const auto div = lattice_divergence(*f.topo, c.A);
  for (int d = 0; d < f.topo->domain_node_count(); ++d) CHECK(std::abs(div[f.topo->domain_node(d)]) < 1e-10);

  const GLState cc = proj.project(c);
  for (std::size_t e2 = 0; e2 < c.A.size(); ++e2) CHECK(std::abs(cc.A[e2] - c.A[e2]) < 1e-10);
  for (std::size_t k = 0; k < c.u.size(); ++k) CHECK(std::abs(cc.u[k] - c.u[k]) < 1e-10);

  // Forward smooth gauge, then project back.
  std::vector<double> p(f.grid->node_count());
  for (int n = 0; n < f.grid->node_count(); ++n) {
    const Point x = f.grid->position(n);
    p[n] = std::sin(2 * x.x) * std::cos(3 * x.y) + x.x * x.y;
  }
  const GLState back = proj.project(gauge_transform(c, p));
  for (std::size_t e2 = 0; e2 < c.A.size(); ++e2) CHECK(std::abs(back.A[e2] - c.A[e2]) < 1e-9);
  // u agrees up to a global phase fixed by the pinned node.
  const cplx rot = back.u[0] / c.u[0];
  for (std::size_t k = 0; k < c.u.size(); ++k) CHECK(std::abs(back.u[k] - rot * c.u[k]) < 1e-9);
}

TEST_CASE("gradient matches central differences") {
  Fixture f;
  GLState s = random_state(f.topo, 7);
  const GLGradient g = gl_gradient(s);
  std::mt19937 rng(17);
  const int ns = static_cast<int>(s.u.size()), ne = static_cast<int>(s.A.size());
  std::uniform_int_distribution<int> pick(0, 2 * ns + ne - 1);
  const double step = 1e-5;
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int c = pick(rng);
    GLState plus = s, minus = s;
    double analytic = 0.0;
    if (c < ns) {
      plus.u[c] += step;
      minus.u[c] -= step;
      analytic = g.du[c].real();
    } else if (c < 2 * ns) {
      plus.u[c - ns] += cplx(0, step);
      minus.u[c - ns] -= cplx(0, step);
      analytic = g.du[c - ns].imag();
    } else {
      plus.A[c - 2 * ns] += step;
      minus.A[c - 2 * ns] -= step;
      analytic = g.dA[c - 2 * ns];
    }
    const double fd = (gl_energy(plus).total - gl_energy(minus).total) / (2 * step);
    worst = std::max(worst, std::abs(analytic - fd) / (1 + std::abs(fd)));
    ++checked;
  }
  CHECK(checked >= 50);
  CHECK(worst <= 1e-6);
}

TEST_CASE("seed from london") {
  Fixture f;
  const PerforatedDomain central{Disk{{0.0, 0.0}, 1.0}, {{0.0, 0.0}}, 0.2};
  auto grid = make_grid(central, 0.05);
  auto topo = std::make_shared<LatticeTopology>(grid);

  const auto zero = solve_london(central, grid, 0.0, std::vector<int>{0});
  const GLState s0 = seed_from_london(zero, topo, GLParams{0.1, 0.2, 0.0, 0.0});
  // Unit modulus outside the seeding collar, zero phase everywhere.
  for (int k = 0; k < topo->state_node_count(); ++k) {
    const double r = distance(grid->position(topo->state_node(k)), {0.0, 0.0});
    CHECK(std::abs(std::arg(s0.u[k])) < 1e-12);
    if (r > 0.2 + 3 * 0.1) CHECK(std::abs(s0.u[k] - cplx(1.0, 0.0)) < 1e-12);
  }
  for (double a : s0.A) CHECK(std::abs(a) < 1e-12);

  const GLParams params = GLParams::make(0.2, 2.0, 0.1);
  const auto one = solve_london(central, grid, params.h_ext, std::vector<int>{1});
  const GLState s1 = seed_from_london(one, topo, params);
  CHECK(winding_number(s1, circle_loop(*grid, {0.0, 0.0}, 0.4)) == 1);
  const auto e = gl_energy(s1);
  CHECK(std::isfinite(e.total));
  CHECK(e.total <= 3 * (london_energy(one).total + e.potential));
}

TEST_CASE("minimizer on a coarse single-hole problem") {
  const double delta = 0.2;
  const PerforatedDomain central{Disk{{0.0, 0.0}, 1.0}, {{0.0, 0.0}}, delta};
  auto grid = make_grid(central, delta / 4);
  auto topo = std::make_shared<LatticeTopology>(grid);

  SUBCASE("already minimal") {
    const auto r = minimize_gl(make_state(topo, GLParams{0.1, delta, 0.0, 0.0}));
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.trace.back().energy == doctest::Approx(0.0));
  }

  SUBCASE("london seeded") {
    const double eps = delta * delta;
    const GLParams params = GLParams::make(delta, 3.0, eps);
    LondonBasis basis(central, grid, params.h_ext);
    const auto best = minimize_degrees(energy_quadratic_form(basis));
    const auto sol = basis.solve(best.D);
    const GLState seed = seed_from_london(sol, topo, params);
    const auto r = minimize_gl(seed);
    CHECK(r.converged);
    CHECK_FALSE(r.line_search_stalled);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].energy <= r.trace[k - 1].energy);
    CHECK(gl_gradient(r.state).max_norm() <= r.grad_tol * 1.0001);
    CHECK(r.trace.back().energy <= gl_energy(seed).total);
    CHECK(gl_energy(r.state).total == doctest::Approx(r.trace.back().energy).epsilon(1e-10));
    double umax = 0.0;
    for (const cplx& v : r.state.u) umax = std::max(umax, std::abs(v));
    CHECK(umax <= 1 + 1e-6);
    CHECK(r.trace.back().energy <= basis.energy(std::vector<double>{0.0}).total + 1.0);
    const auto hd = hole_degrees(r.state);
    CHECK(hd.consistent);
    CHECK(hd.first() == best.D);
  }
}

TEST_CASE("energy decomposition") {
  const double delta = 0.2;
  const PerforatedDomain central{Disk{{0.0, 0.0}, 1.0}, {{0.0, 0.0}}, delta};
  auto grid = make_grid(central, delta / 4);
  auto topo = std::make_shared<LatticeTopology>(grid);
  const GLParams params = GLParams::make(delta, 3.0, delta * delta);
  const auto sol = solve_london(central, grid, params.h_ext, std::vector<int>{1});
  const S1Minimizer s1 = reconstruct_s1_minimizer(sol, topo);

  const auto exact = energy_decomposition_check(s1_state(s1, params), sol, s1);
  CHECK(std::abs(exact.F_term) < 1e-12);
  CHECK(std::abs(exact.cross_term) < 1e-12);
  CHECK(std::abs(exact.residual) < 1e-9);

  const GLState seed = seed_from_london(sol, s1, params);
  const auto r = energy_decomposition_check(seed, sol, s1);
  CHECK(std::abs(r.cross_term) < 1e-9);
  CHECK(r.residual == doctest::Approx(r.gl_total - r.london_total - r.F_term - r.cross_term));
  // v is the real collar ramp: F holds its potential and its gradient energy.
  CHECK(r.F_term >= gl_energy(seed).potential);
  CHECK(std::abs(r.residual) < 0.05 * r.gl_total);
}
