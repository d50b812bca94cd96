#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "glpin/error.hpp"
#include "glpin/geometry.hpp"

using namespace glpin;

namespace {

PerforatedDomain unit_disk(std::vector<Point> holes, double delta) {
  return PerforatedDomain{Disk{{0.0, 0.0}, 1.0}, std::move(holes), delta};
}

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

TEST_CASE("validate_domain") {
  CHECK_NOTHROW(validate_domain(unit_disk({{0, 0}}, 0.05)));
  CHECK(code_of([] { validate_domain(unit_disk({{0, 0}, {0.1, 0}}, 0.05)); }) == ErrorCode::HoleOverlap);
  CHECK(code_of([] { validate_domain(unit_disk({{0.9, 0}}, 0.05)); }) == ErrorCode::HoleTooCloseToBoundary);
  CHECK(code_of([] { validate_domain(unit_disk({{0, 0}}, 0.0)); }) == ErrorCode::NonPositiveRadius);
  try {
    validate_domain(unit_disk({{0, 0}, {0.5, 0}, {0.55, 0.0}}, 0.05));
  } catch (const HoleError& e) {
    CHECK(e.hole() == 2);
  }
}

TEST_CASE("coarse grid on the unit disk") {
  const ClassifiedGrid g = build_grid(unit_disk({}, 0.05), 0.5);
  const int origin = g.nearest_node({0, 0});
  CHECK(g.kind(origin) == NodeKind::Interior);
  CHECK(g.kind(g.nearest_node({1, 0})) == NodeKind::DirichletOuter);
  CHECK(g.kind(g.nearest_node({0, -1})) == NodeKind::DirichletOuter);
  CHECK(g.kind(g.nearest_node({1, 1})) == NodeKind::Exterior);
  CHECK(g.count(NodeKind::Interior) == 9);
  CHECK(g.count(NodeKind::DirichletOuter) == 12);
}

TEST_CASE("hole rings are resolved") {
  const double delta = 0.05, h = 0.0125;
  const auto domain = unit_disk({{0, 0}, {0.37, -0.21}}, delta);
  const ClassifiedGrid g = build_grid(domain, h);
  for (int j = 0; j < 2; ++j) {
    // Oracle: direct enumeration of nodes within h/2 of the circle.
    int expected = 0;
    for (int n = 0; n < g.node_count(); ++n)
      if (std::abs(distance(g.position(n), domain.holes[j]) - delta) <= h / 2) ++expected;
    CHECK(static_cast<int>(g.hole_ring(j).size()) == expected);
    CHECK(expected >= 16);
    const double inside = g.count(NodeKind::HoleInterior, j);
    const double area = std::numbers::pi * delta * delta / (h * h);
    CHECK(inside > 0.5 * area);
    CHECK(inside < 1.5 * area);
  }
}

TEST_CASE("grid invariants") {
  const ClassifiedGrid g = build_grid(unit_disk({{0.2, 0.1}, {-0.4, -0.3}}, 0.08), 0.02);
  for (int k = 0; k < g.unknown_count(); ++k) {
    const int node = g.node_of_unknown(k);
    CHECK(g.unknown(node) == k);
    for (int nb : g.neighbors(node)) {
      REQUIRE(nb >= 0);
      CHECK(g.kind(nb) != NodeKind::Exterior);
      CHECK(g.kind(nb) != NodeKind::HoleInterior);
    }
  }
  const ClassifiedGrid again = build_grid(g.domain(), 0.02);
  for (int n = 0; n < g.node_count(); ++n) CHECK(g.label(n) == again.label(n));
}

TEST_CASE("resolution floor") {
  CHECK(code_of([] { build_grid(unit_disk({{0, 0}}, 0.05), 0.02); }) == ErrorCode::ResolutionTooCoarse);
}

TEST_CASE("refinement keeps labels away from boundaries") {
  const auto domain = unit_disk({{0.3, 0.0}}, 0.1);
  const ClassifiedGrid coarse = build_grid(domain, 0.025);
  const ClassifiedGrid fine = build_grid(domain, 0.0125);
  for (int n = 0; n < coarse.node_count(); ++n) {
    const Point p = coarse.position(n);
    const double d_outer = std::abs(signed_distance(domain.outer, p));
    const double d_hole = std::abs(distance(p, domain.holes[0]) - domain.delta);
    if (std::min(d_outer, d_hole) <= coarse.spacing()) continue;
    const int m = fine.nearest_node(p);
    if (m < 0) {
      CHECK(coarse.kind(n) == NodeKind::Exterior);
      continue;
    }
    CHECK(coarse.kind(n) == fine.kind(m));
  }
}

TEST_CASE("rectangle outer region") {
  PerforatedDomain d{Rectangle{{0, 0}, {2, 1}}, {{0.5, 0.5}, {1.5, 0.5}}, 0.1};
  const ClassifiedGrid g = build_grid(d, 0.025);
  CHECK(g.kind(g.nearest_node({0, 0})) == NodeKind::DirichletOuter);
  CHECK(g.kind(g.nearest_node({1, 0.5})) == NodeKind::Interior);
  CHECK(g.kind(g.nearest_node({0.5, 0.5})) == NodeKind::HoleInterior);
  CHECK(g.label(g.nearest_node({1.5, 0.6})).hole == 1);
}

TEST_CASE("circle loops") {
  SUBCASE("radius 0.5 about the origin") {
    const ClassifiedGrid g = build_grid(unit_disk({}, 0.05), 0.1);
    const DiscreteLoop loop = circle_loop(g, {0, 0}, 0.5);
    CHECK(loop.nodes.size() >= 24);
    CHECK(loop.nodes.size() <= 40);
    CHECK(geometric_winding(g, loop, {0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    for (int n : loop.nodes) CHECK(std::abs(distance(g.position(n), {0, 0}) - 0.5) <= 0.1);
  }
  SUBCASE("leaving the domain") {
    const ClassifiedGrid g = build_grid(unit_disk({}, 0.05), 0.1);
    CHECK(code_of([&] { circle_loop(g, {0, 0}, 1.3); }) == ErrorCode::LoopBroken);
  }
  SUBCASE("around a hole") {
    const auto domain = unit_disk({{0.3, -0.2}}, 0.05);
    const ClassifiedGrid g = build_grid(domain, 0.0125);
    const DiscreteLoop loop = circle_loop(g, domain.holes[0], 2 * domain.delta);
    for (int n : loop.nodes) CHECK(g.kind(n) == NodeKind::Interior);
    CHECK(geometric_winding(g, loop, domain.holes[0]) == doctest::Approx(1.0));
    CHECK(code_of([&] { circle_loop(g, domain.holes[0], domain.delta); }) == ErrorCode::LoopBroken);
  }
  SUBCASE("random centres and radii stay simple") {
    const ClassifiedGrid g = build_grid(unit_disk({}, 0.05), 0.01);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> c(-0.3, 0.3), r(0.03, 0.5);
    for (int t = 0; t < 50; ++t) {
      const Point centre{c(rng), c(rng)};
      const DiscreteLoop loop = circle_loop(g, centre, r(rng));
      CHECK(geometric_winding(g, loop, centre) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("lattice topology") {
  const GridPtr g = make_grid(unit_disk({{0, 0}}, 0.1), 0.025);
  const LatticeTopology topo(g);
  for (int c = 0; c < topo.cell_count(); ++c)
    for (int e : topo.cell_edges(c)) CHECK(e >= 0);
  for (int e : topo.state_edges()) {
    CHECK(g->in_perforated(topo.tail(e)));
    CHECK(g->in_perforated(topo.head(e)));
  }
  const int n = g->nearest_node({0.5, 0.5});
  CHECK(topo.edge_between(n, n + 1)[1] == 1);
  CHECK(topo.edge_between(n + 1, n)[1] == -1);
  CHECK(topo.edge_between(n, n + 1)[0] == topo.edge_between(n + 1, n)[0]);
}

TEST_CASE("label csv dump") {
  const ClassifiedGrid g = build_grid(unit_disk({}, 0.05), 0.5);
  std::ostringstream os;
  write_label_csv(os, g);
  CHECK(os.str().rfind("x,y,label\n", 0) == 0);
  CHECK(os.str().find("dirichlet_outer") != std::string::npos);
}
