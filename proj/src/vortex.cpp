#include "glpin/vortex.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "glpin/error.hpp"

namespace glpin {

namespace {

constexpr double kPi = std::numbers::pi;

bool inside(const Disk& d, Point p) { return distance(d.center, p) <= d.radius * (1.0 + 1e-12) + 1e-15; }

Disk disk_from(Point a, Point b) {
  return {{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, 0.5 * distance(a, b)};
}

Disk disk_from(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y, cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-300) {
    // Collinear: the widest pair.
    Disk best = disk_from(a, b);
    for (const Disk& k : {disk_from(a, c), disk_from(b, c)})
      if (k.radius > best.radius) best = k;
    return best;
  }
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  const Point o{a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
  return {o, distance(o, a)};
}

Disk merge_disks(const Disk& a, const Disk& b) {
  const double d = distance(a.center, b.center);
  if (d + b.radius <= a.radius) return a;
  if (d + a.radius <= b.radius) return b;
  const double r = 0.5 * (d + a.radius + b.radius);
  const double t = (r - a.radius) / d;
  return {{a.center.x + t * (b.center.x - a.center.x), a.center.y + t * (b.center.y - a.center.y)}, r};
}

struct Cluster {
  std::vector<int> nodes;
  Disk disk;
};

}  // namespace

Disk enclosing_disk(std::span<const Point> input) {
  if (input.empty()) return {{0.0, 0.0}, 0.0};
  std::vector<Point> p(input.begin(), input.end());
  std::mt19937 rng(12345);
  std::shuffle(p.begin(), p.end(), rng);
  Disk d{p[0], 0.0};
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (inside(d, p[i])) continue;
    d = {p[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (inside(d, p[j])) continue;
      d = disk_from(p[i], p[j]);
      for (std::size_t k = 0; k < j; ++k)
        if (!inside(d, p[k])) d = disk_from(p[i], p[j], p[k]);
    }
  }
  return d;
}

int winding_number(std::span<const cplx> u, const DiscreteLoop& loop) {
  const std::size_t m = loop.nodes.size();
  if (m < 3) throw Error(ErrorCode::LoopBroken, "loop has fewer than three nodes");
  for (int node : loop.nodes)
    if (std::abs(u[node]) < kModulusFloor) throw Error(ErrorCode::ZeroOnLoop, "|u| below floor at node " + std::to_string(node));
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const cplx a = u[loop.nodes[k]], b = u[loop.nodes[(k + 1) % m]];
    s += std::arg(b * std::conj(a));
  }
  const double w = s / (2.0 * kPi);
  const double r = std::round(w);
  if (std::abs(w - r) > 0.2)
    throw Error(ErrorCode::AmbiguousWinding, "winding sum " + std::to_string(w) + " is not near an integer");
  return static_cast<int>(r);
}

std::vector<cplx> node_field(const GLState& state) {
  std::vector<cplx> out(state.grid().node_count(), cplx{});
  for (int k = 0; k < state.topo().state_node_count(); ++k) out[state.topo().state_node(k)] = state.u[k];
  return out;
}

int winding_number(const GLState& state, const DiscreteLoop& loop) { return winding_number(node_field(state), loop); }

HoleDegrees hole_degrees(const GLState& state, std::span<const double> radii) {
  const ClassifiedGrid& g = state.grid();
  const PerforatedDomain& domain = g.domain();
  const auto u = node_field(state);
  HoleDegrees out;
  out.radii.assign(radii.begin(), radii.end());
  for (double m : radii) {
    DegreeVector d;
    for (const Point& a : domain.holes) d.push_back(winding_number(u, circle_loop(g, a, m * domain.delta)));
    out.degrees.push_back(std::move(d));
  }
  for (const auto& d : out.degrees)
    if (d != out.degrees.front()) out.consistent = false;
  return out;
}

std::vector<int> plaquette_vorticity(const GLState& state) {
  const LatticeTopology& topo = state.topo();
  std::vector<int> n(topo.cell_count(), 0);
  for (int c = 0; c < topo.cell_count(); ++c) {
    const auto e = topo.cell_edges(c);
    bool all = true;
    for (int k = 0; k < 4 && all; ++k) all = topo.state_edge(e[k]);
    if (!all) continue;
    double s = 0.0;
    const double sign[4] = {1.0, 1.0, -1.0, -1.0};
    for (int k = 0; k < 4; ++k) {
      const cplx a = state.u[topo.state_index(topo.tail(e[k]))];
      const cplx b = state.u[topo.state_index(topo.head(e[k]))];
      s += sign[k] * (std::arg(b * std::conj(a) * std::polar(1.0, -state.A[e[k]])) + state.A[e[k]]);
    }
    n[c] = static_cast<int>(std::lround(s / (2.0 * kPi)));
  }
  return n;
}

std::vector<BadRegion> find_bad_regions(const GLState& state, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorCode::DomainError, "theta must lie in (0, 1)");
  const LatticeTopology& topo = state.topo();
  const ClassifiedGrid& g = state.grid();
  const double h = g.spacing();
  const auto u = node_field(state);
  const auto vort = plaquette_vorticity(state);

  std::vector<char> bad(g.node_count(), 0);
  for (int k = 0; k < topo.state_node_count(); ++k)
    if (std::abs(state.u[k]) <= 1.0 - theta) bad[topo.state_node(k)] = 1;
  const int nx = g.nx();
  for (int c = 0; c < topo.cell_count(); ++c) {
    if (vort[c] == 0) continue;
    const int corner = topo.cell_corner(c);
    for (int node : {corner, corner + 1, corner + nx, corner + nx + 1}) bad[node] = 1;
  }

  std::vector<Cluster> clusters;
  std::vector<char> seen(g.node_count(), 0);
  for (int start = 0; start < g.node_count(); ++start) {
    if (!bad[start] || seen[start]) continue;
    Cluster cl;
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      cl.nodes.push_back(n);
      const auto [i, j] = g.coords(n);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (!g.in_range(i + di, j + dj)) continue;
          const int m = g.index(i + di, j + dj);
          if (bad[m] && !seen[m]) {
            seen[m] = 1;
            stack.push_back(m);
          }
        }
    }
    std::vector<Point> pts;
    for (int n : cl.nodes) pts.push_back(g.position(n));
    cl.disk = enclosing_disk(pts);
    cl.disk.radius += 0.5 * h;
    clusters.push_back(std::move(cl));
  }

  // Merge overlapping disks until pairwise disjoint.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t a = 0; a < clusters.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < clusters.size() && !merged; ++b) {
        if (distance(clusters[a].disk.center, clusters[b].disk.center) >= clusters[a].disk.radius + clusters[b].disk.radius)
          continue;
        clusters[a].disk = merge_disks(clusters[a].disk, clusters[b].disk);
        clusters[a].nodes.insert(clusters[a].nodes.end(), clusters[b].nodes.begin(), clusters[b].nodes.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(b));
        merged = true;
      }
  }

  std::vector<BadRegion> out;
  for (const Cluster& cl : clusters) {
    BadRegion r;
    r.center = cl.disk.center;
    r.radius = cl.disk.radius;
    for (int n : cl.nodes)
      if (topo.state_index(n) >= 0) r.min_modulus = std::min(r.min_modulus, std::abs(u[n]));
    try {
      r.degree = winding_number(u, circle_loop(g, r.center, r.radius + 2.0 * h));
      r.degree_measured = true;
    } catch (const Error&) {
      int s = 0;
      for (int c = 0; c < topo.cell_count(); ++c) {
        const Point p = g.position(topo.cell_corner(c));
        if (distance({p.x + 0.5 * h, p.y + 0.5 * h}, r.center) <= r.radius + h) s += vort[c];
      }
      r.degree = s;
    }
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const BadRegion& a, const BadRegion& b) {
    return a.center.x != b.center.x ? a.center.x < b.center.x : a.center.y < b.center.y;
  });
  return out;
}

VortexReport analyze_vortices(const GLState& state, double theta, std::span<const double> radii) {
  VortexReport rep;
  rep.hole_degree_detail = hole_degrees(state, radii);
  if (!rep.hole_degree_detail.degrees.empty()) rep.hole_degrees = rep.hole_degree_detail.first();
  rep.bad_regions = find_bad_regions(state, theta);
  const PerforatedDomain& domain = state.grid().domain();
  for (const BadRegion& r : rep.bad_regions) {
    bool in = signed_distance(domain.outer, r.center) < -r.radius;
    for (const Point& a : domain.holes) in = in && distance(r.center, a) > domain.delta + r.radius;
    if (in) rep.bulk_degree_sum += std::abs(r.degree);
  }
  return rep;
}

BulkCheck assert_no_bulk_vortices(const VortexReport& report, const PerforatedDomain& domain) {
  BulkCheck out;
  std::ostringstream msg;
  for (const BadRegion& r : report.bad_regions) {
    bool collar = false;
    for (const Point& a : domain.holes) collar = collar || distance(r.center, a) - r.radius < 4.0 * domain.delta;
    if (collar || r.degree == 0) continue;
    out.pass = false;
    out.offending.push_back(r);
    msg << "bulk region at (" << r.center.x << ", " << r.center.y << ") radius " << r.radius << " degree " << r.degree
        << "; ";
  }
  out.details = out.pass ? "no bulk vortices" : msg.str();
  return out;
}

}  // namespace glpin
