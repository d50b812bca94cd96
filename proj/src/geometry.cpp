#include "glpin/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "glpin/error.hpp"

namespace glpin {

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  return a - 2.0 * pi * std::ceil((a - pi) / (2.0 * pi));
}

namespace {

struct SignedDistance {
  Point p;
  double operator()(const Disk& d) const { return distance(p, d.center) - d.radius; }
  double operator()(const Rectangle& r) const {
    const double dx = std::max(r.lo.x - p.x, p.x - r.hi.x);
    const double dy = std::max(r.lo.y - p.y, p.y - r.hi.y);
    if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
    return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  }
};


}  // namespace

double signed_distance(const OuterRegion& outer, Point p) {
  return std::visit(SignedDistance{p}, outer);
}

double PerforatedDomain::isolation_radius() const {
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < holes.size(); ++j) {
    r = std::min(r, -signed_distance(outer, holes[j]));
    for (std::size_t k = j + 1; k < holes.size(); ++k) r = std::min(r, 0.5 * distance(holes[j], holes[k]));
  }
  return r;
}

const PerforatedDomain& validate_domain(const PerforatedDomain& domain) {
  const double delta = domain.delta;
  if (!(delta > 0.0)) throw HoleError(ErrorCode::NonPositiveRadius, 0, "hole radius must be positive");
  if (const auto* d = std::get_if<Disk>(&domain.outer); d && !(d->radius > 0.0))
    throw Error(ErrorCode::DomainError, "outer disk radius must be positive");
  if (const auto* r = std::get_if<Rectangle>(&domain.outer); r && !(r->hi.x > r->lo.x && r->hi.y > r->lo.y))
    throw Error(ErrorCode::DomainError, "rectangle corners must satisfy lo < hi");
  for (int j = 0; j < domain.hole_count(); ++j) {
    const double clearance = -signed_distance(domain.outer, domain.holes[j]) - delta;
    if (clearance < 2.0 * delta)
      throw HoleError(ErrorCode::HoleTooCloseToBoundary, j,
                      "clearance " + std::to_string(clearance) + " < 2*delta");
  }
  for (int j = 0; j < domain.hole_count(); ++j) {
    for (int k = j + 1; k < domain.hole_count(); ++k) {
      const double sep = distance(domain.holes[j], domain.holes[k]);
      if (sep < 4.0 * delta)
        throw HoleError(ErrorCode::HoleOverlap, k,
                        "separation " + std::to_string(sep) + " from hole " + std::to_string(j) + " < 4*delta");
    }
  }
  return domain;
}

ClassifiedGrid build_grid(const PerforatedDomain& domain, double h) {
  validate_domain(domain);
  if (!(h > 0.0)) throw Error(ErrorCode::DomainError, "grid spacing must be positive");
  if (domain.hole_count() > 0 && h > domain.delta / 4.0 * (1.0 + 1e-12))
    throw Error(ErrorCode::ResolutionTooCoarse,
                "h = " + std::to_string(h) + " exceeds delta/4 = " + std::to_string(domain.delta / 4.0));

  ClassifiedGrid g;
  g.h_ = h;
  g.domain_ = domain;
  if (const auto* disk = std::get_if<Disk>(&domain.outer)) {
    // Lattice anchored at the disk centre so the centre is a node.
    const int half = static_cast<int>(std::ceil(disk->radius / h)) + 2;
    g.origin_ = {disk->center.x - half * h, disk->center.y - half * h};
    g.nx_ = g.ny_ = 2 * half + 1;
  } else {
    const auto& rect = std::get<Rectangle>(domain.outer);
    g.origin_ = {rect.lo.x - 2.0 * h, rect.lo.y - 2.0 * h};
    g.nx_ = static_cast<int>(std::ceil((rect.hi.x - rect.lo.x) / h)) + 5;
    g.ny_ = static_cast<int>(std::ceil((rect.hi.y - rect.lo.y) / h)) + 5;
  }

  const double band = 0.5 * h;
  const int n = g.node_count();
  g.labels_.assign(n, NodeLabel{});
  for (int node = 0; node < n; ++node) {
    const Point p = g.position(node);
    const double sd = signed_distance(domain.outer, p);
    NodeLabel& lab = g.labels_[node];
    if (sd > band) {
      lab = {NodeKind::Exterior, -1};
      continue;
    }
    if (sd >= -band) {
      lab = {NodeKind::DirichletOuter, -1};
      continue;
    }
    lab = {NodeKind::Interior, -1};
    for (int j = 0; j < domain.hole_count(); ++j) {
      const double r = distance(p, domain.holes[j]) - domain.delta;
      if (r < -band) {
        lab = {NodeKind::HoleInterior, j};
        break;
      }
      if (r <= band) {
        lab = {NodeKind::DirichletHole, j};
        break;
      }
    }
  }

  // Rounding can in principle leave an interior node touching an exterior or
  // hole-interior node; such nodes are promoted to the adjacent boundary.
  for (int node = 0; node < n; ++node) {
    if (g.labels_[node].kind != NodeKind::Interior) continue;
    for (int nb : g.neighbors(node)) {
      if (nb < 0 || g.labels_[nb].kind == NodeKind::Exterior) {
        g.labels_[node] = {NodeKind::DirichletOuter, -1};
        break;
      }
      if (g.labels_[nb].kind == NodeKind::HoleInterior) {
        g.labels_[node] = {NodeKind::DirichletHole, g.labels_[nb].hole};
        break;
      }
    }
  }

  g.unknown_of_node_.assign(n, -1);
  g.hole_rings_.assign(domain.hole_count(), {});
  for (int node = 0; node < n; ++node) {
    const NodeLabel& lab = g.labels_[node];
    if (lab.kind == NodeKind::Interior) {
      g.unknown_of_node_[node] = static_cast<int>(g.unknown_nodes_.size());
      g.unknown_nodes_.push_back(node);
    } else if (lab.kind == NodeKind::DirichletHole) {
      g.hole_rings_[lab.hole].push_back(node);
    }
  }
  return g;
}

GridPtr make_grid(const PerforatedDomain& domain, double h) {
  return std::make_shared<const ClassifiedGrid>(build_grid(domain, h));
}

int ClassifiedGrid::count(NodeKind kind, int hole) const {
  return static_cast<int>(std::count_if(labels_.begin(), labels_.end(), [&](const NodeLabel& l) {
    return l.kind == kind && (hole < 0 || l.hole == hole);
  }));
}

std::array<int, 4> ClassifiedGrid::neighbors(int node) const {
  const auto [i, j] = coords(node);
  return {i + 1 < nx_ ? node + 1 : -1, i > 0 ? node - 1 : -1, j + 1 < ny_ ? node + nx_ : -1,
          j > 0 ? node - nx_ : -1};
}

int ClassifiedGrid::nearest_node(Point p) const {
  const int i = static_cast<int>(std::lround((p.x - origin_.x) / h_));
  const int j = static_cast<int>(std::lround((p.y - origin_.y) / h_));
  if (!in_range(i, j)) return -1;
  return index(i, j);
}

DiscreteLoop circle_loop(const ClassifiedGrid& grid, Point center, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::DomainError, "loop radius must be positive");
  const double h = grid.spacing();
  const int samples = std::max(64, static_cast<int>(std::ceil(16.0 * 2.0 * std::numbers::pi * radius / h)));

  DiscreteLoop loop{{}, center, radius};
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / samples;
    const int node = grid.nearest_node({center.x + radius * std::cos(t), center.y + radius * std::sin(t)});
    if (node < 0) throw Error(ErrorCode::LoopBroken, "circle leaves the grid");
    if (loop.nodes.empty() || loop.nodes.back() != node) loop.nodes.push_back(node);
  }
  while (loop.nodes.size() > 1 && loop.nodes.back() == loop.nodes.front()) loop.nodes.pop_back();

  // Strip back-and-forth spikes (a, b, a) that nearest-node rounding can emit.
  bool changed = true;
  while (changed && loop.nodes.size() > 3) {
    changed = false;
    const std::size_t m = loop.nodes.size();
    for (std::size_t k = 0; k < m; ++k) {
      if (loop.nodes[(k + m - 1) % m] == loop.nodes[(k + 1) % m]) {
        loop.nodes.erase(loop.nodes.begin() + static_cast<std::ptrdiff_t>(k));
        loop.nodes.erase(loop.nodes.begin() + static_cast<std::ptrdiff_t>(k % loop.nodes.size()));
        changed = true;
        break;
      }
    }
  }
  if (loop.nodes.size() < 4) throw Error(ErrorCode::LoopBroken, "loop radius below grid resolution");

  std::vector<int> sorted = loop.nodes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::LoopBroken, "rasterized loop is not simple");

  const std::size_t m = loop.nodes.size();
  for (std::size_t k = 0; k < m; ++k) {
    const int node = loop.nodes[k];
    const NodeKind kind = grid.kind(node);
    if (kind != NodeKind::Interior && kind != NodeKind::DirichletOuter)
      throw Error(ErrorCode::LoopBroken, std::string("loop crosses a ") + to_string(kind) + " node");
    const auto [i0, j0] = grid.coords(node);
    const auto [i1, j1] = grid.coords(loop.nodes[(k + 1) % m]);
    if (std::abs(i1 - i0) > 1 || std::abs(j1 - j0) > 1)
      throw Error(ErrorCode::LoopBroken, "consecutive loop nodes are not grid neighbours");
  }
  return loop;
}

double geometric_winding(const ClassifiedGrid& grid, const DiscreteLoop& loop, Point about) {
  double total = 0.0;
  const std::size_t m = loop.nodes.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Point a = grid.position(loop.nodes[k]);
    const Point b = grid.position(loop.nodes[(k + 1) % m]);
    const double ta = std::atan2(a.y - about.y, a.x - about.x);
    const double tb = std::atan2(b.y - about.y, b.x - about.x);
    total += wrap_angle(tb - ta);
  }
  return total / (2.0 * std::numbers::pi);
}

LatticeTopology::LatticeTopology(GridPtr grid) : grid_(std::move(grid)) {
  const ClassifiedGrid& g = *grid_;
  const int n = g.node_count();
  xplus_.assign(n, -1);
  yplus_.assign(n, -1);
  cell_of_node_.assign(n, -1);
  state_of_node_.assign(n, -1);
  domain_of_node_.assign(n, -1);

  for (int node = 0; node < n; ++node) {
    if (g.is_exterior(node)) continue;
    domain_of_node_[node] = static_cast<int>(domain_nodes_.size());
    domain_nodes_.push_back(node);
    if (g.in_perforated(node)) {
      state_of_node_[node] = static_cast<int>(state_nodes_.size());
      state_nodes_.push_back(node);
    }
  }

  auto add_edge = [&](int a, int b, bool horizontal) {
    const int e = static_cast<int>(edge_tail_.size());
    edge_tail_.push_back(a);
    edge_head_.push_back(b);
    edge_horizontal_.push_back(horizontal ? 1 : 0);
    const bool state = g.in_perforated(a) && g.in_perforated(b);
    edge_state_.push_back(state ? 1 : 0);
    if (state) state_edge_list_.push_back(e);
    return e;
  };
  for (int node = 0; node < n; ++node) {
    if (g.is_exterior(node)) continue;
    const auto [i, j] = g.coords(node);
    if (i + 1 < g.nx() && !g.is_exterior(node + 1)) xplus_[node] = add_edge(node, node + 1, true);
    if (j + 1 < g.ny() && !g.is_exterior(node + g.nx())) yplus_[node] = add_edge(node, node + g.nx(), false);
  }
  for (int node = 0; node < n; ++node) {
    const auto [i, j] = g.coords(node);
    if (i + 1 >= g.nx() || j + 1 >= g.ny()) continue;
    const int right = node + 1, up = node + g.nx(), diag = node + g.nx() + 1;
    if (g.is_exterior(node) || g.is_exterior(right) || g.is_exterior(up) || g.is_exterior(diag)) continue;
    cell_of_node_[node] = static_cast<int>(cell_corner_.size());
    cell_corner_.push_back(node);
    cell_edges_.push_back({xplus_[node], yplus_[right], xplus_[up], yplus_[node]});
  }
}

std::array<int, 2> LatticeTopology::edge_between(int a, int b) const {
  const int nx = grid_->nx();
  if (b == a + 1) return {xplus_[a], xplus_[a] >= 0 ? 1 : 0};
  if (b == a - 1) return {xplus_[b], xplus_[b] >= 0 ? -1 : 0};
  if (b == a + nx) return {yplus_[a], yplus_[a] >= 0 ? 1 : 0};
  if (b == a - nx) return {yplus_[b], yplus_[b] >= 0 ? -1 : 0};
  return {-1, 0};
}

std::vector<std::array<int, 2>> loop_edges(const LatticeTopology& topo, const DiscreteLoop& loop) {
  const ClassifiedGrid& g = topo.grid();
  std::vector<std::array<int, 2>> walk;
  const std::size_t m = loop.nodes.size();
  for (std::size_t k = 0; k < m; ++k) {
    const int a = loop.nodes[k], b = loop.nodes[(k + 1) % m];
    const auto direct = topo.edge_between(a, b);
    if (direct[0] >= 0) {
      walk.push_back(direct);
      continue;
    }
    const auto [ia, ja] = g.coords(a);
    const auto [ib, jb] = g.coords(b);
    const int corners[2] = {g.index(ib, ja), g.index(ia, jb)};
    int chosen = -1;
    for (bool need_state : {true, false}) {
      for (int c : corners) {
        const auto e1 = topo.edge_between(a, c), e2 = topo.edge_between(c, b);
        if (e1[0] < 0 || e2[0] < 0) continue;
        if (need_state && !(topo.state_edge(e1[0]) && topo.state_edge(e2[0]))) continue;
        chosen = c;
        walk.push_back(e1);
        walk.push_back(e2);
        break;
      }
      if (chosen >= 0) break;
    }
    if (chosen < 0) throw Error(ErrorCode::LoopBroken, "diagonal loop step has no usable corner");
  }
  return walk;
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Exterior: return "exterior";
    case NodeKind::Interior: return "interior";
    case NodeKind::DirichletOuter: return "dirichlet_outer";
    case NodeKind::DirichletHole: return "dirichlet_hole";
    case NodeKind::HoleInterior: return "hole_interior";
  }
  return "unknown";
}

void write_label_csv(std::ostream& os, const ClassifiedGrid& grid) {
  os << "x,y,label\n";
  for (int node = 0; node < grid.node_count(); ++node) {
    const Point p = grid.position(node);
    const NodeLabel& lab = grid.label(node);
    os << p.x << ',' << p.y << ',' << to_string(lab.kind);
    if (lab.hole >= 0) os << '(' << lab.hole << ')';
    os << '\n';
  }
}

}  // namespace glpin
