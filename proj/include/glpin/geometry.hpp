#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace glpin {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

/// Representative of an angle in (-pi, pi].
double wrap_angle(double a);

struct Disk {
  Point center;
  double radius = 1.0;
};

struct Rectangle {
  Point lo;
  Point hi;
};

using OuterRegion = std::variant<Disk, Rectangle>;

/// Signed distance to the boundary of the outer region (negative inside).
double signed_distance(const OuterRegion& outer, Point p);

/// Outer region with N circular holes of common radius delta.
struct PerforatedDomain {
  OuterRegion outer = Disk{};
  std::vector<Point> holes;
  double delta = 0.05;

  int hole_count() const { return static_cast<int>(holes.size()); }
  PerforatedDomain without_holes() const { return {outer, {}, delta}; }
  /// Largest R such that the balls B(a_j, R) are pairwise disjoint and stay
  /// inside the outer region.
  double isolation_radius() const;
};

/// Returns the domain unchanged, or throws HoleError naming the first
/// offending hole.
const PerforatedDomain& validate_domain(const PerforatedDomain& domain);

enum class NodeKind : std::uint8_t {
  Exterior,
  Interior,
  DirichletOuter,
  DirichletHole,
  HoleInterior,
};

struct NodeLabel {
  NodeKind kind = NodeKind::Exterior;
  int hole = -1;  // hole index for DirichletHole / HoleInterior

  bool operator==(const NodeLabel&) const = default;
};

/// Uniform Cartesian grid over a perforated domain. Node (i, j) sits at
/// origin + (i h, j h); flat index i + nx * j.
class ClassifiedGrid {
 public:
  ClassifiedGrid() = default;

  double spacing() const { return h_; }
  Point origin() const { return origin_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int node_count() const { return nx_ * ny_; }
  int unknown_count() const { return static_cast<int>(unknown_nodes_.size()); }
  const PerforatedDomain& domain() const { return domain_; }

  int index(int i, int j) const { return i + nx_ * j; }
  std::array<int, 2> coords(int node) const { return {node % nx_, node / nx_}; }
  Point position(int node) const {
    const auto [i, j] = coords(node);
    return {origin_.x + i * h_, origin_.y + j * h_};
  }
  bool in_range(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

  const NodeLabel& label(int node) const { return labels_[node]; }
  NodeKind kind(int node) const { return labels_[node].kind; }
  bool is_exterior(int node) const { return kind(node) == NodeKind::Exterior; }
  /// Node carries a value of the order parameter (belongs to the closure of
  /// the perforated domain).
  bool in_perforated(int node) const {
    const auto k = kind(node);
    return k == NodeKind::Interior || k == NodeKind::DirichletOuter || k == NodeKind::DirichletHole;
  }
  /// Unknown index of an interior node, -1 otherwise.
  int unknown(int node) const { return unknown_of_node_[node]; }
  int node_of_unknown(int k) const { return unknown_nodes_[k]; }

  /// Nodes labelled DirichletHole for hole j.
  const std::vector<int>& hole_ring(int j) const { return hole_rings_[j]; }
  int count(NodeKind kind, int hole = -1) const;

  /// The four axis neighbours (+x, -x, +y, -y); -1 where outside the array.
  std::array<int, 4> neighbors(int node) const;

  /// Index of the nearest grid node to p (may be exterior).
  int nearest_node(Point p) const;

  friend ClassifiedGrid build_grid(const PerforatedDomain& domain, double h);

 private:
  double h_ = 0.0;
  Point origin_;
  int nx_ = 0;
  int ny_ = 0;
  PerforatedDomain domain_;
  std::vector<NodeLabel> labels_;
  std::vector<int> unknown_of_node_;
  std::vector<int> unknown_nodes_;
  std::vector<std::vector<int>> hole_rings_;
};

using GridPtr = std::shared_ptr<const ClassifiedGrid>;

/// Labels every node by nearest-node snapping: nodes within h/2 of a
/// boundary circle become Dirichlet nodes. Requires h <= delta / 4 when the
/// domain has holes.
ClassifiedGrid build_grid(const PerforatedDomain& domain, double h);
GridPtr make_grid(const PerforatedDomain& domain, double h);

/// Counter-clockwise cyclic sequence of 8-connected grid nodes.
struct DiscreteLoop {
  std::vector<int> nodes;
  Point center;
  double radius = 0.0;
};

/// Rasterizes the circle dB(center, R) onto the grid (nearest node along a
/// fine angular sweep). Throws LoopBroken unless every loop node is Interior
/// or DirichletOuter.
DiscreteLoop circle_loop(const ClassifiedGrid& grid, Point center, double radius);

/// Sum of signed angle increments of the loop node positions about `about`,
/// divided by 2 pi.
double geometric_winding(const ClassifiedGrid& grid, const DiscreteLoop& loop, Point about);

/// Oriented edges and unit cells of the lattice, built once per grid.
///
/// Edge e runs from tail to head along +x or +y. An edge belongs to the full
/// domain when both endpoints are non-exterior; it is a "state" edge when both
/// endpoints lie in the closure of the perforated domain. Cells are lattice
/// squares whose four corners are non-exterior, indexed by their lower-left
/// node.
class LatticeTopology {
 public:
  explicit LatticeTopology(GridPtr grid);

  const ClassifiedGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  int edge_count() const { return static_cast<int>(edge_tail_.size()); }
  int cell_count() const { return static_cast<int>(cell_corner_.size()); }
  int state_node_count() const { return static_cast<int>(state_nodes_.size()); }
  int domain_node_count() const { return static_cast<int>(domain_nodes_.size()); }

  int tail(int e) const { return edge_tail_[e]; }
  int head(int e) const { return edge_head_[e]; }
  bool horizontal(int e) const { return edge_horizontal_[e] != 0; }
  bool state_edge(int e) const { return edge_state_[e] != 0; }
  const std::vector<int>& state_edges() const { return state_edge_list_; }

  /// Edge index leaving node along +x / +y, -1 if absent.
  int edge_xplus(int node) const { return xplus_[node]; }
  int edge_yplus(int node) const { return yplus_[node]; }
  /// Edge between two axis-adjacent nodes with its orientation sign relative
  /// to a -> b; {-1, 0} if absent.
  std::array<int, 2> edge_between(int a, int b) const;

  /// Lower-left corner node of cell c; its edges bottom/right/top/left.
  int cell_corner(int c) const { return cell_corner_[c]; }
  std::array<int, 4> cell_edges(int c) const { return cell_edges_[c]; }
  /// Cell index for a lower-left node, -1 if not a domain cell.
  int cell_of_corner(int node) const { return cell_of_node_[node]; }

  /// Order-parameter nodes (closure of the perforated domain).
  int state_index(int node) const { return state_of_node_[node]; }
  int state_node(int s) const { return state_nodes_[s]; }
  /// All non-exterior nodes.
  int domain_index(int node) const { return domain_of_node_[node]; }
  int domain_node(int d) const { return domain_nodes_[d]; }

 private:
  GridPtr grid_;
  std::vector<int> edge_tail_, edge_head_;
  std::vector<std::uint8_t> edge_horizontal_, edge_state_;
  std::vector<int> state_edge_list_;
  std::vector<int> xplus_, yplus_;
  std::vector<int> cell_corner_;
  std::vector<std::array<int, 4>> cell_edges_;
  std::vector<int> cell_of_node_;
  std::vector<int> state_nodes_, state_of_node_;
  std::vector<int> domain_nodes_, domain_of_node_;
};

using TopologyPtr = std::shared_ptr<const LatticeTopology>;

/// Oriented edge walk (edge, sign) around a loop. Diagonal steps go through
/// the corner whose two edges are state edges, falling back to domain edges;
/// throws LoopBroken when neither corner is usable.
std::vector<std::array<int, 2>> loop_edges(const LatticeTopology& topology, const DiscreteLoop& loop);

/// Debug dump: x,y,label rows for every node.
void write_label_csv(std::ostream& os, const ClassifiedGrid& grid);

const char* to_string(NodeKind kind);

}  // namespace glpin
