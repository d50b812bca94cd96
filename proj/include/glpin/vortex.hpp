#pragma once

#include <span>
#include <string>
#include <vector>

#include "glpin/geometry.hpp"
#include "glpin/gl.hpp"
#include "glpin/london.hpp"

namespace glpin {

inline constexpr double kModulusFloor = 1e-8;

/// Sum of wrapped phase increments arg(u_next conj(u_cur)) around the loop
/// over 2 pi, rounded. `u` is indexed by grid node. Throws ZeroOnLoop when
/// |u| < 1e-8 at a loop node and AmbiguousWinding when the raw sum is more
/// than 0.2 from an integer.
int winding_number(std::span<const cplx> u, const DiscreteLoop& loop);
int winding_number(const GLState& state, const DiscreteLoop& loop);

/// u of a state spread onto grid nodes (zero off the state nodes).
std::vector<cplx> node_field(const GLState& state);

struct HoleDegrees {
  std::vector<double> radii;          // multiples of delta
  std::vector<DegreeVector> degrees;  // one vector per radius
  bool consistent = true;             // all radii agree

  const DegreeVector& first() const { return degrees.front(); }
};

HoleDegrees hole_degrees(const GLState& state, std::span<const double> radii = std::vector<double>{2.0, 4.0});

/// Gauge-invariant vortex number of every cell whose corners all carry u:
/// (sum_edges wrap(arg u_head - arg u_tail - A) + circ A) / 2 pi. Zero for
/// other cells.
std::vector<int> plaquette_vorticity(const GLState& state);

struct BadRegion {
  Point center;
  double radius = 0.0;
  int degree = 0;
  bool degree_measured = false;  // loop winding available; otherwise enclosed vorticity
  double min_modulus = 1.0;
};

/// Nodes with |u| <= 1 - theta, together with the corners of cells carrying
/// lattice vorticity, clustered by 8-connectivity; each cluster is wrapped in
/// its smallest enclosing disk padded by h/2 and overlapping disks are merged
/// until pairwise disjoint.
std::vector<BadRegion> find_bad_regions(const GLState& state, double theta = 0.5);

struct VortexReport {
  DegreeVector hole_degrees;
  HoleDegrees hole_degree_detail;
  std::vector<BadRegion> bad_regions;
  int bulk_degree_sum = 0;  // sum of |degree| over regions inside the perforated domain
};

VortexReport analyze_vortices(const GLState& state, double theta = 0.5,
                              std::span<const double> radii = std::vector<double>{2.0, 4.0});

struct BulkCheck {
  bool pass = true;
  std::vector<BadRegion> offending;
  std::string details;
};

/// Passes iff every bad region touches a hole collar (closer than 4 delta to
/// a hole centre) or has degree 0.
BulkCheck assert_no_bulk_vortices(const VortexReport& report, const PerforatedDomain& domain);

/// Smallest disk containing the given points.
Disk enclosing_disk(std::span<const Point> points);

}  // namespace glpin
