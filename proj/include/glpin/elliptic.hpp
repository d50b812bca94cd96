#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "glpin/geometry.hpp"

namespace glpin {

/// Nodal field over a classified grid. Exterior entries are held at zero.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid, double fill = 0.0);

  const ClassifiedGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  double operator[](int node) const { return values_[node]; }
  double& operator[](int node) { return values_[node]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Bilinear interpolation; every corner of the containing cell must be
  /// non-exterior.
  double interpolate(Point p) const;
  /// Largest |value| over non-exterior nodes.
  double max_abs() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Compressed sparse row matrix.
struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  double entry(int r, int c) const;
};

/// Incremental builder; rows must be appended in order.
class CsrBuilder {
 public:
  void add(int c, double v) {
    m_.col.push_back(c);
    m_.val.push_back(v);
  }
  void end_row() {
    m_.row_ptr.push_back(static_cast<int>(m_.col.size()));
    ++m_.rows;
  }
  CsrMatrix finish() { return std::move(m_); }

 private:
  CsrMatrix m_;
};

struct CgStats {
  int iterations = 0;
  double residual = 0.0;  // final relative residual
};

/// Jacobi-preconditioned conjugate gradients on an SPD matrix. `x` holds the
/// initial guess on entry. Throws NoConvergence when max_iter is exceeded.
CgStats pcg(const CsrMatrix& a, std::span<const double> rhs, std::span<double> x, double tol, int max_iter);

enum class EllipticOperator { Screened, Poisson };

/// SPD system over interior unknowns; `lift` holds the imposed Dirichlet data
/// (and the constant hole values inside hole interiors).
struct LinearSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  ScalarField lift;
  EllipticOperator op = EllipticOperator::Screened;
};

using BoundaryFunction = std::function<double(Point)>;

/// Where the grid edge from an unknown node p towards a Dirichlet neighbour q
/// crosses the true boundary curve. `theta` is the crossing distance in units
/// of h; the boundary value is imposed at `point` through a linear ghost value
/// u_q = u_b / theta + (1 - 1/theta) u_p. Falls back to theta = 1 (the node
/// itself) when the edge runs tangentially.
struct BoundaryCut {
  double theta = 1.0;
  Point point;
};
BoundaryCut boundary_cut(const ClassifiedGrid& grid, int p, int q);

/// 5-point discretisation of (-Lap + 1) u = f, scaled by h^2, with the
/// Dirichlet values eliminated into the right-hand side. Edges into Dirichlet
/// nodes use the boundary cut, which keeps the matrix symmetric and lifts the
/// snapping error to second order.
LinearSystem assemble_screened(const GridPtr& grid, const ScalarField& f, const BoundaryFunction& outer_bc,
                               std::span<const double> hole_bc);
/// Same for -Lap u = f.
LinearSystem assemble_poisson(const GridPtr& grid, const ScalarField& f, const BoundaryFunction& outer_bc,
                              std::span<const double> hole_bc);

struct SolveOptions {
  double tol = 1e-12;
  int max_iter = 200000;
};

struct CgResult {
  ScalarField field;
  CgStats stats;
};

CgResult solve_cg(const LinearSystem& system, double tol, int max_iter);

/// Screened problem on the unperforated outer region with unit boundary data.
/// Holes of `grid` are ignored: the solve runs on the same lattice without
/// them.
ScalarField solve_xi0(const PerforatedDomain& domain, const GridPtr& grid, SolveOptions opts = {});

/// Basis field: 1 on hole i, 0 on the other holes and on the outer boundary.
ScalarField solve_basis_zeta(const PerforatedDomain& domain, const GridPtr& grid, int i, SolveOptions opts = {});

/// -(discrete integral of du/dnu over dω_j), nu the outward normal of the hole.
/// Evaluated as the sum of (u_b - u_p) / theta over cut edges into the hole
/// ring, which is the flux seen by the assembled operator. The hole value u_b
/// is read from the ring.
double boundary_flux(const ScalarField& field, int hole);
/// Discrete integral of du/dnu over the outer boundary, nu pointing outwards.
/// Boundary values come from `bc` at the crossing points, or from the ring
/// nodes when `bc` is empty.
double outer_flux(const ScalarField& field, const BoundaryFunction& bc = {});

enum class Region { Perforated, Full };

/// L2 and H1 inner products. Nodal quadrature with weight h^2; gradients are
/// differences at edge midpoints (edges with both ends in the region).
double l2_inner(const ScalarField& a, const ScalarField& b, Region region = Region::Perforated);
double h1_inner(const ScalarField& a, const ScalarField& b, Region region = Region::Perforated);
double l2_inner(const ScalarField& a, const ScalarField& b, std::span<const std::uint8_t> mask);
double h1_inner(const ScalarField& a, const ScalarField& b, std::span<const std::uint8_t> mask);

enum class RadialEquation { Screened, Poisson };

/// High-accuracy solution of -u'' - u'/r + c u = f on [r_in, r_out] (c = 1 for
/// the screened equation, 0 for Poisson). Uses a uniform grid in log r when
/// r_in > 0 and a uniform grid in r with a regularity condition at the origin
/// otherwise.
class RadialProfile {
 public:
  RadialProfile(std::vector<double> r, std::vector<double> u, bool log_grid);

  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& u() const { return u_; }
  double value(double r) const;
  /// du/dr at r_in (second-order one-sided).
  double inner_derivative() const;
  /// du/dr at r_out (second-order one-sided).
  double outer_derivative() const;

 private:
  std::vector<double> r_, u_;
  bool log_grid_;
};

RadialProfile solve_radial(double r_in, double r_out, RadialEquation eq, double bc_in, double bc_out,
                           const std::function<double(double)>& f = {}, int points = 10000);

/// Debug dump: x,y,value for non-exterior nodes.
void write_field_csv(std::ostream& os, const ScalarField& field);

}  // namespace glpin
