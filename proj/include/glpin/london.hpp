#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "glpin/elliptic.hpp"
#include "glpin/geometry.hpp"

namespace glpin {

using DegreeVector = std::vector<int>;

/// Induced field of the London problem with prescribed hole degrees.
struct LondonSolution {
  ScalarField h;
  std::vector<double> H;  // constant value inside each hole
  DegreeVector D;
  double delta = 0.0;
  double h_ext = 0.0;

  /// Reduced field strength h_ext / |log delta|.
  double sigma() const;
};

struct EnergyBreakdown {
  double gradient_term = 0.0;  // 1/2 int_{Omega_delta} |grad h|^2
  double field_term = 0.0;     // 1/2 int_Omega (h - h_ext)^2
  double total = 0.0;
};

/// l(D) = 1/2 D^T Q D + b^T D + c.
struct QuadraticEnergyForm {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
  double c = 0.0;

  int size() const { return static_cast<int>(b.size()); }
  double evaluate(std::span<const double> d) const;
  double evaluate(std::span<const int> d) const;
  /// Real minimiser -Q^{-1} b.
  Eigen::VectorXd vertex() const;
};

/// Basis fields for the flux-constrained problem on one grid and one h_ext:
/// h0 (outer value h_ext, holes 0) and zeta_j. Solutions for any D are
/// superpositions, so a single basis serves every degree vector.
class LondonBasis {
 public:
  LondonBasis(const PerforatedDomain& domain, GridPtr grid, double h_ext, SolveOptions opts = {});

  const GridPtr& grid_ptr() const { return grid_; }
  const PerforatedDomain& domain() const { return domain_; }
  double h_ext() const { return h_ext_; }
  int hole_count() const { return domain_.hole_count(); }

  const ScalarField& h0() const { return h0_; }
  const ScalarField& zeta(int j) const { return zeta_[j]; }
  /// Flux matrix M_jk = flux_j(zeta_k) + delta_jk |omega_j|.
  const Eigen::MatrixXd& flux_matrix() const { return m_; }
  double flux_condition() const { return cond_; }

  /// Hole constants for real-valued degrees.
  std::vector<double> hole_values(std::span<const double> d) const;
  LondonSolution solve(std::span<const int> d) const;
  /// Energy of the superposed field for real-valued degrees.
  EnergyBreakdown energy(std::span<const double> d) const;

 private:
  ScalarField field(std::span<const double> H) const;

  PerforatedDomain domain_;
  GridPtr grid_;
  double h_ext_;
  ScalarField h0_;
  std::vector<ScalarField> zeta_;
  Eigen::MatrixXd m_;
  Eigen::VectorXd flux0_;
  Eigen::PartialPivLU<Eigen::MatrixXd> m_solver_;
  double cond_ = 1.0;
};

/// Throws SingularFluxSystem when the flux matrix has condition number above
/// 1e12.
LondonSolution solve_london(const PerforatedDomain& domain, const GridPtr& grid, double h_ext,
                            std::span<const int> d, SolveOptions opts = {});

/// Gradient term over the perforated domain (cut edges weighted by 1/theta),
/// field term over the whole outer region with h = H_j on holes.
EnergyBreakdown london_energy(const LondonSolution& sol);

QuadraticEnergyForm energy_quadratic_form(const LondonBasis& basis);
QuadraticEnergyForm energy_quadratic_form(const PerforatedDomain& domain, const GridPtr& grid, double h_ext);

struct DegreeMinimum {
  DegreeVector D;
  double energy = 0.0;
  double runner_up = 0.0;  // second-best energy in the box
  bool is_unique = true;
};

/// Exhaustive search of the integer box of the given radius around the
/// rounded vertex. Throws BoxTooSmall when the argmin touches the box surface.
DegreeMinimum minimize_degrees(const QuadraticEnergyForm& form, int box_radius = 2);

/// sigma (1 - xi0(a_j)) per hole, xi0 read bilinearly at the hole centres.
std::vector<double> degree_vertex_estimate(const ScalarField& xi0, const PerforatedDomain& domain, double sigma);

/// Nearest integer to sigma (1 - xi0(a_j)). Throws AtThreshold (a HoleError)
/// within 1e-9 of a half-integer.
DegreeVector predicted_degrees(const ScalarField& xi0, const PerforatedDomain& domain, double sigma);

struct Threshold {
  double sigma = 0.0;
  int hole = 0;
  int k = 0;  // crossing from k to k + 1
};

/// All (k + 1/2) / (1 - xi0(a_j)) <= sigma_max, ascending.
std::vector<Threshold> threshold_set(const ScalarField& xi0, const PerforatedDomain& domain, double sigma_max);

/// sum_j D_j theta_j phi_j: K0 truncated at delta, times a quintic
/// smoothstep cutoff from 1 at R/4 to 0 at R/2, R the isolation radius.
ScalarField h2_ansatz(const PerforatedDomain& domain, const GridPtr& grid, std::span<const int> d);

/// Lattice realisation of the S^1 minimiser behind a London solution.
struct S1Minimizer {
  TopologyPtr topology;
  std::vector<double> A;        // line integral of the vector potential per edge
  std::vector<double> phase;    // per node; zero off the perforated domain
  std::vector<double> current;  // target phase increment A - grad_perp h per edge
  std::vector<double> stream;   // cell-centred stream function, per cell
  std::vector<double> circulation;  // of `current` around each hole
};

/// Stream function on cell centres (zero outside the domain) gives A with
/// curl A equal to the cell average of h and a discrete Coulomb gauge. The
/// phase follows from the target increments A - grad_perp h by least squares
/// on top of the multivalued sum_j D_j arg(x - a_j). Throws
/// NonIntegerCirculation when a hole circulation misses 2 pi D_j by more than
/// 0.1 * 2 pi.
S1Minimizer reconstruct_s1_minimizer(const LondonSolution& sol, const TopologyPtr& topology);

/// Sum of edge values along a loop, using the loop's edge walk.
double loop_circulation(const LatticeTopology& topology, std::span<const double> edge_values, const DiscreteLoop& loop);

/// Radius used for circulation loops around hole j.
double circulation_radius(const PerforatedDomain& domain, double spacing);

}  // namespace glpin
