#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "glpin/geometry.hpp"
#include "glpin/london.hpp"

namespace glpin {

using cplx = std::complex<double>;

struct GLParams {
  double eps = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double h_ext = 0.0;

  /// h_ext = sigma |log delta|.
  static GLParams make(double delta, double sigma, double eps);
};

/// Order parameter on the state nodes (closure of the perforated domain) and
/// edge line integrals of the vector potential on every edge of the outer
/// region.
struct GLState {
  TopologyPtr topology;
  std::vector<cplx> u;     // indexed by state index
  std::vector<double> A;   // indexed by edge
  GLParams params;

  const LatticeTopology& topo() const { return *topology; }
  const ClassifiedGrid& grid() const { return topology->grid(); }
  /// u at a grid node; zero off the state nodes.
  cplx at(int node) const;
};

GLState make_state(const TopologyPtr& topology, const GLParams& params, cplx fill = 1.0);

struct GLEnergyBreakdown {
  double kinetic = 0.0;
  double potential = 0.0;
  double magnetic = 0.0;
  double total = 0.0;
};

/// Quadrature weight of a node in the perforated domain: h^2 inside, h^2/2 on
/// the boundary rings, 0 elsewhere.
double node_weight(const ClassifiedGrid& grid, int node);

/// Kinetic: 1/2 sum over state edges |u_q e^{-i A_pq} - u_p|^2. Potential:
/// sum_p w_p (1 - |u_p|^2)^2 / (4 eps^2). Magnetic: 1/2 sum over cells
/// h^2 (circ/h^2 - h_ext)^2 with circ = bottom + right - top - left.
GLEnergyBreakdown gl_energy(const GLState& state);

struct GLGradient {
  std::vector<cplx> du;  // d/dRe u + i d/dIm u, per state node
  std::vector<double> dA;
  double max_norm() const;
};

GLGradient gl_gradient(const GLState& state);

/// u -> u e^{i phi}, A_pq -> A_pq + phi_q - phi_p, phi given per grid node.
GLState gauge_transform(const GLState& state, std::span<const double> phi);

/// Discrete divergence sum_e (+-) A_e at every grid node (zero off the domain).
std::vector<double> lattice_divergence(const LatticeTopology& topology, std::span<const double> A);

/// Factorised graph Laplacian on the domain nodes, reusable across
/// projections on one topology.
class CoulombProjector {
 public:
  explicit CoulombProjector(TopologyPtr topology);
  ~CoulombProjector();
  CoulombProjector(CoulombProjector&&) noexcept;
  CoulombProjector& operator=(CoulombProjector&&) noexcept;

  /// Gauge function phi (per grid node) with div(A + grad phi) = 0.
  std::vector<double> gauge_function(std::span<const double> A) const;
  GLState project(const GLState& state) const;

 private:
  struct Impl;
  TopologyPtr topology_;
  std::unique_ptr<Impl> impl_;
};

GLState project_coulomb_gauge(const GLState& state);

struct MinimizeOptions {
  int max_iters = 20000;
  double grad_tol = 0.0;       // <= 0: 1e-8 max(1, energy)
  int history = 10;
  double armijo = 1e-4;
  double min_step = 1e-12;
  int refactor_every = 250;
};

struct TracePoint {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  GLState state;
  std::vector<TracePoint> trace;
  bool converged = false;
  bool line_search_stalled = false;
  int iterations = 0;
  double grad_tol = 0.0;
};

/// Preconditioned L-BFGS with Armijo backtracking in modulus/phase/edge
/// variables; the preconditioner is a sparse Cholesky factor of the
/// phase/vector-potential Hessian at |u| = 1 plus a diagonal for the modulus.
/// Energy never increases across accepted steps. The returned state is in the
/// Coulomb gauge.
MinimizeResult minimize_gl(const GLState& init, const MinimizeOptions& options = {});

struct SeedOptions {
  double collar = 3.0;  // collar width in units of eps
  double floor = 0.1;   // modulus at the hole boundary
};

/// u = m(x) e^{i Phi}, A = A_D; the modulus m rises from `floor` at the hole
/// boundaries to 1 across the collar.
GLState seed_from_london(const LondonSolution& sol, const S1Minimizer& s1, const GLParams& params,
                         const SeedOptions& options = {});
GLState seed_from_london(const LondonSolution& sol, const TopologyPtr& topology, const GLParams& params,
                         const SeedOptions& options = {});

/// The S^1 pair (e^{i Phi}, A_D) as a lattice state.
GLState s1_state(const S1Minimizer& s1, const GLParams& params);

struct DecompositionReport {
  double gl_total = 0.0;
  double london_total = 0.0;    // lattice energy of the S^1 pair
  double london_field = 0.0;    // energy from the induced-field formula
  double F_term = 0.0;
  double cross_term = 0.0;
  double residual = 0.0;
};

/// v = u conj(u_D), B = A - A_D; F[v, B] and the cross term
/// -sum_e (grad_perp h)_e Im(conj(v_p) v_q) on the lattice.
DecompositionReport energy_decomposition_check(const GLState& gl, const LondonSolution& sol, const S1Minimizer& s1);
DecompositionReport energy_decomposition_check(const GLState& gl, const LondonSolution& sol);

/// Node dump x,y,re,im and edge dump tail_x,tail_y,head_x,head_y,A.
void write_state_csv(std::ostream& nodes, std::ostream& edges, const GLState& state);
void write_trace_csv(std::ostream& os, std::span<const TracePoint> trace);

}  // namespace glpin
