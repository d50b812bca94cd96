#include "glpin/london.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "glpin/bessel.hpp"
#include "glpin/error.hpp"

namespace glpin {

namespace {

constexpr double kPi = std::numbers::pi;

double hole_area(const PerforatedDomain& d) { return kPi * d.delta * d.delta; }

EnergyBreakdown field_energy(const ScalarField& h, std::span<const double> H, double h_ext) {
  const ClassifiedGrid& g = h.grid();
  const double h2 = g.spacing() * g.spacing();
  EnergyBreakdown e;
  for (int k = 0; k < g.unknown_count(); ++k) {
    const int p = g.node_of_unknown(k);
    for (int q : g.neighbors(p)) {
      if (g.unknown(q) >= 0) {
        if (q > p) e.gradient_term += (h[q] - h[p]) * (h[q] - h[p]);
        continue;
      }
      const BoundaryCut cut = boundary_cut(g, p, q);
      const double ub = g.kind(q) == NodeKind::DirichletHole ? H[g.label(q).hole] : h_ext;
      e.gradient_term += (ub - h[p]) * (ub - h[p]) / cut.theta;
    }
    e.field_term += h2 * (h[p] - h_ext) * (h[p] - h_ext);
  }
  // Dirichlet rings straddle the boundary: half of each node cell lies in the
  // perforated domain.
  for (int j = 0; j < g.domain().hole_count(); ++j) {
    const double dh = H[j] - h_ext;
    e.field_term += (0.5 * h2 * static_cast<double>(g.hole_ring(j).size()) + hole_area(g.domain())) * dh * dh;
  }
  e.gradient_term *= 0.5;
  e.field_term *= 0.5;
  e.total = e.gradient_term + e.field_term;
  return e;
}

std::vector<double> to_real(std::span<const int> d) { return {d.begin(), d.end()}; }

}  // namespace

double LondonSolution::sigma() const { return h_ext / std::abs(std::log(delta)); }

LondonBasis::LondonBasis(const PerforatedDomain& domain, GridPtr grid, double h_ext, SolveOptions opts)
    : domain_(domain), grid_(std::move(grid)), h_ext_(h_ext) {
  if (!std::isfinite(h_ext)) throw Error(ErrorCode::DomainError, "external field must be finite");
  const int n = domain_.hole_count();
  const ScalarField zero(grid_, 0.0);
  const std::vector<double> zeros(n, 0.0);
  h0_ = solve_cg(assemble_screened(grid_, zero, [h_ext](Point) { return h_ext; }, zeros), opts.tol, opts.max_iter)
            .field;
  for (int j = 0; j < n; ++j) zeta_.push_back(solve_basis_zeta(domain_, grid_, j, opts));

  m_.resize(n, n);
  flux0_.resize(n);
  for (int j = 0; j < n; ++j) {
    flux0_(j) = boundary_flux(h0_, j);
    for (int k = 0; k < n; ++k) m_(j, k) = boundary_flux(zeta_[k], j) + (j == k ? hole_area(domain_) : 0.0);
  }
  if (n > 0) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_);
    const auto& s = svd.singularValues();
    cond_ = s(n - 1) > 0.0 ? s(0) / s(n - 1) : INFINITY;
    if (!(cond_ <= 1e12))
      throw Error(ErrorCode::SingularFluxSystem, "flux matrix condition number " + std::to_string(cond_));
    m_solver_.compute(m_);
  }
}

std::vector<double> LondonBasis::hole_values(std::span<const double> d) const {
  const int n = hole_count();
  if (static_cast<int>(d.size()) != n) throw Error(ErrorCode::DomainError, "one degree per hole required");
  if (n == 0) return {};
  Eigen::VectorXd rhs(n);
  for (int j = 0; j < n; ++j) rhs(j) = 2.0 * kPi * d[j] - flux0_(j);
  const Eigen::VectorXd H = m_solver_.solve(rhs);
  return {H.data(), H.data() + n};
}

ScalarField LondonBasis::field(std::span<const double> H) const {
  ScalarField h = h0_;
  auto out = h.values();
  for (std::size_t j = 0; j < H.size(); ++j) {
    const auto z = zeta_[j].values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += H[j] * z[k];
  }
  return h;
}

LondonSolution LondonBasis::solve(std::span<const int> d) const {
  const std::vector<double> real = to_real(d);
  LondonSolution sol;
  sol.H = hole_values(real);
  sol.h = field(sol.H);
  sol.D.assign(d.begin(), d.end());
  sol.delta = domain_.delta;
  sol.h_ext = h_ext_;
  return sol;
}

EnergyBreakdown LondonBasis::energy(std::span<const double> d) const {
  const std::vector<double> H = hole_values(d);
  return field_energy(field(H), H, h_ext_);
}

LondonSolution solve_london(const PerforatedDomain& domain, const GridPtr& grid, double h_ext,
                            std::span<const int> d, SolveOptions opts) {
  return LondonBasis(domain, grid, h_ext, opts).solve(d);
}

EnergyBreakdown london_energy(const LondonSolution& sol) { return field_energy(sol.h, sol.H, sol.h_ext); }

double QuadraticEnergyForm::evaluate(std::span<const double> d) const {
  const Eigen::Map<const Eigen::VectorXd> v(d.data(), static_cast<Eigen::Index>(d.size()));
  return 0.5 * v.dot(Q * v) + b.dot(v) + c;
}

double QuadraticEnergyForm::evaluate(std::span<const int> d) const {
  const std::vector<double> real = to_real(d);
  return evaluate(std::span<const double>(real));
}

Eigen::VectorXd QuadraticEnergyForm::vertex() const { return -Q.ldlt().solve(b); }

QuadraticEnergyForm energy_quadratic_form(const LondonBasis& basis) {
  const int n = basis.hole_count();
  auto l = [&](std::vector<double> d) { return basis.energy(d).total; };
  std::vector<double> zero(n, 0.0);
  QuadraticEnergyForm form;
  form.Q.resize(n, n);
  form.b.resize(n);
  form.c = l(zero);
  std::vector<double> single(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> e = zero;
    e[i] = 1.0;
    single[i] = l(e);
    e[i] = 2.0;
    form.Q(i, i) = l(e) - 2.0 * single[i] + form.c;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<double> e = zero;
      e[i] = e[j] = 1.0;
      form.Q(i, j) = form.Q(j, i) = l(e) - single[i] - single[j] + form.c;
    }
  for (int i = 0; i < n; ++i) form.b(i) = single[i] - form.c - 0.5 * form.Q(i, i);
  return form;
}

QuadraticEnergyForm energy_quadratic_form(const PerforatedDomain& domain, const GridPtr& grid, double h_ext) {
  return energy_quadratic_form(LondonBasis(domain, grid, h_ext));
}

DegreeMinimum minimize_degrees(const QuadraticEnergyForm& form, int box_radius) {
  const int n = form.size();
  if (box_radius < 1) throw Error(ErrorCode::DomainError, "box radius must be at least 1");
  DegreeMinimum out;
  if (n == 0) {
    out.energy = out.runner_up = form.c;
    return out;
  }
  const Eigen::VectorXd v = form.vertex();
  DegreeVector centre(n), d(n);
  for (int i = 0; i < n; ++i) centre[i] = static_cast<int>(std::lround(v(i)));
  for (int i = 0; i < n; ++i) d[i] = centre[i] - box_radius;

  double best = INFINITY, second = INFINITY;
  DegreeVector arg;
  while (true) {
    const double e = form.evaluate(std::span<const int>(d));
    if (e < best) {
      second = best;
      best = e;
      arg = d;
    } else if (e < second) {
      second = e;
    }
    int i = 0;
    while (i < n && d[i] == centre[i] + box_radius) {
      d[i] = centre[i] - box_radius;
      ++i;
    }
    if (i == n) break;
    ++d[i];
  }
  for (int i = 0; i < n; ++i)
    if (std::abs(arg[i] - centre[i]) == box_radius)
      throw Error(ErrorCode::BoxTooSmall, "argmin on the search box surface; enlarge the radius");
  out.D = arg;
  out.energy = best;
  out.runner_up = second;
  out.is_unique = !(second - best < 1e-6 * std::abs(best));
  return out;
}

std::vector<double> degree_vertex_estimate(const ScalarField& xi0, const PerforatedDomain& domain, double sigma) {
  std::vector<double> out;
  for (const Point& a : domain.holes) out.push_back(sigma * (1.0 - xi0.interpolate(a)));
  return out;
}

DegreeVector predicted_degrees(const ScalarField& xi0, const PerforatedDomain& domain, double sigma) {
  const std::vector<double> t = degree_vertex_estimate(xi0, domain, sigma);
  DegreeVector d;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (std::abs(t[j] - std::floor(t[j]) - 0.5) < 1e-9)
      throw HoleError(ErrorCode::AtThreshold, static_cast<int>(j),
                      "sigma (1 - xi0) = " + std::to_string(t[j]) + " is a half-integer");
    d.push_back(static_cast<int>(std::lround(t[j])));
  }
  return d;
}

std::vector<Threshold> threshold_set(const ScalarField& xi0, const PerforatedDomain& domain, double sigma_max) {
  std::vector<Threshold> out;
  for (int j = 0; j < domain.hole_count(); ++j) {
    const double s = 1.0 - xi0.interpolate(domain.holes[j]);
    if (!(s > 0.0)) continue;
    for (int k = 0; (k + 0.5) / s <= sigma_max; ++k) out.push_back({(k + 0.5) / s, j, k});
  }
  std::sort(out.begin(), out.end(), [](const Threshold& a, const Threshold& b) {
    return a.sigma != b.sigma ? a.sigma < b.sigma : a.hole < b.hole;
  });
  return out;
}

ScalarField h2_ansatz(const PerforatedDomain& domain, const GridPtr& grid, std::span<const int> d) {
  if (static_cast<int>(d.size()) != domain.hole_count())
    throw Error(ErrorCode::DomainError, "one degree per hole required");
  const ClassifiedGrid& g = *grid;
  const double R = domain.isolation_radius();
  const double k0_delta = bessel_k0(domain.delta);
  auto cutoff = [R](double r) {
    const double t = std::clamp((r - 0.25 * R) / (0.25 * R), 0.0, 1.0);
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  };
  ScalarField out(grid, 0.0);
  for (int n = 0; n < g.node_count(); ++n) {
    if (g.is_exterior(n)) continue;
    const NodeLabel& lab = g.label(n);
    double v = 0.0;
    for (int j = 0; j < domain.hole_count(); ++j) {
      if (d[j] == 0) continue;
      const double r = distance(g.position(n), domain.holes[j]);
      if (r >= 0.5 * R) continue;
      const bool on_hole = lab.hole == j && lab.kind != NodeKind::Interior;
      const double theta = on_hole || r <= domain.delta ? k0_delta : bessel_k0(r);
      v += d[j] * theta * cutoff(r);
    }
    out[n] = v;
  }
  return out;
}

double circulation_radius(const PerforatedDomain& domain, double spacing) {
  const double r = std::min(2.0 * domain.delta, 0.5 * (domain.delta + domain.isolation_radius()));
  return std::max(r, domain.delta + 3.0 * spacing);
}

double loop_circulation(const LatticeTopology& topo, std::span<const double> edge_values, const DiscreteLoop& loop) {
  double s = 0.0;
  for (const auto& [e, sign] : loop_edges(topo, loop)) s += sign * edge_values[e];
  return s;
}

S1Minimizer reconstruct_s1_minimizer(const LondonSolution& sol, const TopologyPtr& topology) {
  const LatticeTopology& topo = *topology;
  const ClassifiedGrid& g = topo.grid();
  if (&g != &sol.h.grid()) throw Error(ErrorCode::GridMismatch, "topology built on a different grid");
  const PerforatedDomain& domain = g.domain();
  const int nx = g.nx();
  const double h2 = g.spacing() * g.spacing();
  const auto& h = sol.h;

  S1Minimizer out;
  out.topology = topology;

  // Stream function: sum_n (Pi_n - Pi_c) = h^2 h_cell, Pi = 0 off the domain.
  const int nc = topo.cell_count();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(nc);
  for (int c = 0; c < nc; ++c) {
    const int corner = topo.cell_corner(c);
    const double hc = 0.25 * (h[corner] + h[corner + 1] + h[corner + nx] + h[corner + nx + 1]);
    rhs(c) = -h2 * hc;
    trip.emplace_back(c, c, 4.0);
    for (int nb : {corner + 1, corner - 1, corner + nx, corner - nx}) {
      const int other = nb >= 0 && nb < g.node_count() ? topo.cell_of_corner(nb) : -1;
      if (other >= 0) trip.emplace_back(c, other, -1.0);
    }
  }
  Eigen::SparseMatrix<double> lap(nc, nc);
  lap.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> cell_solver(lap);
  if (cell_solver.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "stream function factorisation failed");
  const Eigen::VectorXd pi = nc > 0 ? Eigen::VectorXd(cell_solver.solve(rhs)) : Eigen::VectorXd();
  out.stream.assign(pi.data(), pi.data() + nc);

  auto cell_value = [&](int corner) {
    if (corner < 0 || corner >= g.node_count()) return 0.0;
    const int c = topo.cell_of_corner(corner);
    return c >= 0 ? pi(c) : 0.0;
  };
  const int ne = topo.edge_count();
  out.A.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e) {
    const int t = topo.tail(e);
    out.A[e] = topo.horizontal(e) ? cell_value(t - nx) - cell_value(t) : cell_value(t) - cell_value(t - 1);
  }

  // Centred differences of h, one-sided next to exterior nodes.
  auto diff = [&](int node, int step) {
    const int a = node + step, b = node - step;
    const bool fa = a >= 0 && a < g.node_count() && !g.is_exterior(a);
    const bool fb = b >= 0 && b < g.node_count() && !g.is_exterior(b);
    if (fa && fb) return 0.5 * (h[a] - h[b]);
    if (fa) return h[a] - h[node];
    if (fb) return h[node] - h[b];
    return 0.0;
  };

  const int ns = topo.state_node_count();
  out.current.assign(ne, 0.0);
  std::vector<Eigen::Triplet<double>> gtrip;
  Eigen::VectorXd grhs = Eigen::VectorXd::Zero(ns);
  auto multivalued = [&](int a, int b) {
    double s = 0.0;
    for (int j = 0; j < domain.hole_count(); ++j) {
      if (sol.D[j] == 0) continue;
      const Point pa = g.position(a), pb = g.position(b), c = domain.holes[j];
      s += sol.D[j] * wrap_angle(std::atan2(pb.y - c.y, pb.x - c.x) - std::atan2(pa.y - c.y, pa.x - c.x));
    }
    return s;
  };
  for (int e : topo.state_edges()) {
    const int p = topo.tail(e), q = topo.head(e);
    const double grad_perp =
        topo.horizontal(e) ? -0.5 * (diff(p, nx) + diff(q, nx)) : 0.5 * (diff(p, 1) + diff(q, 1));
    out.current[e] = out.A[e] - grad_perp;
    const double target = out.current[e] - multivalued(p, q);
    const int sp = topo.state_index(p), sq = topo.state_index(q);
    gtrip.emplace_back(sp, sp, 1.0);
    gtrip.emplace_back(sq, sq, 1.0);
    gtrip.emplace_back(sp, sq, -1.0);
    gtrip.emplace_back(sq, sp, -1.0);
    grhs(sq) += target;
    grhs(sp) -= target;
  }
  // Pin the first state node.
  gtrip.emplace_back(0, 0, 1.0);
  out.phase.assign(g.node_count(), 0.0);
  if (ns > 0) {
    Eigen::SparseMatrix<double> glap(ns, ns);
    glap.setFromTriplets(gtrip.begin(), gtrip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> phase_solver(glap);
    if (phase_solver.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "phase factorisation failed");
    const Eigen::VectorXd psi = phase_solver.solve(grhs);
    for (int s = 0; s < ns; ++s) {
      const int node = topo.state_node(s);
      double theta = 0.0;
      const Point p = g.position(node);
      for (int j = 0; j < domain.hole_count(); ++j) {
        const Point c = domain.holes[j];
        theta += sol.D[j] * std::atan2(p.y - c.y, p.x - c.x);
      }
      out.phase[node] = theta + psi(s);
    }
  }

  const double radius = circulation_radius(domain, g.spacing());
  for (int j = 0; j < domain.hole_count(); ++j) {
    const DiscreteLoop loop = circle_loop(g, domain.holes[j], radius);
    const double circ = loop_circulation(topo, out.current, loop);
    out.circulation.push_back(circ);
    if (std::abs(circ - 2.0 * kPi * sol.D[j]) > 0.1 * 2.0 * kPi)
      throw HoleError(ErrorCode::NonIntegerCirculation, j,
                      "circulation " + std::to_string(circ) + " does not match degree " + std::to_string(sol.D[j]));
  }
  return out;
}

}  // namespace glpin
