#include "glpin/gl.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include "glpin/error.hpp"

namespace glpin {

namespace {

// Neumaier summation; the optimizer compares energies that differ in the
// last few digits near convergence.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

double cell_circulation(const LatticeTopology& topo, std::span<const double> A, int c) {
  const auto e = topo.cell_edges(c);
  return A[e[0]] + A[e[1]] - A[e[2]] - A[e[3]];
}

void check_state(const GLState& s) {
  if (!s.topology) throw Error(ErrorCode::GridMismatch, "state has no topology");
  if (static_cast<int>(s.u.size()) != s.topo().state_node_count() ||
      static_cast<int>(s.A.size()) != s.topo().edge_count())
    throw Error(ErrorCode::GridMismatch, "state arrays do not match the topology");
  if (!(s.params.eps > 0.0)) throw Error(ErrorCode::DomainError, "eps must be positive");
}

std::vector<double> potential_weights(const GLState& s) {
  const LatticeTopology& topo = s.topo();
  std::vector<double> w(topo.state_node_count());
  const double scale = 1.0 / (4.0 * s.params.eps * s.params.eps);
  for (int k = 0; k < topo.state_node_count(); ++k) w[k] = scale * node_weight(s.grid(), topo.state_node(k));
  return w;
}

}  // namespace

GLParams GLParams::make(double delta, double sigma, double eps) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::DomainError, "delta must lie in (0, 1)");
  if (!(eps > 0.0)) throw Error(ErrorCode::DomainError, "eps must be positive");
  return {eps, delta, sigma, sigma * std::abs(std::log(delta))};
}

cplx GLState::at(int node) const {
  const int s = topology->state_index(node);
  return s >= 0 ? u[s] : cplx{};
}

GLState make_state(const TopologyPtr& topology, const GLParams& params, cplx fill) {
  GLState s;
  s.topology = topology;
  s.params = params;
  s.u.assign(topology->state_node_count(), fill);
  s.A.assign(topology->edge_count(), 0.0);
  return s;
}

double node_weight(const ClassifiedGrid& grid, int node) {
  const double h2 = grid.spacing() * grid.spacing();
  switch (grid.kind(node)) {
    case NodeKind::Interior:
      return h2;
    case NodeKind::DirichletOuter:
    case NodeKind::DirichletHole:
      return 0.5 * h2;
    default:
      return 0.0;
  }
}

GLEnergyBreakdown gl_energy(const GLState& state) {
  check_state(state);
  const LatticeTopology& topo = state.topo();
  const double h2 = state.grid().spacing() * state.grid().spacing();
  Accumulator kin, pot, mag;
  for (int e : topo.state_edges()) {
    const cplx up = state.u[topo.state_index(topo.tail(e))];
    const cplx uq = state.u[topo.state_index(topo.head(e))];
    kin.add(0.5 * std::norm(uq * std::polar(1.0, -state.A[e]) - up));
  }
  const auto w = potential_weights(state);
  for (int k = 0; k < topo.state_node_count(); ++k) {
    const double r = 1.0 - std::norm(state.u[k]);
    pot.add(w[k] * r * r);
  }
  for (int c = 0; c < topo.cell_count(); ++c) {
    const double r = cell_circulation(topo, state.A, c) - h2 * state.params.h_ext;
    mag.add(0.5 * r * r / h2);
  }
  GLEnergyBreakdown out;
  out.kinetic = kin.value();
  out.potential = pot.value();
  out.magnetic = mag.value();
  out.total = out.kinetic + out.potential + out.magnetic;
  return out;
}

double GLGradient::max_norm() const {
  double m = 0.0;
  for (const cplx& g : du) m = std::max({m, std::abs(g.real()), std::abs(g.imag())});
  for (double g : dA) m = std::max(m, std::abs(g));
  return m;
}

GLGradient gl_gradient(const GLState& state) {
  check_state(state);
  const LatticeTopology& topo = state.topo();
  const double h2 = state.grid().spacing() * state.grid().spacing();
  GLGradient g;
  g.du.assign(topo.state_node_count(), cplx{});
  g.dA.assign(topo.edge_count(), 0.0);
  for (int e : topo.state_edges()) {
    const int sp = topo.state_index(topo.tail(e)), sq = topo.state_index(topo.head(e));
    const cplx z = std::polar(1.0, -state.A[e]);
    const cplx w = state.u[sq] * z - state.u[sp];
    g.du[sp] -= w;
    g.du[sq] += w * std::conj(z);
    g.dA[e] -= std::imag(std::conj(state.u[sp]) * state.u[sq] * z);
  }
  const auto w = potential_weights(state);
  for (int k = 0; k < topo.state_node_count(); ++k)
    g.du[k] += -4.0 * w[k] * (1.0 - std::norm(state.u[k])) * state.u[k];
  for (int c = 0; c < topo.cell_count(); ++c) {
    const double r = (cell_circulation(topo, state.A, c) - h2 * state.params.h_ext) / h2;
    const auto e = topo.cell_edges(c);
    g.dA[e[0]] += r;
    g.dA[e[1]] += r;
    g.dA[e[2]] -= r;
    g.dA[e[3]] -= r;
  }
  return g;
}

GLState gauge_transform(const GLState& state, std::span<const double> phi) {
  check_state(state);
  const LatticeTopology& topo = state.topo();
  if (static_cast<int>(phi.size()) != state.grid().node_count())
    throw Error(ErrorCode::GridMismatch, "gauge function must be given per grid node");
  GLState out = state;
  for (int k = 0; k < topo.state_node_count(); ++k) out.u[k] *= std::polar(1.0, phi[topo.state_node(k)]);
  for (int e = 0; e < topo.edge_count(); ++e) out.A[e] += phi[topo.head(e)] - phi[topo.tail(e)];
  return out;
}

std::vector<double> lattice_divergence(const LatticeTopology& topo, std::span<const double> A) {
  std::vector<double> div(topo.grid().node_count(), 0.0);
  for (int e = 0; e < topo.edge_count(); ++e) {
    div[topo.tail(e)] += A[e];
    div[topo.head(e)] -= A[e];
  }
  return div;
}

struct CoulombProjector::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
};

CoulombProjector::CoulombProjector(TopologyPtr topology) : topology_(std::move(topology)), impl_(std::make_unique<Impl>()) {
  const LatticeTopology& topo = *topology_;
  const int nd = topo.domain_node_count();
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < topo.edge_count(); ++e) {
    const int a = topo.domain_index(topo.tail(e)), b = topo.domain_index(topo.head(e));
    trip.emplace_back(a, a, 1.0);
    trip.emplace_back(b, b, 1.0);
    trip.emplace_back(a, b, -1.0);
    trip.emplace_back(b, a, -1.0);
  }
  if (nd > 0) trip.emplace_back(0, 0, 1.0);
  Eigen::SparseMatrix<double> lap(nd, nd);
  lap.setFromTriplets(trip.begin(), trip.end());
  impl_->solver.compute(lap);
  if (impl_->solver.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "gauge Laplacian factorisation failed");
}

CoulombProjector::~CoulombProjector() = default;
CoulombProjector::CoulombProjector(CoulombProjector&&) noexcept = default;
CoulombProjector& CoulombProjector::operator=(CoulombProjector&&) noexcept = default;

std::vector<double> CoulombProjector::gauge_function(std::span<const double> A) const {
  const LatticeTopology& topo = *topology_;
  const int nd = topo.domain_node_count();
  // Laplacian phi = -div A with the divergence taken as G^T A.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nd);
  for (int e = 0; e < topo.edge_count(); ++e) {
    rhs(topo.domain_index(topo.tail(e))) += A[e];
    rhs(topo.domain_index(topo.head(e))) -= A[e];
  }
  std::vector<double> phi(topo.grid().node_count(), 0.0);
  if (nd == 0) return phi;
  const Eigen::VectorXd sol = impl_->solver.solve(rhs);
  for (int d = 0; d < nd; ++d) phi[topo.domain_node(d)] = sol(d);
  return phi;
}

GLState CoulombProjector::project(const GLState& state) const {
  if (state.topology.get() != topology_.get()) throw Error(ErrorCode::GridMismatch, "projector built for another topology");
  return gauge_transform(state, gauge_function(state.A));
}

GLState project_coulomb_gauge(const GLState& state) {
  check_state(state);
  return CoulombProjector(state.topology).project(state);
}

namespace {

// Polar parametrisation x = [rho (ns), phi (ns), A (ne)].
class PolarProblem {
 public:
  explicit PolarProblem(const GLState& s)
      : topo_(s.topo()), ns_(topo_.state_node_count()), ne_(topo_.edge_count()), h2_(s.grid().spacing() * s.grid().spacing()),
        h_ext_(s.params.h_ext), w_(potential_weights(s)), degree_(ns_, 0) {
    for (int e : topo_.state_edges()) {
      ++degree_[topo_.state_index(topo_.tail(e))];
      ++degree_[topo_.state_index(topo_.head(e))];
    }
  }

  int size() const { return 2 * ns_ + ne_; }

  Eigen::VectorXd pack(const GLState& s) const {
    Eigen::VectorXd x(size());
    for (int k = 0; k < ns_; ++k) {
      x(k) = std::abs(s.u[k]);
      x(ns_ + k) = std::arg(s.u[k]);
    }
    for (int e = 0; e < ne_; ++e) x(2 * ns_ + e) = s.A[e];
    return x;
  }

  void unpack(const Eigen::VectorXd& x, GLState& s) const {
    for (int k = 0; k < ns_; ++k) s.u[k] = std::polar(1.0, x(ns_ + k)) * x(k);
    for (int e = 0; e < ne_; ++e) s.A[e] = x(2 * ns_ + e);
  }

  // Energy and polar gradient; also the max-norm of the Cartesian gradient.
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& g, double& cart_norm) const {
    g.setZero(size());
    const double* rho = x.data();
    const double* phi = x.data() + ns_;
    const double* A = x.data() + 2 * ns_;
    double* grho = g.data();
    double* gphi = g.data() + ns_;
    double* gA = g.data() + 2 * ns_;
    Accumulator energy;
    for (int e : topo_.state_edges()) {
      const int p = topo_.state_index(topo_.tail(e)), q = topo_.state_index(topo_.head(e));
      const double gam = phi[q] - phi[p] - A[e];
      const double c = std::cos(gam), s = std::sin(gam);
      const double half = std::sin(0.5 * gam);
      energy.add(0.5 * (rho[p] - rho[q]) * (rho[p] - rho[q]) + 2.0 * rho[p] * rho[q] * half * half);
      grho[p] += rho[p] - rho[q] * c;
      grho[q] += rho[q] - rho[p] * c;
      const double t = rho[p] * rho[q] * s;
      gphi[q] += t;
      gphi[p] -= t;
      gA[e] -= t;
    }
    for (int k = 0; k < ns_; ++k) {
      const double r = 1.0 - rho[k] * rho[k];
      energy.add(w_[k] * r * r);
      grho[k] -= 4.0 * w_[k] * rho[k] * r;
    }
    for (int c = 0; c < topo_.cell_count(); ++c) {
      const auto ed = topo_.cell_edges(c);
      const double r = A[ed[0]] + A[ed[1]] - A[ed[2]] - A[ed[3]] - h2_ * h_ext_;
      energy.add(0.5 * r * r / h2_);
      gA[ed[0]] += r / h2_;
      gA[ed[1]] += r / h2_;
      gA[ed[2]] -= r / h2_;
      gA[ed[3]] -= r / h2_;
    }
    // Cartesian gradient e^{i phi} (d_rho + i d_phi / rho).
    cart_norm = 0.0;
    for (int k = 0; k < ns_; ++k) {
      const double tang = std::abs(rho[k]) > 1e-300 ? gphi[k] / rho[k] : 0.0;
      const cplx gc = std::polar(1.0, phi[k]) * cplx(grho[k], tang);
      cart_norm = std::max({cart_norm, std::abs(gc.real()), std::abs(gc.imag())});
    }
    for (int e = 0; e < ne_; ++e) cart_norm = std::max(cart_norm, std::abs(gA[e]));
    return energy.value();
  }

  // Diagonal for rho, sparse Cholesky for (phi, A).
  void factor(const Eigen::VectorXd& x) {
    const double* rho = x.data();
    const double* phi = x.data() + ns_;
    const double* A = x.data() + 2 * ns_;
    rho_diag_.resize(ns_);
    for (int k = 0; k < ns_; ++k) {
      const double r = std::abs(rho[k]);
      const double pot = r < 1.0 ? 4.0 * w_[k] * r * (1.0 + r) : 4.0 * w_[k] * (3.0 * r * r - 1.0);
      rho_diag_(k) = std::max(1.0, static_cast<double>(degree_[k])) + pot;
    }
    const int m = ns_ + ne_;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * topo_.state_edges().size() + 16 * topo_.cell_count() + m);
    for (int e : topo_.state_edges()) {
      const int p = topo_.state_index(topo_.tail(e)), q = topo_.state_index(topo_.head(e));
      const double gam = phi[q] - phi[p] - A[e];
      const double wt = std::max(std::max(std::abs(rho[p]), 0.1) * std::max(std::abs(rho[q]), 0.1) * std::cos(gam), 0.05);
      const int idx[3] = {q, p, ns_ + e};
      const double b[3] = {1.0, -1.0, -1.0};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) trip.emplace_back(idx[i], idx[j], wt * b[i] * b[j]);
    }
    for (int c = 0; c < topo_.cell_count(); ++c) {
      const auto ed = topo_.cell_edges(c);
      const double b[4] = {1.0, 1.0, -1.0, -1.0};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) trip.emplace_back(ns_ + ed[i], ns_ + ed[j], b[i] * b[j] / h2_);
    }
    for (int i = 0; i < m; ++i) trip.emplace_back(i, i, 1e-4);
    Eigen::SparseMatrix<double> K(m, m);
    K.setFromTriplets(trip.begin(), trip.end());
    solver_.compute(K);
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "preconditioner factorisation failed");
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z(size());
    z.head(ns_) = r.head(ns_).cwiseQuotient(rho_diag_);
    z.tail(ns_ + ne_) = solver_.solve(r.tail(ns_ + ne_));
    return z;
  }

 private:
  const LatticeTopology& topo_;
  int ns_, ne_;
  double h2_, h_ext_;
  std::vector<double> w_;
  std::vector<int> degree_;
  Eigen::VectorXd rho_diag_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace

MinimizeResult minimize_gl(const GLState& init, const MinimizeOptions& opt) {
  check_state(init);
  PolarProblem prob(init);
  MinimizeResult res;
  res.state = init;

  Eigen::VectorXd x = prob.pack(init);
  Eigen::VectorXd g(prob.size());
  double gnorm = 0.0;
  double energy = prob.evaluate(x, g, gnorm);
  prob.factor(x);

  auto tolerance = [&](double e) { return opt.grad_tol > 0.0 ? opt.grad_tol : 1e-8 * std::max(1.0, std::abs(e)); };
  res.trace.push_back({0, energy, gnorm, 0.0});

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho_hist;
  Eigen::VectorXd xn(prob.size()), gn(prob.size());
  int since_factor = 0;
  int iter = 0;
  for (; iter < opt.max_iters; ++iter) {
    res.grad_tol = tolerance(energy);
    if (gnorm <= res.grad_tol) {
      res.converged = true;
      break;
    }
    if (since_factor >= opt.refactor_every) {
      prob.factor(x);
      S.clear();
      Y.clear();
      rho_hist.clear();
      since_factor = 0;
    }
    bool accepted = false;
    double step = 1.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      // Two-loop recursion with the preconditioner as initial inverse Hessian.
      Eigen::VectorXd q = g;
      std::vector<double> alpha(S.size());
      for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
        alpha[i] = rho_hist[i] * S[i].dot(q);
        q -= alpha[i] * Y[i];
      }
      Eigen::VectorXd d = prob.apply(q);
      for (size_t i = 0; i < S.size(); ++i) {
        const double beta = rho_hist[i] * Y[i].dot(d);
        d += (alpha[i] - beta) * S[i];
      }
      d = -d;
      double slope = g.dot(d);
      if (!(slope < 0.0)) {
        d = -prob.apply(g);
        slope = g.dot(d);
        S.clear();
        Y.clear();
        rho_hist.clear();
      }
      step = 1.0;
      while (step >= opt.min_step) {
        xn = x + step * d;
        double gnorm_n = 0.0;
        const double en = prob.evaluate(xn, gn, gnorm_n);
        if (std::isfinite(en) && en <= energy + opt.armijo * step * slope) {
          const Eigen::VectorXd s = xn - x, y = gn - g;
          const double sy = s.dot(y);
          if (sy > 1e-12 * std::sqrt(s.squaredNorm() * y.squaredNorm())) {
            S.push_back(s);
            Y.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.history) {
              S.pop_front();
              Y.pop_front();
              rho_hist.pop_front();
            }
          }
          x.swap(xn);
          g.swap(gn);
          energy = en;
          gnorm = gnorm_n;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        // Retry once from a fresh factorisation and empty memory.
        prob.factor(x);
        since_factor = 0;
        S.clear();
        Y.clear();
        rho_hist.clear();
      }
    }
    if (!accepted) {
      res.line_search_stalled = true;
      break;
    }
    ++since_factor;
    res.trace.push_back({iter + 1, energy, gnorm, step});
  }
  res.iterations = iter;
  res.grad_tol = tolerance(energy);
  if (!res.converged && gnorm <= res.grad_tol) res.converged = true;
  prob.unpack(x, res.state);
  res.state = project_coulomb_gauge(res.state);
  return res;
}

GLState s1_state(const S1Minimizer& s1, const GLParams& params) {
  GLState s = make_state(s1.topology, params);
  const LatticeTopology& topo = *s1.topology;
  for (int k = 0; k < topo.state_node_count(); ++k) s.u[k] = std::polar(1.0, s1.phase[topo.state_node(k)]);
  s.A = s1.A;
  return s;
}

GLState seed_from_london(const LondonSolution& sol, const S1Minimizer& s1, const GLParams& params,
                         const SeedOptions& options) {
  GLState s = s1_state(s1, params);
  const ClassifiedGrid& g = s.grid();
  const PerforatedDomain& domain = g.domain();
  (void)sol;
  const double collar = options.collar * params.eps;
  for (int k = 0; k < s.topo().state_node_count(); ++k) {
    const Point p = g.position(s.topo().state_node(k));
    double d = 1e300;
    for (const Point& a : domain.holes) d = std::min(d, distance(p, a) - domain.delta);
    const double t = std::clamp(d / collar, 0.0, 1.0);
    s.u[k] *= options.floor + (1.0 - options.floor) * t;
  }
  return s;
}

GLState seed_from_london(const LondonSolution& sol, const TopologyPtr& topology, const GLParams& params,
                         const SeedOptions& options) {
  return seed_from_london(sol, reconstruct_s1_minimizer(sol, topology), params, options);
}

DecompositionReport energy_decomposition_check(const GLState& gl, const LondonSolution& sol, const S1Minimizer& s1) {
  check_state(gl);
  if (s1.topology.get() != gl.topology.get()) throw Error(ErrorCode::GridMismatch, "London data on another topology");
  const LatticeTopology& topo = gl.topo();
  DecompositionReport r;
  r.gl_total = gl_energy(gl).total;
  const GLState ud = s1_state(s1, gl.params);
  r.london_total = gl_energy(ud).total;
  r.london_field = london_energy(sol).total;

  GLState vb = gl;
  vb.params.h_ext = 0.0;
  for (int k = 0; k < topo.state_node_count(); ++k) vb.u[k] = gl.u[k] * std::conj(ud.u[k]);
  for (int e = 0; e < topo.edge_count(); ++e) vb.A[e] = gl.A[e] - ud.A[e];
  r.F_term = gl_energy(vb).total;

  Accumulator cross;
  for (int e : topo.state_edges()) {
    const cplx vp = vb.u[topo.state_index(topo.tail(e))], vq = vb.u[topo.state_index(topo.head(e))];
    const double grad_perp = s1.A[e] - s1.current[e];
    cross.add(-grad_perp * std::imag(std::conj(vp) * vq));
  }
  r.cross_term = cross.value();
  r.residual = r.gl_total - r.london_total - r.F_term - r.cross_term;
  return r;
}

DecompositionReport energy_decomposition_check(const GLState& gl, const LondonSolution& sol) {
  return energy_decomposition_check(gl, sol, reconstruct_s1_minimizer(sol, gl.topology));
}

void write_state_csv(std::ostream& nodes, std::ostream& edges, const GLState& state) {
  const LatticeTopology& topo = state.topo();
  const ClassifiedGrid& g = state.grid();
  nodes.precision(17);
  edges.precision(17);
  nodes << "x,y,re,im\n";
  for (int k = 0; k < topo.state_node_count(); ++k) {
    const Point p = g.position(topo.state_node(k));
    nodes << p.x << ',' << p.y << ',' << state.u[k].real() << ',' << state.u[k].imag() << '\n';
  }
  edges << "tail_x,tail_y,head_x,head_y,A\n";
  for (int e = 0; e < topo.edge_count(); ++e) {
    const Point a = g.position(topo.tail(e)), b = g.position(topo.head(e));
    edges << a.x << ',' << a.y << ',' << b.x << ',' << b.y << ',' << state.A[e] << '\n';
  }
}

void write_trace_csv(std::ostream& os, std::span<const TracePoint> trace) {
  os << "iter,energy,grad_norm,step\n";
  for (const auto& t : trace) os << t.iter << ',' << t.energy << ',' << t.grad_norm << ',' << t.step << '\n';
}

}  // namespace glpin
