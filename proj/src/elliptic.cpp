#include "glpin/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <variant>

#include "glpin/error.hpp"

namespace glpin {

ScalarField::ScalarField(GridPtr grid, double fill) : grid_(std::move(grid)) {
  values_.assign(grid_->node_count(), 0.0);
  for (int n = 0; n < grid_->node_count(); ++n)
    if (!grid_->is_exterior(n)) values_[n] = fill;
}

double ScalarField::interpolate(Point p) const {
  const ClassifiedGrid& g = *grid_;
  const double h = g.spacing();
  const double fx = (p.x - g.origin().x) / h;
  const double fy = (p.y - g.origin().y) / h;
  int i = static_cast<int>(std::floor(fx));
  int j = static_cast<int>(std::floor(fy));
  if (!g.in_range(i, j) || !g.in_range(i + 1, j + 1))
    throw Error(ErrorCode::DomainError, "interpolation point outside the grid");
  const double tx = fx - i, ty = fy - j;
  const int n00 = g.index(i, j), n10 = n00 + 1, n01 = n00 + g.nx(), n11 = n01 + 1;
  for (int n : {n00, n10, n01, n11})
    if (g.is_exterior(n)) throw Error(ErrorCode::DomainError, "interpolation cell touches exterior nodes");
  return (1 - tx) * (1 - ty) * values_[n00] + tx * (1 - ty) * values_[n10] + (1 - tx) * ty * values_[n01] +
         tx * ty * values_[n11];
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (int n = 0; n < grid_->node_count(); ++n)
    if (!grid_->is_exterior(n)) m = std::max(m, std::abs(values_[n]));
  return m;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
    y[r] = s;
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(rows, 0.0);
  for (int r = 0; r < rows; ++r) d[r] = entry(r, r);
  return d;
}

double CsrMatrix::entry(int r, int c) const {
  double s = 0.0;
  for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
    if (col[k] == c) s += val[k];
  return s;
}

CgStats pcg(const CsrMatrix& a, std::span<const double> rhs, std::span<double> x, double tol, int max_iter) {
  const int n = a.rows;
  CgStats stats;
  if (n == 0) return stats;
  const std::vector<double> diag = a.diagonal();
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(x, r);
  for (int i = 0; i < n; ++i) r[i] = rhs[i] - r[i];

  double bnorm = std::sqrt(std::inner_product(rhs.begin(), rhs.end(), rhs.begin(), 0.0));
  if (bnorm == 0.0) bnorm = 1.0;
  double rnorm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
  stats.residual = rnorm / bnorm;
  if (stats.residual <= tol) return stats;

  for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  for (int it = 1; it <= max_iter; ++it) {
    a.multiply(p, ap);
    const double alpha = rz / std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    double rr = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr += r[i] * r[i];
    }
    stats.iterations = it;
    stats.residual = std::sqrt(rr) / bnorm;
    if (stats.residual <= tol) return stats;
    for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw Error(ErrorCode::NoConvergence, "CG stopped after " + std::to_string(stats.iterations) +
                                            " iterations with relative residual " + std::to_string(stats.residual));
}

namespace {

// Smallest t > 0 with |p + t e - c| = rho; `leaving` selects the exit root.
double ray_circle(Point p, Point e, Point c, double rho, bool leaving) {
  const double dx = p.x - c.x, dy = p.y - c.y;
  const double b = dx * e.x + dy * e.y;
  const double disc = b * b - (dx * dx + dy * dy - rho * rho);
  if (disc < 0.0) return -1.0;
  const double s = std::sqrt(disc);
  return leaving ? -b + s : -b - s;
}

double ray_rectangle(Point p, Point e, const Rectangle& r) {
  double t = INFINITY;
  if (e.x > 0) t = std::min(t, (r.hi.x - p.x) / e.x);
  if (e.x < 0) t = std::min(t, (r.lo.x - p.x) / e.x);
  if (e.y > 0) t = std::min(t, (r.hi.y - p.y) / e.y);
  if (e.y < 0) t = std::min(t, (r.lo.y - p.y) / e.y);
  return t;
}

}  // namespace

BoundaryCut boundary_cut(const ClassifiedGrid& g, int p, int q) {
  const double h = g.spacing();
  const Point a = g.position(p), b = g.position(q);
  const Point e{(b.x - a.x) / h, (b.y - a.y) / h};
  const NodeLabel& lab = g.label(q);
  double t = -1.0, sp = 0.0, sq = 0.0;
  if (lab.kind == NodeKind::DirichletHole) {
    const Point c = g.domain().holes[lab.hole];
    const double rho = g.domain().delta;
    t = ray_circle(a, e, c, rho, false);
    sp = rho - distance(a, c);
    sq = rho - distance(b, c);
  } else if (lab.kind == NodeKind::DirichletOuter) {
    if (const auto* d = std::get_if<Disk>(&g.domain().outer))
      t = ray_circle(a, e, d->center, d->radius, true);
    else
      t = ray_rectangle(a, e, std::get<Rectangle>(g.domain().outer));
    sp = signed_distance(g.domain().outer, a);
    sq = signed_distance(g.domain().outer, b);
  } else {
    return {1.0, b};
  }
  if (!(t > 0.0) || !std::isfinite(t)) {
    // The edge runs past the curve: place the crossing on the linear
    // interpolant of the signed distance.
    if (!(sq > sp)) return {1.0, b};
    t = h * sp / (sp - sq);
  }
  const double theta = std::max(t / h, 0.25);
  return {theta, {a.x + theta * h * e.x, a.y + theta * h * e.y}};
}

namespace {

LinearSystem assemble(const GridPtr& grid, const ScalarField& f, const BoundaryFunction& outer_bc,
                      std::span<const double> hole_bc, EllipticOperator op) {
  const ClassifiedGrid& g = *grid;
  if (static_cast<int>(hole_bc.size()) != g.domain().hole_count())
    throw Error(ErrorCode::DomainError, "one boundary value per hole required");
  if (f.grid().node_count() != g.node_count()) throw Error(ErrorCode::GridMismatch, "source on a different grid");

  LinearSystem sys;
  sys.op = op;
  sys.lift = ScalarField(grid, 0.0);
  for (int n = 0; n < g.node_count(); ++n) {
    const NodeLabel& lab = g.label(n);
    switch (lab.kind) {
      case NodeKind::DirichletOuter: sys.lift[n] = outer_bc ? outer_bc(g.position(n)) : 0.0; break;
      case NodeKind::DirichletHole:
      case NodeKind::HoleInterior: sys.lift[n] = hole_bc[lab.hole]; break;
      default: break;
    }
  }

  const double h2 = g.spacing() * g.spacing();
  const double mass = op == EllipticOperator::Screened ? h2 : 0.0;
  CsrBuilder builder;
  sys.rhs.assign(g.unknown_count(), 0.0);
  for (int k = 0; k < g.unknown_count(); ++k) {
    const int node = g.node_of_unknown(k);
    double rhs = h2 * f[node];
    std::array<std::pair<int, double>, 5> row{};
    int count = 0;
    row[count++] = {k, 4.0 + mass};
    for (int nb : g.neighbors(node)) {
      const int u = g.unknown(nb);
      if (u >= 0) {
        row[count++] = {u, -1.0};
        continue;
      }
      const BoundaryCut cut = boundary_cut(g, node, nb);
      double value = sys.lift[nb];
      if (g.kind(nb) == NodeKind::DirichletOuter && outer_bc) value = outer_bc(cut.point);
      rhs += value / cut.theta;
      row[0].second -= 1.0 - 1.0 / cut.theta;
    }
    std::sort(row.begin(), row.begin() + count);
    for (int c = 0; c < count; ++c) builder.add(row[c].first, row[c].second);
    builder.end_row();
    sys.rhs[k] = rhs;
  }
  sys.matrix = builder.finish();
  return sys;
}

}  // namespace

LinearSystem assemble_screened(const GridPtr& grid, const ScalarField& f, const BoundaryFunction& outer_bc,
                               std::span<const double> hole_bc) {
  return assemble(grid, f, outer_bc, hole_bc, EllipticOperator::Screened);
}

LinearSystem assemble_poisson(const GridPtr& grid, const ScalarField& f, const BoundaryFunction& outer_bc,
                              std::span<const double> hole_bc) {
  return assemble(grid, f, outer_bc, hole_bc, EllipticOperator::Poisson);
}

CgResult solve_cg(const LinearSystem& system, double tol, int max_iter) {
  const ClassifiedGrid& g = system.lift.grid();
  std::vector<double> x(g.unknown_count(), 0.0);
  CgResult out{system.lift, {}};
  out.stats = pcg(system.matrix, system.rhs, x, tol, max_iter);
  for (int k = 0; k < g.unknown_count(); ++k) out.field[g.node_of_unknown(k)] = x[k];
  return out;
}

ScalarField solve_xi0(const PerforatedDomain& domain, const GridPtr& grid, SolveOptions opts) {
  GridPtr plain = grid;
  if (grid->domain().hole_count() > 0) plain = make_grid(domain.without_holes(), grid->spacing());
  const ScalarField zero(plain, 0.0);
  const auto sys = assemble_screened(plain, zero, [](Point) { return 1.0; }, {});
  return solve_cg(sys, opts.tol, opts.max_iter).field;
}

ScalarField solve_basis_zeta(const PerforatedDomain& domain, const GridPtr& grid, int i, SolveOptions opts) {
  if (i < 0 || i >= domain.hole_count()) throw Error(ErrorCode::DomainError, "hole index out of range");
  std::vector<double> bc(domain.hole_count(), 0.0);
  bc[i] = 1.0;
  const ScalarField zero(grid, 0.0);
  const auto sys = assemble_screened(grid, zero, [](Point) { return 0.0; }, bc);
  return solve_cg(sys, opts.tol, opts.max_iter).field;
}

namespace {

double ring_flux(const ScalarField& field, auto&& is_ring, const BoundaryFunction& bc) {
  const ClassifiedGrid& g = field.grid();
  double sum = 0.0;
  for (int k = 0; k < g.unknown_count(); ++k) {
    const int p = g.node_of_unknown(k);
    for (int q : g.neighbors(p)) {
      if (q < 0 || !is_ring(g.label(q))) continue;
      const BoundaryCut cut = boundary_cut(g, p, q);
      const double ub = bc ? bc(cut.point) : field[q];
      sum += (ub - field[p]) / cut.theta;
    }
  }
  return sum;
}

}  // namespace

double boundary_flux(const ScalarField& field, int hole) {
  return ring_flux(
      field, [hole](const NodeLabel& l) { return l.kind == NodeKind::DirichletHole && l.hole == hole; }, {});
}

double outer_flux(const ScalarField& field, const BoundaryFunction& bc) {
  return ring_flux(field, [](const NodeLabel& l) { return l.kind == NodeKind::DirichletOuter; }, bc);
}

namespace {

std::vector<std::uint8_t> region_mask(const ClassifiedGrid& g, Region region) {
  std::vector<std::uint8_t> mask(g.node_count(), 0);
  for (int n = 0; n < g.node_count(); ++n)
    mask[n] = region == Region::Full ? !g.is_exterior(n) : g.in_perforated(n);
  return mask;
}

void check_same_grid(const ScalarField& a, const ScalarField& b) {
  if (a.grid_ptr() != b.grid_ptr() &&
      (a.grid().nx() != b.grid().nx() || a.grid().ny() != b.grid().ny() || a.grid().spacing() != b.grid().spacing()))
    throw Error(ErrorCode::GridMismatch, "inner product of fields on different grids");
}

}  // namespace

double l2_inner(const ScalarField& a, const ScalarField& b, std::span<const std::uint8_t> mask) {
  check_same_grid(a, b);
  const ClassifiedGrid& g = a.grid();
  double s = 0.0;
  for (int n = 0; n < g.node_count(); ++n)
    if (mask[n]) s += a[n] * b[n];
  return s * g.spacing() * g.spacing();
}

double h1_inner(const ScalarField& a, const ScalarField& b, std::span<const std::uint8_t> mask) {
  check_same_grid(a, b);
  const ClassifiedGrid& g = a.grid();
  double grad = 0.0;
  for (int n = 0; n < g.node_count(); ++n) {
    if (!mask[n]) continue;
    const auto [i, j] = g.coords(n);
    if (i + 1 < g.nx() && mask[n + 1]) grad += (a[n + 1] - a[n]) * (b[n + 1] - b[n]);
    if (j + 1 < g.ny() && mask[n + g.nx()]) grad += (a[n + g.nx()] - a[n]) * (b[n + g.nx()] - b[n]);
  }
  return grad + l2_inner(a, b, mask);
}

double l2_inner(const ScalarField& a, const ScalarField& b, Region region) {
  return l2_inner(a, b, region_mask(a.grid(), region));
}

double h1_inner(const ScalarField& a, const ScalarField& b, Region region) {
  return h1_inner(a, b, region_mask(a.grid(), region));
}

RadialProfile::RadialProfile(std::vector<double> r, std::vector<double> u, bool log_grid)
    : r_(std::move(r)), u_(std::move(u)), log_grid_(log_grid) {}

double RadialProfile::value(double r) const {
  if (r < r_.front() - 1e-14 || r > r_.back() + 1e-14)
    throw Error(ErrorCode::DomainError, "radius outside the radial profile");
  const auto coord = [&](double x) { return log_grid_ ? std::log(x) : x; };
  const double s0 = coord(r_.front());
  const double ds = (coord(r_.back()) - s0) / static_cast<double>(r_.size() - 1);
  const double t = (coord(std::max(r, r_.front() > 0 ? r_.front() : r)) - s0) / ds;
  // Quadratic interpolation on the three nearest nodes.
  int k = static_cast<int>(std::lround(t));
  k = std::clamp(k, 1, static_cast<int>(r_.size()) - 2);
  const double x = t - k;
  return u_[k - 1] * 0.5 * x * (x - 1) + u_[k] * (1 - x * x) + u_[k + 1] * 0.5 * x * (x + 1);
}

double RadialProfile::inner_derivative() const {
  if (log_grid_) {
    const double ds = std::log(r_[1] / r_[0]);
    return (-3 * u_[0] + 4 * u_[1] - u_[2]) / (2 * ds) / r_[0];
  }
  const double dr = r_[1] - r_[0];
  return (-3 * u_[0] + 4 * u_[1] - u_[2]) / (2 * dr);
}

double RadialProfile::outer_derivative() const {
  const std::size_t n = r_.size();
  if (log_grid_) {
    const double ds = std::log(r_[n - 1] / r_[n - 2]);
    return (3 * u_[n - 1] - 4 * u_[n - 2] + u_[n - 3]) / (2 * ds) / r_[n - 1];
  }
  const double dr = r_[n - 1] - r_[n - 2];
  return (3 * u_[n - 1] - 4 * u_[n - 2] + u_[n - 3]) / (2 * dr);
}

RadialProfile solve_radial(double r_in, double r_out, RadialEquation eq, double bc_in, double bc_out,
                           const std::function<double(double)>& f, int points) {
  if (!(r_in >= 0.0) || !(r_out > r_in) || points < 5)
    throw Error(ErrorCode::DomainError, "radial problem requires 0 <= r_in < r_out");
  const double c = eq == RadialEquation::Screened ? 1.0 : 0.0;
  const int n = points;
  std::vector<double> r(n);
  std::vector<long double> lower(n, 0.0L), diag(n, 0.0L), upper(n, 0.0L), rhs(n, 0.0L);
  const bool log_grid = r_in > 0.0;

  if (log_grid) {
    // -u_ss + c r^2 u = r^2 f with s = log r.
    const double s0 = std::log(r_in), ds = (std::log(r_out) - s0) / (n - 1);
    for (int i = 0; i < n; ++i) r[i] = std::exp(s0 + i * ds);
    r.front() = r_in;
    r.back() = r_out;
    for (int i = 1; i < n - 1; ++i) {
      const long double r2 = static_cast<long double>(r[i]) * r[i];
      lower[i] = upper[i] = -1.0L / (static_cast<long double>(ds) * ds);
      diag[i] = -2.0L * lower[i] + c * r2;
      rhs[i] = f ? r2 * f(r[i]) : 0.0;
    }
  } else {
    const double dr = r_out / (n - 1);
    for (int i = 0; i < n; ++i) r[i] = i * dr;
    r.back() = r_out;
    // Regularity at the origin: Lap u(0) = 4 (u_1 - u_0) / dr^2.
    upper[0] = -4.0L / (static_cast<long double>(dr) * dr);
    diag[0] = -upper[0] + c;
    rhs[0] = f ? f(0.0) : 0.0;
    for (int i = 1; i < n - 1; ++i) {
      const long double rp = r[i] + 0.5L * dr, rm = r[i] - 0.5L * dr;
      lower[i] = -rm / (static_cast<long double>(r[i]) * dr * dr);
      upper[i] = -rp / (static_cast<long double>(r[i]) * dr * dr);
      diag[i] = -(lower[i] + upper[i]) + c;
      rhs[i] = f ? f(r[i]) : 0.0;
    }
  }
  if (log_grid) {
    diag[0] = 1.0;
    rhs[0] = bc_in;
  }
  diag[n - 1] = 1.0;
  rhs[n - 1] = bc_out;

  // Thomas algorithm, in extended precision to keep the 1e4-point sweep clean.
  std::vector<long double> cp(n, 0.0L), dp(n, 0.0L);
  std::vector<double> u(n, 0.0);
  cp[0] = upper[0] / diag[0];
  dp[0] = rhs[0] / diag[0];
  for (int i = 1; i < n; ++i) {
    const long double m = diag[i] - lower[i] * cp[i - 1];
    cp[i] = upper[i] / m;
    dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
  }
  long double next = dp[n - 1];
  u[n - 1] = static_cast<double>(next);
  for (int i = n - 2; i >= 0; --i) {
    next = dp[i] - cp[i] * next;
    u[i] = static_cast<double>(next);
  }
  return RadialProfile(std::move(r), std::move(u), log_grid);
}

void write_field_csv(std::ostream& os, const ScalarField& field) {
  const ClassifiedGrid& g = field.grid();
  os << "x,y,value\n";
  os.precision(17);
  for (int n = 0; n < g.node_count(); ++n) {
    if (g.is_exterior(n)) continue;
    const Point p = g.position(n);
    os << p.x << ',' << p.y << ',' << field[n] << '\n';
  }
}

}  // namespace glpin
