#include "glpin/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/json_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "glpin/error.hpp"

namespace glpin {

using nlohmann::json;
namespace pt = boost::property_tree;

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

double parse_number(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    config_error("key '" + key + "': '" + s + "' is not a number");
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size()) config_error("key '" + key + "': trailing characters in '" + s + "'");
  if (!std::isfinite(v)) config_error("key '" + key + "' must be finite");
  return v;
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c)) || seps.find(' ') == std::string::npos) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  for (auto& t : out) {
    const auto a = t.find_first_not_of(" \t"), b = t.find_last_not_of(" \t");
    t = a == std::string::npos ? std::string() : t.substr(a, b - a + 1);
  }
  out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
  return out;
}

// Numbers from either a "1, 2 3" string or a JSON array.
std::vector<double> number_list(const pt::ptree& node, const std::string& key) {
  std::vector<double> out;
  if (node.empty()) {
    for (const auto& t : split(node.data(), ", \t")) out.push_back(parse_number(t, key));
    return out;
  }
  for (const auto& [k, child] : node) {
    if (!k.empty()) config_error("key '" + key + "' must be a list");
    out.push_back(parse_number(child.data(), key));
  }
  return out;
}

Point point_value(const pt::ptree& node, const std::string& key) {
  const auto v = number_list(node, key);
  if (v.size() != 2) config_error("key '" + key + "' needs two coordinates");
  return {v[0], v[1]};
}

std::vector<Point> point_list(const pt::ptree& node, const std::string& key) {
  std::vector<Point> out;
  if (node.empty()) {
    for (const auto& item : split(node.data(), ";")) {
      pt::ptree tmp;
      tmp.put_value(item);
      out.push_back(point_value(tmp, key));
    }
    return out;
  }
  for (const auto& [k, child] : node) {
    if (!k.empty()) config_error("key '" + key + "' must be a list of points");
    out.push_back(point_value(child, key));
  }
  return out;
}

bool bool_value(const std::string& s, const std::string& key) {
  std::string t;
  for (char c : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  config_error("key '" + key + "': '" + s + "' is not a boolean");
}

template <class F>
void parallel_for(int n, int threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> xi0_at_holes(const ScalarField& xi0, const PerforatedDomain& domain) {
  std::vector<double> out;
  for (const Point& a : domain.holes) out.push_back(xi0.interpolate(a));
  return out;
}

Prediction predict_on(const RunConfig& config, const PerforatedDomain& domain, const GridPtr& grid, const ScalarField& xi0) {
  Prediction p;
  p.sigma = resolve_sigma(config, xi0);
  p.h_ext = p.sigma * std::abs(std::log(domain.delta));
  p.xi0 = xi0_at_holes(xi0, domain);
  p.vertex = degree_vertex_estimate(xi0, domain, p.sigma);
  try {
    p.predicted = predicted_degrees(xi0, domain, p.sigma);
  } catch (const HoleError& e) {
    if (e.code() != ErrorCode::AtThreshold) throw;
    p.threshold_message = e.what();
  }
  const double smax = config.threshold_sigma_max > 0.0 ? config.threshold_sigma_max : std::max(2.0 * p.sigma, 5.0);
  p.thresholds = threshold_set(xi0, domain, smax);
  (void)grid;
  return p;
}

LondonStudy london_on(const RunConfig& config, const LondonBasis& basis, double sigma) {
  LondonStudy s;
  s.sigma = sigma;
  s.h_ext = basis.h_ext();
  s.form = energy_quadratic_form(basis);
  s.flux_condition = basis.flux_condition();
  s.minimum = minimize_degrees(s.form);
  for (int j = 0; j < s.form.size(); ++j)
    for (int sgn : {-1, 1}) {
      DegreeVector d = s.minimum.D;
      d[j] += sgn;
      s.neighborhood.emplace_back(d, s.form.evaluate(std::span<const int>(d)));
    }
  if (config.degrees) {
    if (static_cast<int>(config.degrees->size()) != s.form.size())
      config_error("degrees list length does not match the number of holes");
    s.evaluated = config.degrees;
    s.evaluated_energy = s.form.evaluate(std::span<const int>(*config.degrees));
  }
  return s;
}

json degree_json(const DegreeVector& d) { return json(d); }

json thresholds_json(const std::vector<Threshold>& ts) {
  json a = json::array();
  for (const auto& t : ts) a.push_back({{"sigma", t.sigma}, {"hole", t.hole}, {"k", t.k}});
  return a;
}

json decomposition_json(const DecompositionReport& r) {
  return {{"gl_total", r.gl_total},         {"london_total", r.london_total}, {"london_field", r.london_field},
          {"F_term", r.F_term},             {"cross_term", r.cross_term},     {"residual", r.residual},
          {"relative_residual", r.gl_total != 0.0 ? r.residual / r.gl_total : 0.0}};
}

}  // namespace

int exit_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::HoleOverlap:
    case ErrorCode::HoleTooCloseToBoundary:
    case ErrorCode::NonPositiveRadius:
    case ErrorCode::ResolutionTooCoarse:
      return kExitConfig;
    case ErrorCode::DegreeMismatch:
    case ErrorCode::BulkVortexFound:
      return kExitPropertyFailed;
    default:
      return kExitNumerical;
  }
}

double RunConfig::spacing_for(double delta) const {
  return grid_h > 0.0 ? grid_h * delta / domain.delta : delta / 4.0;
}

double RunConfig::eps_for(double delta) const {
  if (eps_rule == "cube") return delta * delta * delta;
  if (eps_rule == "square") return delta * delta;
  if (eps_rule.rfind("fixed:", 0) == 0) return parse_number(eps_rule.substr(6), "eps_rule");
  config_error("unknown eps rule '" + eps_rule + "'");
}

RunConfig parse_config(const std::string& text, bool is_json) {
  pt::ptree tree;
  std::string body = text;
  if (!is_json) {
    // read_ini only knows full-line comments
    std::istringstream lines(text);
    std::ostringstream kept;
    for (std::string line; std::getline(lines, line);) {
      const auto hash = line.find('#');
      if (hash != std::string::npos && hash > 0 && line.find_first_not_of(" \t") != hash) line.erase(hash);
      kept << line << '\n';
    }
    body = kept.str();
  }
  std::istringstream in(body);
  try {
    if (is_json)
      pt::read_json(in, tree);
    else
      pt::read_ini(in, tree);
  } catch (const pt::file_parser_error& e) {
    config_error(std::string("cannot parse configuration: ") + e.message() + " at line " + std::to_string(e.line()));
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"domain", {"outer", "center", "radius", "lo", "hi", "delta", "holes"}},
      {"grid", {"h"}},
      {"field", {"sigma", "prediction", "degrees"}},
      {"model", {"eps_rule"}},
      {"optimizer", {"max_iters", "grad_tol", "history", "neighbor_seeds", "collar", "floor"}},
      {"analysis", {"radii", "theta", "threshold_sigma_max"}},
      {"sweep", {"sigma_from", "sigma_to", "sigma_step", "deltas"}},
      {"run", {"out", "seed", "threads"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) config_error("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      (void)value;
      if (!it->second.count(key)) config_error("unknown key '" + key + "' in [" + section + "]");
    }
  }

  RunConfig c;
  auto child = [&](const std::string& path) -> const pt::ptree* {
    const auto opt = tree.get_child_optional(pt::ptree::path_type(path, '.'));
    return opt ? &*opt : nullptr;
  };
  auto num = [&](const std::string& path, double& target) {
    if (const auto* n = child(path)) target = parse_number(n->data(), path);
  };

  std::string outer = "disk";
  if (const auto* n = child("domain.outer")) outer = n->data();
  if (outer == "disk") {
    Disk d;
    if (const auto* n = child("domain.center")) d.center = point_value(*n, "domain.center");
    num("domain.radius", d.radius);
    c.domain.outer = d;
  } else if (outer == "rectangle") {
    const auto* lo = child("domain.lo");
    const auto* hi = child("domain.hi");
    if (!lo || !hi) config_error("rectangle needs domain.lo and domain.hi");
    c.domain.outer = Rectangle{point_value(*lo, "domain.lo"), point_value(*hi, "domain.hi")};
  } else {
    config_error("domain.outer must be 'disk' or 'rectangle'");
  }
  num("domain.delta", c.domain.delta);
  if (const auto* n = child("domain.holes")) c.domain.holes = point_list(*n, "domain.holes");

  num("grid.h", c.grid_h);
  if (const auto* n = child("field.sigma")) c.sigma = parse_number(n->data(), "field.sigma");
  if (const auto* n = child("field.prediction")) c.prediction = parse_number(n->data(), "field.prediction");
  if (const auto* n = child("field.degrees")) {
    DegreeVector d;
    for (double v : number_list(*n, "field.degrees")) {
      if (v != std::round(v)) config_error("field.degrees must be integers");
      d.push_back(static_cast<int>(v));
    }
    c.degrees = d;
  }
  if (const auto* n = child("model.eps_rule")) c.eps_rule = n->data();

  double v = 0.0;
  if (const auto* n = child("optimizer.max_iters")) c.optimizer.max_iters = static_cast<int>(parse_number(n->data(), "max_iters"));
  num("optimizer.grad_tol", c.optimizer.grad_tol);
  if (const auto* n = child("optimizer.history")) c.optimizer.history = static_cast<int>(parse_number(n->data(), "history"));
  if (const auto* n = child("optimizer.neighbor_seeds")) c.neighbor_seeds = bool_value(n->data(), "neighbor_seeds");
  num("optimizer.collar", c.seeding.collar);
  num("optimizer.floor", c.seeding.floor);

  if (const auto* n = child("analysis.radii")) c.radii = number_list(*n, "analysis.radii");
  num("analysis.theta", c.theta);
  num("analysis.threshold_sigma_max", c.threshold_sigma_max);

  num("sweep.sigma_from", c.sigma_range.from);
  num("sweep.sigma_to", c.sigma_range.to);
  num("sweep.sigma_step", c.sigma_range.step);
  if (const auto* n = child("sweep.deltas")) c.deltas = number_list(*n, "sweep.deltas");

  if (const auto* n = child("run.out")) c.out_dir = n->data();
  if (const auto* n = child("run.seed")) {
    v = parse_number(n->data(), "run.seed");
    if (v < 0 || v != std::round(v)) config_error("run.seed must be a non-negative integer");
    c.seed = static_cast<std::uint64_t>(v);
  }
  if (const auto* n = child("run.threads")) c.threads = static_cast<int>(parse_number(n->data(), "run.threads"));
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open configuration file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool is_json = path.extension() == ".json" || (first != std::string::npos && text[first] == '{');
  return parse_config(text, is_json);
}

void validate_config(const RunConfig& c) {
  validate_domain(c.domain);
  if (!(c.domain.delta > 0.0 && c.domain.delta < 1.0)) config_error("delta must lie in (0, 1)");
  if (!(c.grid_h >= 0.0)) config_error("grid.h must be positive");
  if (c.domain.hole_count() > 0 && c.spacing() > c.domain.delta / 4.0 * (1.0 + 1e-12))
    throw Error(ErrorCode::ResolutionTooCoarse, "grid.h must not exceed delta / 4");
  const double eps = c.eps();
  if (!(eps > 0.0)) config_error("eps must be positive");
  if (eps > c.domain.delta * c.domain.delta * (1.0 + 1e-12)) config_error("eps rule must give eps <= delta^2");
  if (c.sigma && *c.sigma < 0.0) config_error("sigma must be non-negative");
  if (c.prediction && c.domain.hole_count() == 0) config_error("field.prediction needs at least one hole");
  if (!(c.sigma_range.step > 0.0)) config_error("sweep.sigma_step must be positive");
  if (c.sigma_range.to < c.sigma_range.from) config_error("sweep.sigma_to must not be below sweep.sigma_from");
  for (double d : c.deltas)
    if (!(d > 0.0 && d < 1.0)) config_error("sweep.deltas must lie in (0, 1)");
  for (double r : c.radii)
    if (!(r > 1.0)) config_error("analysis.radii must exceed 1 (multiples of delta)");
  if (c.radii.empty()) config_error("analysis.radii must not be empty");
  if (!(c.theta > 0.0 && c.theta < 1.0)) config_error("analysis.theta must lie in (0, 1)");
  if (c.optimizer.max_iters < 0 || c.optimizer.history < 1) config_error("invalid optimizer schedule");
  if (c.threads < 1) config_error("run.threads must be at least 1");
  if (c.degrees && static_cast<int>(c.degrees->size()) != c.domain.hole_count())
    config_error("field.degrees length does not match the number of holes");
}

json config_to_json(const RunConfig& c) {
  json j;
  json dom;
  if (const auto* d = std::get_if<Disk>(&c.domain.outer)) {
    dom["outer"] = "disk";
    dom["center"] = {d->center.x, d->center.y};
    dom["radius"] = d->radius;
  } else {
    const auto& r = std::get<Rectangle>(c.domain.outer);
    dom["outer"] = "rectangle";
    dom["lo"] = {r.lo.x, r.lo.y};
    dom["hi"] = {r.hi.x, r.hi.y};
  }
  dom["delta"] = c.domain.delta;
  dom["holes"] = json::array();
  for (const Point& a : c.domain.holes) dom["holes"].push_back({a.x, a.y});
  j["domain"] = dom;
  j["grid"] = {{"h", c.spacing()}};
  j["field"] = {{"sigma", c.sigma ? json(*c.sigma) : json(nullptr)},
                {"prediction", c.prediction ? json(*c.prediction) : json(nullptr)},
                {"degrees", c.degrees ? json(*c.degrees) : json(nullptr)}};
  j["model"] = {{"eps_rule", c.eps_rule}, {"eps", c.eps()}};
  j["optimizer"] = {{"max_iters", c.optimizer.max_iters},
                    {"grad_tol", c.optimizer.grad_tol},
                    {"history", c.optimizer.history},
                    {"neighbor_seeds", c.neighbor_seeds},
                    {"collar", c.seeding.collar},
                    {"floor", c.seeding.floor}};
  j["analysis"] = {{"radii", c.radii}, {"theta", c.theta}, {"threshold_sigma_max", c.threshold_sigma_max}};
  j["sweep"] = {{"sigma_from", c.sigma_range.from},
                {"sigma_to", c.sigma_range.to},
                {"sigma_step", c.sigma_range.step},
                {"deltas", c.deltas}};
  j["run"] = {{"seed", c.seed}};
  return j;
}

double resolve_sigma(const RunConfig& config, const ScalarField& xi0) {
  if (config.sigma) return *config.sigma;
  if (config.prediction) {
    const double s = 1.0 - xi0.interpolate(config.domain.holes.front());
    return *config.prediction / s;
  }
  config_error("either field.sigma or field.prediction is required");
}

Prediction run_predict(const RunConfig& config) {
  validate_config(config);
  const auto grid = make_grid(config.domain, config.spacing());
  const auto xi0 = solve_xi0(config.domain, grid);
  return predict_on(config, config.domain, grid, xi0);
}

LondonStudy run_london(const RunConfig& config) {
  validate_config(config);
  const auto grid = make_grid(config.domain, config.spacing());
  double sigma = 0.0;
  if (config.sigma) {
    sigma = *config.sigma;
  } else {
    sigma = resolve_sigma(config, solve_xi0(config.domain, grid));
  }
  const LondonBasis basis(config.domain, grid, sigma * std::abs(std::log(config.domain.delta)));
  return london_on(config, basis, sigma);
}

GLRun run_gl(const RunConfig& config) {
  validate_config(config);
  GLRun run;
  auto t0 = std::chrono::steady_clock::now();
  const PerforatedDomain& domain = config.domain;
  const auto grid = make_grid(domain, config.spacing());
  const auto topo = std::make_shared<LatticeTopology>(grid);
  const auto xi0 = solve_xi0(domain, grid);
  run.prediction = predict_on(config, domain, grid, xi0);
  run.timings["predict"] = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const LondonBasis basis(domain, grid, run.prediction.h_ext);
  run.london = london_on(config, basis, run.prediction.sigma);
  run.timings["london"] = seconds_since(t0);

  run.params = GLParams::make(domain.delta, run.prediction.sigma, config.eps());
  t0 = std::chrono::steady_clock::now();

  std::vector<std::optional<DegreeVector>> starts;
  starts.emplace_back(run.london.minimum.D);
  if (config.neighbor_seeds)
    for (const auto& [d, e] : run.london.neighborhood) {
      (void)e;
      starts.emplace_back(d);
    }
  starts.emplace_back(std::nullopt);

  const int n = static_cast<int>(starts.size());
  std::vector<SeedRun> seeds(n);
  std::vector<std::optional<MinimizeResult>> results(n);
  parallel_for(n, config.threads, [&](int i) {
    SeedRun& s = seeds[i];
    GLState init;
    if (starts[i]) {
      s.seed_degrees = *starts[i];
      std::ostringstream label;
      label << "london(";
      for (std::size_t k = 0; k < s.seed_degrees.size(); ++k) label << (k ? "," : "") << s.seed_degrees[k];
      label << ")";
      s.label = label.str();
      try {
        init = seed_from_london(basis.solve(*starts[i]), topo, run.params, config.seeding);
      } catch (const Error& e) {
        // A neighbour seed whose circulation cannot be realised is skipped.
        if (i == 0) throw;
        s.label += " skipped: " + std::string(e.what());
        return;
      }
    } else {
      s.label = "meissner";
      init = make_state(topo, run.params);
    }
    s.seed_energy = gl_energy(init).total;
    MinimizeResult r = minimize_gl(init, config.optimizer);
    s.final_energy = r.trace.back().energy;
    s.iterations = r.iterations;
    s.converged = r.converged;
    s.stalled = r.line_search_stalled;
    try {
      s.measured = hole_degrees(r.state, std::span<const double>(config.radii.data(), 1)).first();
    } catch (const Error&) {
      s.measured.clear();
    }
    results[i] = std::move(r);
  });
  run.timings["gl"] = seconds_since(t0);

  for (int i = 0; i < n; ++i) {
    if (!results[i]) continue;
    if (run.best_seed < 0 || seeds[i].final_energy < seeds[run.best_seed].final_energy) run.best_seed = i;
  }
  run.seeds = seeds;
  run.best = std::move(*results[run.best_seed]);
  run.energy = gl_energy(run.best.state);

  t0 = std::chrono::steady_clock::now();
  run.degrees = hole_degrees(run.best.state, config.radii);
  run.vortices = analyze_vortices(run.best.state, config.theta, config.radii);
  run.bulk = assert_no_bulk_vortices(run.vortices, domain);
  run.degrees_match = run.degrees.consistent && run.degrees.first() == run.london.minimum.D;

  if (domain.hole_count() > 0) {
    const LondonSolution sol = basis.solve(run.london.minimum.D);
    run.decomposition = energy_decomposition_check(run.best.state, sol);
    run.wrong_degrees = run.london.minimum.D;
    run.wrong_degrees[0] += 1;
    const LondonSolution wrong = basis.solve(run.wrong_degrees);
    run.decomposition_wrong = energy_decomposition_check(run.best.state, wrong);
  }
  run.timings["analysis"] = seconds_since(t0);
  return run;
}

SigmaSweepResult run_sweep_sigma(const RunConfig& config) {
  validate_config(config);
  const PerforatedDomain& domain = config.domain;
  const auto grid = make_grid(domain, config.spacing());
  const auto xi0 = solve_xi0(domain, grid);
  SigmaSweepResult res;
  res.xi0 = xi0_at_holes(xi0, domain);
  const auto& r = config.sigma_range;
  const int count = static_cast<int>(std::floor((r.to - r.from) / r.step + 1e-9)) + 1;
  res.rows.resize(count);
  const double log_delta = std::abs(std::log(domain.delta));
  parallel_for(count, config.threads, [&](int k) {
    SigmaSweepRow& row = res.rows[k];
    row.sigma = r.from + k * r.step;
    const LondonBasis basis(domain, grid, row.sigma * log_delta);
    const auto form = energy_quadratic_form(basis);
    row.argmin = minimize_degrees(form).D;
    const Eigen::VectorXd v = form.vertex();
    row.vertex.assign(v.data(), v.data() + v.size());
    row.estimate = degree_vertex_estimate(xi0, domain, row.sigma);
  });
  for (int j = 0; j < domain.hole_count(); ++j) {
    SigmaFlip f;
    f.hole = j;
    f.predicted = 0.5 / (1.0 - res.xi0[j]);
    f.observed = std::numeric_limits<double>::quiet_NaN();
    for (int k = 1; k < count; ++k)
      if (res.rows[k - 1].argmin[j] == 0 && res.rows[k].argmin[j] >= 1) {
        f.observed = res.rows[k].sigma;
        break;
      }
    f.within_step = std::isfinite(f.observed) && std::abs(f.observed - f.predicted) <= r.step * (1.0 + 1e-9);
    const bool asserted = f.predicted >= r.from && f.predicted <= r.to;
    if (asserted && !f.within_step) res.pass = false;
    res.flips.push_back(f);
  }
  return res;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (x.size() < 2 || den == 0.0) throw Error(ErrorCode::DomainError, "line fit needs two distinct abscissae");
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

DeltaSweepResult run_sweep_delta(const RunConfig& config) {
  validate_config(config);
  DeltaSweepResult res;
  const int nh = config.domain.hole_count();
  if (nh == 0) config_error("sweep-delta needs at least one hole");
  if (config.deltas.size() < 2) config_error("sweep-delta needs at least two deltas");
  res.rows.resize(config.deltas.size());
  // sigma is fixed across the sweep; a prediction target is resolved on the
  // first delta.
  if (config.sigma) {
    res.sigma = *config.sigma;
  } else {
    PerforatedDomain d0 = config.domain;
    d0.delta = config.deltas.front();
    res.sigma = resolve_sigma(config, solve_xi0(d0, make_grid(d0, config.spacing_for(d0.delta))));
  }
  parallel_for(static_cast<int>(config.deltas.size()), config.threads, [&](int i) {
    DeltaSweepRow& row = res.rows[i];
    PerforatedDomain d = config.domain;
    d.delta = config.deltas[i];
    validate_domain(d);
    row.delta = d.delta;
    row.h = config.spacing_for(d.delta);
    row.log_delta = std::abs(std::log(d.delta));
    const auto grid = make_grid(d, row.h);
    row.xi0 = xi0_at_holes(solve_xi0(d, grid), d);
    const LondonBasis basis(d, grid, res.sigma * row.log_delta);
    const auto form = energy_quadratic_form(basis);
    for (int j = 0; j < nh; ++j) {
      row.half_q.push_back(0.5 * form.Q(j, j));
      row.b.push_back(form.b(j));
      row.zeta_slope.push_back(boundary_flux(basis.zeta(j), j) / (2.0 * kPi * d.delta) * d.delta * row.log_delta);
    }
  });
  std::vector<double> x;
  for (const auto& row : res.rows) x.push_back(row.log_delta);
  for (int j = 0; j < nh; ++j) {
    std::vector<double> q, b;
    double xi = 0.0;
    for (const auto& row : res.rows) {
      q.push_back(row.half_q[j]);
      b.push_back(-row.b[j]);
      xi += row.xi0[j];
    }
    xi /= static_cast<double>(res.rows.size());
    res.quadratic_fit.push_back(fit_line(x, q));
    res.linear_fit.push_back(fit_line(x, b));
    res.linear_target.push_back(2.0 * kPi * res.sigma * (1.0 - xi));
    if (std::abs(res.quadratic_fit.back().slope / kPi - 1.0) > 0.20) res.quadratic_ok = false;
    if (res.sigma > 0.0 && std::abs(res.linear_fit.back().slope / res.linear_target.back() - 1.0) > 0.15)
      res.linear_ok = false;
  }
  return res;
}

json to_json(const Prediction& p) {
  json j{{"sigma", p.sigma}, {"h_ext", p.h_ext}, {"xi0", p.xi0}, {"vertex_estimate", p.vertex},
         {"thresholds", thresholds_json(p.thresholds)}};
  j["predicted"] = p.predicted ? degree_json(*p.predicted) : json(nullptr);
  if (!p.threshold_message.empty()) j["at_threshold"] = p.threshold_message;
  return j;
}

json to_json(const LondonStudy& s) {
  json q = json::array();
  for (int i = 0; i < s.form.size(); ++i) {
    json row = json::array();
    for (int k = 0; k < s.form.size(); ++k) row.push_back(s.form.Q(i, k));
    q.push_back(row);
  }
  const Eigen::VectorXd v = s.form.size() > 0 ? s.form.vertex() : Eigen::VectorXd();
  json j{{"sigma", s.sigma},
         {"h_ext", s.h_ext},
         {"Q", q},
         {"b", std::vector<double>(s.form.b.data(), s.form.b.data() + s.form.b.size())},
         {"c", s.form.c},
         {"vertex", std::vector<double>(v.data(), v.data() + v.size())},
         {"flux_condition", s.flux_condition},
         {"argmin", s.minimum.D},
         {"energy", s.minimum.energy},
         {"runner_up", s.minimum.runner_up},
         {"unique", s.minimum.is_unique}};
  json nb = json::array();
  for (const auto& [d, e] : s.neighborhood) nb.push_back({{"D", d}, {"energy", e}});
  j["neighborhood"] = nb;
  if (s.evaluated) j["evaluated"] = {{"D", *s.evaluated}, {"energy", s.evaluated_energy}};
  return j;
}

json to_json(const GLRun& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds)
    seeds.push_back({{"label", s.label},
                     {"seed_energy", s.seed_energy},
                     {"final_energy", s.final_energy},
                     {"iterations", s.iterations},
                     {"converged", s.converged},
                     {"line_search_stalled", s.stalled},
                     {"measured", s.measured}});
  json regions = json::array();
  for (const auto& b : r.vortices.bad_regions)
    regions.push_back({{"center", {b.center.x, b.center.y}},
                       {"radius", b.radius},
                       {"degree", b.degree},
                       {"degree_measured", b.degree_measured},
                       {"min_modulus", b.min_modulus}});
  json degrees = json::array();
  for (std::size_t k = 0; k < r.degrees.radii.size(); ++k)
    degrees.push_back({{"radius_over_delta", r.degrees.radii[k]}, {"degrees", r.degrees.degrees[k]}});
  const double umax = [&] {
    double m = 0.0;
    for (const cplx& v : r.best.state.u) m = std::max(m, std::abs(v));
    return m;
  }();
  json j{{"prediction", to_json(r.prediction)},
         {"london", to_json(r.london)},
         {"params", {{"eps", r.params.eps}, {"delta", r.params.delta}, {"sigma", r.params.sigma}, {"h_ext", r.params.h_ext}}},
         {"seeds", seeds},
         {"best_seed", r.seeds[r.best_seed].label},
         {"gl",
          {{"kinetic", r.energy.kinetic},
           {"potential", r.energy.potential},
           {"magnetic", r.energy.magnetic},
           {"total", r.energy.total},
           {"iterations", r.best.iterations},
           {"converged", r.best.converged},
           {"line_search_stalled", r.best.line_search_stalled},
           {"grad_tol", r.best.grad_tol},
           {"grad_norm", r.best.trace.back().grad_norm},
           {"max_modulus", umax}}},
         {"hole_degrees", degrees},
         {"radii_consistent", r.degrees.consistent},
         {"vortices", {{"bad_regions", regions}, {"bulk_degree_sum", r.vortices.bulk_degree_sum}}},
         {"bulk_check", {{"pass", r.bulk.pass}, {"details", r.bulk.details}}},
         {"degrees_match", r.degrees_match}};
  if (!r.wrong_degrees.empty()) {
    j["decomposition"] = decomposition_json(r.decomposition);
    j["decomposition_wrong_degree"] = decomposition_json(r.decomposition_wrong);
    j["decomposition_wrong_degree"]["D"] = r.wrong_degrees;
    j["F_increase"] = r.decomposition_wrong.F_term - r.decomposition.F_term;
  }
  return j;
}

json to_json(const SigmaSweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"sigma", row.sigma}, {"argmin", row.argmin}, {"vertex", row.vertex}, {"estimate", row.estimate}});
  json flips = json::array();
  for (const auto& f : r.flips)
    flips.push_back({{"hole", f.hole},
                     {"predicted", f.predicted},
                     {"observed", finite_or_null(f.observed)},
                     {"within_step", f.within_step}});
  return {{"xi0", r.xi0}, {"rows", rows}, {"flips", flips}, {"pass", r.pass}};
}

json to_json(const DeltaSweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"delta", row.delta},
                    {"h", row.h},
                    {"log_delta", row.log_delta},
                    {"xi0", row.xi0},
                    {"half_Q", row.half_q},
                    {"b", row.b},
                    {"zeta_slope_scaled", row.zeta_slope}});
  json fits = json::array();
  for (std::size_t j = 0; j < r.quadratic_fit.size(); ++j)
    fits.push_back({{"hole", j},
                    {"quadratic_slope", r.quadratic_fit[j].slope},
                    {"quadratic_target", kPi},
                    {"linear_slope", r.linear_fit[j].slope},
                    {"linear_target", r.linear_target[j]}});
  return {{"sigma", r.sigma}, {"rows", rows},          {"fits", fits},
          {"quadratic_ok", r.quadratic_ok}, {"linear_ok", r.linear_ok}};
}

json make_report(const std::string& command, const RunConfig& config, json payload, int status, json timings) {
  return {{"schema", kReportSchema},
          {"command", command},
          {"config", config_to_json(config)},
          {"result", std::move(payload)},
          {"status", {{"exit", status}, {"ok", status == kExitOk}}},
          {"timings", std::move(timings)}};
}

std::string ReportTable::csv() const {
  std::ostringstream os;
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << quote(columns[i]);
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << quote(row[i]);
    os << '\n';
  }
  return os.str();
}

ReportTable merge_reports(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) config_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "report.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [&](const fs::path& a, const fs::path& b) { return fs::relative(a, dir) < fs::relative(b, dir); });

  ReportTable t;
  t.columns = {"path",   "command", "exit",      "delta",       "log_delta", "h",      "eps",   "sigma",
               "predicted", "london_argmin", "london_energy", "gl_degrees", "gl_energy", "bulk_pass", "residual"};
  auto fmt = [](const json& v) -> std::string {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i].dump();
      return s;
    }
    return v.dump();
  };
  auto at = [](const json& j, std::initializer_list<const char*> path) -> json {
    const json* cur = &j;
    for (const char* k : path) {
      if (!cur->is_object() || !cur->contains(k)) return nullptr;
      cur = &(*cur)[k];
    }
    return *cur;
  };
  for (const auto& f : files) {
    std::ifstream in(f);
    json r;
    try {
      r = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, f.string() + ": not valid JSON");
    }
    if (!r.is_object() || r.value("schema", std::string()) != kReportSchema)
      throw Error(ErrorCode::SchemaMismatch,
                  f.string() + ": schema '" + (r.is_object() ? r.value("schema", std::string("?")) : std::string("?")) +
                      "' is not " + kReportSchema);
    const json delta = at(r, {"config", "domain", "delta"});
    const json res = r["result"];
    auto pick = [&](std::initializer_list<const char*> a, std::initializer_list<const char*> b) {
      const json x = at(res, a);
      return x.is_null() ? at(res, b) : x;
    };
    std::vector<std::string> row{
        fs::relative(f, dir).generic_string(),
        fmt(r["command"]),
        fmt(at(r, {"status", "exit"})),
        fmt(delta),
        delta.is_number() ? json(std::abs(std::log(delta.get<double>()))).dump() : "",
        fmt(at(r, {"config", "grid", "h"})),
        fmt(at(r, {"config", "model", "eps"})),
        fmt(pick({"sigma"}, {"prediction", "sigma"})),
        fmt(pick({"predicted"}, {"prediction", "predicted"})),
        fmt(pick({"argmin"}, {"london", "argmin"})),
        fmt(pick({"energy"}, {"london", "energy"})),
        fmt(at(res, {"hole_degrees"}).is_array() && !at(res, {"hole_degrees"}).empty()
                ? at(res, {"hole_degrees"})[0]["degrees"]
                : json(nullptr)),
        fmt(at(res, {"gl", "total"})),
        fmt(at(res, {"bulk_check", "pass"})),
        fmt(at(res, {"decomposition", "residual"})),
    };
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace glpin
