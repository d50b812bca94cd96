#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "glpin/error.hpp"
#include "glpin/experiment.hpp"

namespace fs = std::filesystem;
using namespace glpin;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> delta;
  std::optional<double> sigma;
  std::optional<double> grid_h;
  std::optional<std::string> eps_rule;
  std::string degrees;
};

RunConfig default_config() {
  RunConfig c;
  c.domain = PerforatedDomain{Disk{{0.0, 0.0}, 1.0}, {{0.0, 0.0}}, 0.05};
  return c;
}

RunConfig build_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? default_config() : load_config(o.config);
  if (o.delta) c.domain.delta = *o.delta;
  if (o.sigma) {
    c.sigma = *o.sigma;
    c.prediction.reset();
  }
  if (o.grid_h) c.grid_h = *o.grid_h;
  if (o.eps_rule) c.eps_rule = *o.eps_rule;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.degrees.empty()) {
    DegreeVector d;
    std::stringstream ss(o.degrees);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        d.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "--degrees expects comma-separated integers");
      }
    }
    c.degrees = d;
  }
  return c;
}

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {}

  void table(const std::string& name, const std::string& csv) { write(dir_ / "tables" / (name + ".csv"), csv); }
  void field(const std::string& name, const std::string& csv) { write(dir_ / "fields" / (name + ".csv"), csv); }
  void report(const json& r) { write(dir_ / "report.json", r.dump(2) + "\n"); }

 private:
  static void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + p.string());
    out << text;
  }
  fs::path dir_;
};

std::string join(const std::vector<int>& v, const char* sep = " ") {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? sep : "") << v[i];
  return os.str();
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int cmd_predict(const RunConfig& c, Output& out) {
  const Prediction p = run_predict(c);
  std::ostringstream xi, th;
  xi << "hole,x,y,xi0,vertex_estimate,predicted\n";
  for (int j = 0; j < c.domain.hole_count(); ++j)
    xi << j << ',' << num(c.domain.holes[j].x) << ',' << num(c.domain.holes[j].y) << ',' << num(p.xi0[j]) << ','
       << num(p.vertex[j]) << ',' << (p.predicted ? std::to_string((*p.predicted)[j]) : std::string()) << '\n';
  th << "sigma,hole,k\n";
  for (const auto& t : p.thresholds) th << num(t.sigma) << ',' << t.hole << ',' << t.k << '\n';
  out.table("xi0", xi.str());
  out.table("thresholds", th.str());
  int status = kExitOk;
  json payload = to_json(p);
  if (!p.predicted) {
    status = exit_status_for(ErrorCode::AtThreshold);
    std::cerr << p.threshold_message << '\n';
  } else {
    std::cout << "predicted degrees: " << join(*p.predicted) << '\n';
  }
  json r = make_report("predict", c, payload, status);
  if (!p.predicted) r["status"]["error"] = {{"code", "AtThreshold"}, {"message", p.threshold_message}};
  out.report(r);
  return status;
}

int cmd_london(const RunConfig& c, Output& out) {
  const LondonStudy s = run_london(c);
  std::ostringstream q, nb;
  q << "i,j,Q,b\n";
  for (int i = 0; i < s.form.size(); ++i)
    for (int k = 0; k < s.form.size(); ++k) q << i << ',' << k << ',' << num(s.form.Q(i, k)) << ',' << num(s.form.b(i)) << '\n';
  nb << "D,energy\n";
  nb << join(s.minimum.D) << ',' << num(s.minimum.energy) << '\n';
  for (const auto& [d, e] : s.neighborhood) nb << join(d) << ',' << num(e) << '\n';
  out.table("quadratic_form", q.str());
  out.table("london_energies", nb.str());
  const auto grid = make_grid(c.domain, c.spacing());
  const auto sol = solve_london(c.domain, grid, s.h_ext, s.evaluated ? *s.evaluated : s.minimum.D);
  std::ostringstream field;
  write_field_csv(field, sol.h);
  out.field("london_h", field.str());
  std::cout << "London argmin: " << join(s.minimum.D) << "  energy " << num(s.minimum.energy) << '\n';
  out.report(make_report("london", c, to_json(s), kExitOk));
  return kExitOk;
}

int cmd_gl(const RunConfig& c, Output& out, bool verify) {
  const GLRun run = run_gl(c);
  std::ostringstream seeds, regions, nodes, edges, trace;
  seeds << "label,seed_energy,final_energy,iterations,converged,measured\n";
  for (const auto& s : run.seeds)
    seeds << '"' << s.label << "\"," << num(s.seed_energy) << ',' << num(s.final_energy) << ',' << s.iterations << ','
          << s.converged << ',' << join(s.measured) << '\n';
  regions << "x,y,radius,degree,min_modulus\n";
  for (const auto& b : run.vortices.bad_regions)
    regions << num(b.center.x) << ',' << num(b.center.y) << ',' << num(b.radius) << ',' << b.degree << ','
            << num(b.min_modulus) << '\n';
  trace.precision(17);
  write_trace_csv(trace, run.best.trace);
  write_state_csv(nodes, edges, run.best.state);
  out.table("seeds", seeds.str());
  out.table("bad_regions", regions.str());
  out.table("trace", trace.str());
  out.field("gl_nodes", nodes.str());
  out.field("gl_edges", edges.str());

  json timings(run.timings);
  int status = kExitOk;
  json error;
  if (verify) {
    if (!run.degrees_match) {
      status = exit_status_for(ErrorCode::DegreeMismatch);
      error = {{"code", "DegreeMismatch"},
               {"message", "GL degrees " + join(run.degrees.first()) + " vs London argmin " + join(run.london.minimum.D)}};
    } else if (!run.bulk.pass) {
      status = exit_status_for(ErrorCode::BulkVortexFound);
      error = {{"code", "BulkVortexFound"}, {"message", run.bulk.details}};
    }
  }
  json r = make_report(verify ? "verify-degrees" : "gl", c, to_json(run), status, timings);
  if (!error.is_null()) r["status"]["error"] = error;
  out.report(r);
  std::cout << "London argmin: " << join(run.london.minimum.D) << "  GL degrees:";
  for (std::size_t k = 0; k < run.degrees.radii.size(); ++k)
    std::cout << "  R=" << run.degrees.radii[k] << "delta -> " << join(run.degrees.degrees[k]);
  std::cout << "  bulk: " << run.bulk.details << "  energy " << num(run.energy.total) << '\n';
  if (!error.is_null()) std::cerr << error["code"].get<std::string>() << ": " << error["message"].get<std::string>() << '\n';
  return status;
}

int cmd_sweep_sigma(const RunConfig& c, Output& out) {
  const SigmaSweepResult r = run_sweep_sigma(c);
  std::ostringstream t;
  t << "sigma";
  for (int j = 0; j < c.domain.hole_count(); ++j) t << ",argmin_" << j << ",vertex_" << j << ",estimate_" << j;
  t << '\n';
  for (const auto& row : r.rows) {
    t << num(row.sigma);
    for (std::size_t j = 0; j < row.argmin.size(); ++j)
      t << ',' << row.argmin[j] << ',' << num(row.vertex[j]) << ',' << num(row.estimate[j]);
    t << '\n';
  }
  out.table("sigma_sweep", t.str());
  const int status = r.pass ? kExitOk : kExitPropertyFailed;
  out.report(make_report("sweep-sigma", c, to_json(r), status));
  for (const auto& f : r.flips)
    std::cout << "hole " << f.hole << ": predicted flip " << num(f.predicted) << ", observed "
              << (std::isfinite(f.observed) ? num(f.observed) : std::string("none")) << (f.within_step ? " (ok)" : " (off)")
              << '\n';
  return status;
}

int cmd_sweep_delta(const RunConfig& c, Output& out) {
  const DeltaSweepResult r = run_sweep_delta(c);
  std::ostringstream t, f;
  t << "delta,h,log_delta";
  for (int j = 0; j < c.domain.hole_count(); ++j) t << ",xi0_" << j << ",half_Q_" << j << ",b_" << j << ",zeta_slope_" << j;
  t << '\n';
  for (const auto& row : r.rows) {
    t << num(row.delta) << ',' << num(row.h) << ',' << num(row.log_delta);
    for (std::size_t j = 0; j < row.xi0.size(); ++j)
      t << ',' << num(row.xi0[j]) << ',' << num(row.half_q[j]) << ',' << num(row.b[j]) << ',' << num(row.zeta_slope[j]);
    t << '\n';
  }
  f << "hole,quadratic_slope,quadratic_target,linear_slope,linear_target\n";
  for (std::size_t j = 0; j < r.quadratic_fit.size(); ++j)
    f << j << ',' << num(r.quadratic_fit[j].slope) << ',' << num(3.141592653589793) << ',' << num(r.linear_fit[j].slope)
      << ',' << num(r.linear_target[j]) << '\n';
  out.table("delta_sweep", t.str());
  out.table("delta_fits", f.str());
  const int status = r.quadratic_ok && r.linear_ok ? kExitOk : kExitPropertyFailed;
  out.report(make_report("sweep-delta", c, to_json(r), status));
  for (std::size_t j = 0; j < r.quadratic_fit.size(); ++j)
    std::cout << "hole " << j << ": Q/2 slope " << num(r.quadratic_fit[j].slope) << " (pi), -b slope "
              << num(r.linear_fit[j].slope) << " (" << num(r.linear_target[j]) << ")\n";
  return status;
}

int cmd_report(const std::string& dir, const std::string& out_dir) {
  const ReportTable t = merge_reports(dir);
  const fs::path out = out_dir.empty() ? fs::path(dir) : fs::path(out_dir);
  fs::create_directories(out / "tables");
  std::ofstream(out / "tables" / "summary.csv", std::ios::binary) << t.csv();
  json rows = json::array();
  for (const auto& row : t.rows) {
    json o;
    for (std::size_t i = 0; i < t.columns.size(); ++i) o[t.columns[i]] = row[i];
    rows.push_back(o);
  }
  std::ofstream(out / "summary.json", std::ios::binary) << json{{"schema", kReportSchema}, {"rows", rows}}.dump(2) << '\n';
  std::cout << t.rows.size() << " report(s) merged\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hole-vortex degrees for the Ginzburg-Landau and London models on perforated domains"};
  app.require_subcommand(1);
  Overrides o;
  std::string report_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Configuration file (INI or JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--threads", o.threads, "Worker threads for independent jobs")->check(CLI::PositiveNumber);
    sub->add_option("--delta", o.delta, "Hole radius");
    sub->add_option("--sigma", o.sigma, "Reduced field h_ext / |log delta|");
    sub->add_option("--grid-h", o.grid_h, "Grid spacing (default delta/4)");
    sub->add_option("--eps-rule", o.eps_rule, "cube | square | fixed:VALUE");
  };

  auto* predict = app.add_subcommand("predict", "xi0 at the holes, predicted degrees and thresholds");
  auto* london = app.add_subcommand("london", "Quadratic London energy and its integer minimiser");
  auto* gl = app.add_subcommand("gl", "Minimise the Ginzburg-Landau energy and measure vortices");
  auto* verify = app.add_subcommand("verify-degrees", "Check GL hole degrees against the London argmin");
  auto* ssig = app.add_subcommand("sweep-sigma", "London argmin along a sigma range");
  auto* sdel = app.add_subcommand("sweep-delta", "Scaling of the London coefficients in delta");
  auto* report = app.add_subcommand("report", "Merge report.json files into summary tables");
  for (auto* sub : {predict, london, gl, verify, ssig, sdel}) add_common(sub);
  london->add_option("--degrees", o.degrees, "Evaluate the energy at these degrees (comma separated)");
  report->add_option("dir", report_dir, "Directory with reports")->required();
  report->add_option("--out", o.out, "Output directory (default: dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  RunConfig config;
  std::string command;
  try {
    if (report->parsed()) return cmd_report(report_dir, o.out);
    config = build_config(o);
    Output out(config.out_dir);
    try {
      if (predict->parsed()) return cmd_predict(config, out);
      if (london->parsed()) return cmd_london(config, out);
      if (gl->parsed()) return cmd_gl(config, out, false);
      if (verify->parsed()) return cmd_gl(config, out, true);
      if (ssig->parsed()) return cmd_sweep_sigma(config, out);
      if (sdel->parsed()) return cmd_sweep_delta(config, out);
    } catch (const Error& e) {
      const int status = exit_status_for(e.code());
      json r = make_report(app.get_subcommands().front()->get_name(), config, nullptr, status);
      r["status"]["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
      out.report(r);
      std::cerr << e.what() << '\n';
      return status;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_status_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
