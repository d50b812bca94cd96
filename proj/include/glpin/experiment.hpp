#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glpin/error.hpp"
#include "glpin/geometry.hpp"
#include "glpin/gl.hpp"
#include "glpin/london.hpp"
#include "glpin/vortex.hpp"

namespace glpin {

inline constexpr const char* kReportSchema = "glpin.report/1";

enum ExitStatus : int {
  kExitOk = 0,
  kExitPropertyFailed = 1,  // DegreeMismatch, BulkVortexFound, failed sweep check
  kExitConfig = 2,          // ConfigError, SchemaMismatch, invalid domain
  kExitNumerical = 3,       // solver failures, AtThreshold and other library errors
};

int exit_status_for(ErrorCode code);

struct SigmaRange {
  double from = 0.0;
  double to = 0.0;
  double step = 0.05;
};

struct RunConfig {
  PerforatedDomain domain;
  double grid_h = 0.0;  // 0: delta / 4
  std::optional<double> sigma;
  std::optional<double> prediction;  // sigma chosen so sigma (1 - xi0(a_1)) equals this
  SigmaRange sigma_range;
  std::vector<double> deltas{0.16, 0.08, 0.04};
  std::string eps_rule = "cube";  // cube | square | fixed:VALUE
  double threshold_sigma_max = 0.0;  // 0: max(2 sigma, 5)
  MinimizeOptions optimizer;
  bool neighbor_seeds = true;
  SeedOptions seeding;
  std::vector<double> radii{2.0, 4.0};
  double theta = 0.5;
  std::optional<DegreeVector> degrees;
  std::string out_dir = "glpin_out";
  std::uint64_t seed = 0;
  int threads = 1;

  double spacing() const { return grid_h > 0.0 ? grid_h : domain.delta / 4.0; }
  double spacing_for(double delta) const;
  double eps() const { return eps_for(domain.delta); }
  double eps_for(double delta) const;
};

/// Sections [domain], [grid], [field], [model], [optimizer], [analysis],
/// [sweep], [run]; see README for the grammar. JSON input uses the same keys
/// nested by section. Throws ConfigError.
RunConfig parse_config(const std::string& text, bool json);
RunConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError / domain errors for inconsistent configurations.
void validate_config(const RunConfig& config);
nlohmann::json config_to_json(const RunConfig& config);

struct Prediction {
  double sigma = 0.0;
  double h_ext = 0.0;
  std::vector<double> xi0;     // at hole centres
  std::vector<double> vertex;  // sigma (1 - xi0)
  std::optional<DegreeVector> predicted;
  std::string threshold_message;  // set when some hole sits on a threshold
  std::vector<Threshold> thresholds;
};

/// sigma from the config, or from the prediction target using xi0 at the
/// first hole.
double resolve_sigma(const RunConfig& config, const ScalarField& xi0);
Prediction run_predict(const RunConfig& config);

struct LondonStudy {
  double sigma = 0.0;
  double h_ext = 0.0;
  QuadraticEnergyForm form;
  DegreeMinimum minimum;
  double flux_condition = 1.0;
  std::optional<DegreeVector> evaluated;  // degrees given in the config
  double evaluated_energy = 0.0;
  std::vector<std::pair<DegreeVector, double>> neighborhood;  // argmin +- e_j
};

LondonStudy run_london(const RunConfig& config);

struct SeedRun {
  std::string label;
  DegreeVector seed_degrees;  // empty for the Meissner start
  double seed_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  DegreeVector measured;  // at the first radius; empty when unmeasurable
};

struct GLRun {
  Prediction prediction;
  LondonStudy london;
  GLParams params;
  std::vector<SeedRun> seeds;
  int best_seed = -1;
  MinimizeResult best;
  GLEnergyBreakdown energy;
  HoleDegrees degrees;
  VortexReport vortices;
  BulkCheck bulk;
  DecompositionReport decomposition;
  DecompositionReport decomposition_wrong;  // London degrees off by one at hole 1
  DegreeVector wrong_degrees;
  bool degrees_match = false;
  std::map<std::string, double> timings;
};

/// Predict, London argmin, GL descent from every seed (London argmin, its
/// +-e_j neighbours when enabled, Meissner), keep the lowest energy, measure.
GLRun run_gl(const RunConfig& config);

struct SigmaSweepRow {
  double sigma = 0.0;
  DegreeVector argmin;
  std::vector<double> vertex;
  std::vector<double> estimate;  // sigma (1 - xi0)
};

struct SigmaFlip {
  int hole = 0;
  double predicted = 0.0;  // (k + 1/2) / (1 - xi0)
  double observed = 0.0;   // first sweep point past the flip, NaN if none
  bool within_step = false;
};

struct SigmaSweepResult {
  std::vector<double> xi0;
  std::vector<SigmaSweepRow> rows;
  std::vector<SigmaFlip> flips;  // first 0 -> 1 flip per hole
  bool pass = true;
};

SigmaSweepResult run_sweep_sigma(const RunConfig& config);

struct DeltaSweepRow {
  double delta = 0.0;
  double h = 0.0;
  double log_delta = 0.0;  // |log delta|
  std::vector<double> xi0;
  std::vector<double> half_q;  // Q_jj / 2
  std::vector<double> b;
  std::vector<double> zeta_slope;  // flux(zeta_j) / (2 pi delta) * delta |log delta|
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct DeltaSweepResult {
  double sigma = 0.0;
  std::vector<DeltaSweepRow> rows;
  std::vector<LinearFit> quadratic_fit;  // Q_jj/2 against |log delta|
  std::vector<LinearFit> linear_fit;     // -b_j against |log delta|
  std::vector<double> linear_target;     // 2 pi sigma (1 - xi0(a_j))
  bool quadratic_ok = true;              // within 20% of pi
  bool linear_ok = true;                 // within 15% of the target
};

DeltaSweepResult run_sweep_delta(const RunConfig& config);

nlohmann::json to_json(const Prediction& p);
nlohmann::json to_json(const LondonStudy& s);
nlohmann::json to_json(const GLRun& r);
nlohmann::json to_json(const SigmaSweepResult& r);
nlohmann::json to_json(const DeltaSweepResult& r);

/// Report envelope: schema, command, config echo, payload, status, timings.
nlohmann::json make_report(const std::string& command, const RunConfig& config, nlohmann::json payload, int status,
                           nlohmann::json timings = nlohmann::json::object());

/// Merges every report.json under `dir` (sorted by relative path) into one
/// row per run. Throws SchemaMismatch on other schema versions.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string csv() const;
};

ReportTable merge_reports(const std::filesystem::path& dir);

}  // namespace glpin
