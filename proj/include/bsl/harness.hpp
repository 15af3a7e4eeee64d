#pragma once

// Configuration-driven experiment harness behind the `bsl` command line
// tool: YAML experiment configs, grid sweeps over (m1, m2, K, T), and the
// results.csv / manifest.json artifacts.

#include "bsl/analysis.hpp"
#include "bsl/core.hpp"
#include "bsl/problems.hpp"
#include "bsl/solvers.hpp"
#include "bsl/stability.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bsl {

/// Invalid configuration. what() is "<source>:<line>: <message>" when the
/// offending entry has a location.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct ProblemConfig {
  std::string kind = "quadratic";
  /// Instance seed; derived from the experiment seed when absent.
  std::optional<std::uint64_t> seed;
  QuadraticParams quadratic;
  LogisticParams logistic;
  NcncParams ncnc;
  ReweightingParams reweighting;
};

struct SweepConfig {
  std::vector<std::size_t> m1;
  std::vector<std::size_t> m2;
  std::vector<std::size_t> K;
  std::vector<std::size_t> T{1};
};

struct ExperimentConfig {
  std::string source;
  std::uint64_t seed = 0;
  ProblemConfig problem;
  /// K and T are overwritten per grid point; the schedules are replaced by
  /// step_x / step_y or the regime defaults.
  SolverConfig solver;
  std::optional<StepSchedule> step_x;
  std::optional<StepSchedule> step_y;
  /// Zero initial point when absent.
  std::optional<std::vector<double>> init_x;
  std::optional<std::vector<double>> init_y;

  bool stability_enabled = true;
  StabilityProtocol stability;
  bool gap_enabled = true;
  std::size_t gap_trials = 1;
  std::size_t gap_n_mc = 1000;

  SweepConfig sweep;
  FreeConstants free;
  std::optional<double> gamma;

  std::string output_dir = "results";
  std::size_t workers = 1;
};

/// Throws ConfigError on any schema violation.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

ProblemInstance build_problem(const ExperimentConfig& cfg);

struct GridPointSpec {
  std::size_t index = 0;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  std::size_t K = 0;
  std::size_t T = 1;
};

/// Cartesian product ordered by m1, then m2, then K, then T.
std::vector<GridPointSpec> expand_grid(const ExperimentConfig& cfg);

/// Default step schedules: the SC-SC window (both levels) for SC-SC, the
/// logarithmic ceilings for C-C, inverse decays for NC-NC.
std::pair<StepSchedule, StepSchedule> default_schedules(Regime regime, Algorithm algorithm);

/// Solver configuration for one grid point, including the initial point.
SolverConfig solver_for(const ExperimentConfig& cfg, const BilevelProblem& p, const GridPointSpec& g);

/// One results.csv row. Absent optionals are written as empty cells.
struct ResultRow {
  std::size_t grid = 0;
  std::size_t trial = 0;
  std::string problem;
  std::string regime;
  std::string algorithm;
  std::size_t m1 = 0, m2 = 0, K = 0, T = 1;
  std::optional<double> beta_l1, beta_l1_se, beta_sq_l2, beta_sq_l2_se;
  std::optional<double> emp_risk, pop_risk, pop_risk_se, gap;
  /// Gap bounds evaluated at this trial's measured stability.
  std::optional<double> gap_bound_l1, gap_bound_l2;
  /// Closed-form stability bounds for the grid point.
  std::optional<double> beta_bound_l1, beta_sq_bound_l2;
  std::string status = "ok";
  double wall_time_s = 0.0;
};

/// Checkpoint curve row (written when the solver records checkpoints).
struct CurveRow {
  std::size_t grid = 0;
  std::size_t k = 0;
  std::optional<double> beta_l1, beta_sq_l2, gap, gap_se;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CurveRow> curves;
  /// JSON text of the run manifest.
  std::string manifest;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log);

const std::vector<std::string>& results_columns();
/// Doubles are written with 17 significant digits.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed_override;
};

/// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
int cmd_run(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err);

struct ReportOptions {
  /// Standard errors of slack allowed in the bound check.
  double sigma = 3.0;
  /// Path of an optional long-format CSV.
  std::optional<std::string> long_csv;
};

/// Exit codes: 0 success, 1 missing, empty or corrupt results.
int cmd_report(const std::string& results_dir, const ReportOptions& opts, std::ostream& out, std::ostream& err);

/// Least-squares slope of log(y) against log(x). Requires two distinct x
/// and positive values.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Environment variable that overrides the output directory.
inline constexpr const char* kOutputDirEnv = "BSL_OUTPUT_DIR";

}  // namespace bsl
