#pragma once

// Monte-Carlo estimation of on-average argument stability: the expected
// distance between solver outputs on validation sets that differ in one
// sample, averaged over the replaced position.

#include "bsl/core.hpp"
#include "bsl/problems.hpp"
#include "bsl/solvers.hpp"

#include <vector>

namespace bsl {

/// Datasets and substreams of one Monte-Carlo trial. Trial r draws from
/// root.fork("trial", r), so every estimator given the same root sees the
/// same datasets and the same solver index sequence in trial r.
struct TrialSetup {
  Dataset d_val;
  Dataset d_train;
  /// Independent copy of the validation set supplying replacement samples.
  Dataset d_ghost;
  RandomStream solver;
  RandomStream perturb;
  RandomStream mc;
};

TrialSetup make_trial(const PopulationSpec& spec, std::size_t m1, std::size_t m2, const RandomStream& root,
                      std::size_t trial);

enum class StabilityWhich { L1, L2, Both };

std::string_view to_string(StabilityWhich w);
StabilityWhich parse_stability_which(std::string_view s);

struct StabilityProtocol {
  std::size_t n_trials = 1;
  /// Replaced positions per trial; 0 selects min(m1, 16).
  std::size_t n_perturb = 0;
  /// Perturbed runs reuse the base run's solver stream.
  bool coupled = true;
  /// Columns the harness reports; both quantities are always computed.
  StabilityWhich which = StabilityWhich::Both;
  /// Replacement samples equal the originals (null test).
  bool forced_equal = false;
  std::size_t workers = 1;
};

struct IndexDistance {
  std::size_t trial = 0;
  std::size_t index = 0;
  double distance = 0.0;
};

struct StabilityReport {
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  std::size_t n_trials = 0;
  std::size_t n_perturb = 0;
  /// True when fewer than m1 positions are replaced per trial.
  bool subsampled = false;
  bool coupled = true;

  double beta_l1 = 0.0;
  double beta_l1_se = 0.0;
  double beta_sq_l2 = 0.0;
  double beta_sq_l2_se = 0.0;

  /// Per-trial means over replaced positions.
  std::vector<double> trial_l1;
  std::vector<double> trial_l2;
  /// Ordered by trial, then by draw order of the replaced positions.
  std::vector<IndexDistance> distances;
  /// Largest single distance observed (diagnostic).
  double sup_distance = 0.0;
  /// Base-run empirical risk path averaged over trials (K entries).
  std::vector<double> mean_risk_path;

  /// Stability at intermediate checkpoints when the solver records them.
  std::vector<std::size_t> checkpoint_ks;
  std::vector<double> l1_curve;
  std::vector<double> l2_curve;
};

/// Throws std::runtime_error naming the trial and replaced position when a
/// solver run fails.
StabilityReport estimate_stability(const BilevelProblem& p, const PopulationSpec& spec, const SolverConfig& cfg,
                                   const StabilityProtocol& proto, std::size_t m1, std::size_t m2,
                                   const RandomStream& stream);

struct GridPoint {
  std::size_t K = 1;
  std::size_t T = 1;
};

struct StabilityRow {
  GridPoint point;
  StabilityReport report;
};

/// One estimate_stability call per grid point, all from the same root stream.
std::vector<StabilityRow> stability_vs_iterations(const BilevelProblem& p, const PopulationSpec& spec,
                                                  const SolverConfig& base_cfg, const StabilityProtocol& proto,
                                                  std::size_t m1, std::size_t m2,
                                                  const std::vector<GridPoint>& grid, const RandomStream& stream);

/// Sample mean and its standard error (0 for fewer than two values).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& values);

}  // namespace bsl
