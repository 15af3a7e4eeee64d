#include "bsl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bsl {

TrialSetup make_trial(const PopulationSpec& spec, std::size_t m1, std::size_t m2, const RandomStream& root,
                      std::size_t trial) {
  const RandomStream ts = root.fork("trial", trial);
  RandomStream val = ts.fork("val");
  RandomStream train = ts.fork("train");
  RandomStream ghost = ts.fork("ghost");
  TrialSetup t{spec.draw_validation(m1, val), spec.draw_training(m2, train), spec.draw_validation(m1, ghost),
               ts.fork("solver"), ts.fork("perturb"), ts.fork("mc")};
  return t;
}

std::string_view to_string(StabilityWhich w) {
  switch (w) {
    case StabilityWhich::L1: return "l1";
    case StabilityWhich::L2: return "l2";
    case StabilityWhich::Both: return "both";
  }
  return "?";
}

StabilityWhich parse_stability_which(std::string_view s) {
  if (s == "l1") return StabilityWhich::L1;
  if (s == "l2") return StabilityWhich::L2;
  if (s == "both") return StabilityWhich::Both;
  throw InvalidArgument("unknown stability measure '" + std::string(s) + "'");
}

MeanSe mean_and_se(const std::vector<double>& values) {
  MeanSe out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

namespace {

struct TrialResult {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  std::vector<double> risk_path;
  /// [checkpoint][position] distances.
  std::vector<std::vector<double>> curve;
  std::vector<std::size_t> checkpoint_ks;
};

std::size_t resolve_n_perturb(const StabilityProtocol& proto, std::size_t m1) {
  const std::size_t n = proto.n_perturb == 0 ? std::min<std::size_t>(m1, 16) : proto.n_perturb;
  if (n < 1 || n > m1) throw InvalidArgument("stability: n_perturb must lie in [1, m1]");
  return n;
}

TrialResult run_trial(const BilevelProblem& p, const PopulationSpec& spec, const SolverConfig& cfg,
                      const StabilityProtocol& proto, std::size_t m1, std::size_t m2, std::size_t n_perturb,
                      const RandomStream& root, std::size_t r) {
  TrialSetup setup = make_trial(spec, m1, m2, root, r);
  const Dataset& ghost = proto.forced_equal ? setup.d_val : setup.d_ghost;

  TrialResult out;
  TrajectoryRecord base;
  try {
    base = run_solver(p, setup.d_val, setup.d_train, cfg, setup.solver);
  } catch (const std::exception& e) {
    throw std::runtime_error("stability trial " + std::to_string(r) + ", base run: " + e.what());
  }
  out.risk_path = std::move(base.empirical_risk_path);
  for (const Checkpoint& c : base.iterates) out.checkpoint_ks.push_back(c.k);
  out.curve.assign(base.iterates.size(), {});

  if (n_perturb == m1) {
    out.indices.resize(m1);
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
  } else {
    out.indices = setup.perturb.sample_without_replacement(m1, n_perturb);
  }

  SolverConfig perturbed_cfg = cfg;
  perturbed_cfg.record_risk = false;
  for (std::size_t i : out.indices) {
    const Dataset d_i = dataset_replace(setup.d_val, i, ghost[i]);
    const RandomStream s = proto.coupled ? setup.solver : setup.solver.fork("independent", i);
    TrajectoryRecord rec;
    try {
      rec = run_solver(p, d_i, setup.d_train, perturbed_cfg, s);
    } catch (const std::exception& e) {
      throw std::runtime_error("stability trial " + std::to_string(r) + ", replaced index " + std::to_string(i) +
                               ": " + e.what());
    }
    out.distances.push_back(joint_norm(base.final, rec.final));
    for (std::size_t c = 0; c < base.iterates.size(); ++c) {
      out.curve[c].push_back(joint_norm(base.iterates[c].iterate, rec.iterates[c].iterate));
    }
  }
  return out;
}

}  // namespace

StabilityReport estimate_stability(const BilevelProblem& p, const PopulationSpec& spec, const SolverConfig& cfg,
                                   const StabilityProtocol& proto, std::size_t m1, std::size_t m2,
                                   const RandomStream& stream) {
  if (proto.n_trials < 1) throw InvalidArgument("stability: n_trials must be >= 1");
  if (m1 < 1 || m2 < 1) throw InvalidArgument("stability: dataset sizes must be >= 1");
  const std::size_t n_perturb = resolve_n_perturb(proto, m1);

  std::vector<TrialResult> trials(proto.n_trials);
  parallel_for(proto.n_trials, proto.workers, [&](std::size_t r) {
    trials[r] = run_trial(p, spec, cfg, proto, m1, m2, n_perturb, stream, r);
  });

  StabilityReport rep;
  rep.m1 = m1;
  rep.m2 = m2;
  rep.n_trials = proto.n_trials;
  rep.n_perturb = n_perturb;
  rep.subsampled = n_perturb < m1;
  rep.coupled = proto.coupled;

  const std::size_t K = trials.front().risk_path.size();
  rep.mean_risk_path.assign(K, 0.0);
  rep.checkpoint_ks = trials.front().checkpoint_ks;
  const std::size_t n_ck = rep.checkpoint_ks.size();
  std::vector<double> curve_l1(n_ck, 0.0), curve_l2(n_ck, 0.0);

  for (std::size_t r = 0; r < trials.size(); ++r) {
    const TrialResult& t = trials[r];
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < t.indices.size(); ++j) {
      const double d = t.distances[j];
      s1 += d;
      s2 += d * d;
      rep.sup_distance = std::max(rep.sup_distance, d);
      rep.distances.push_back({r, t.indices[j], d});
    }
    rep.trial_l1.push_back(s1 / static_cast<double>(n_perturb));
    rep.trial_l2.push_back(s2 / static_cast<double>(n_perturb));
    for (std::size_t k = 0; k < K; ++k) rep.mean_risk_path[k] += t.risk_path[k];
    for (std::size_t c = 0; c < n_ck; ++c) {
      for (double d : t.curve[c]) {
        curve_l1[c] += d;
        curve_l2[c] += d * d;
      }
    }
  }
  const double R = static_cast<double>(trials.size());
  for (double& v : rep.mean_risk_path) v /= R;
  const double denom = R * static_cast<double>(n_perturb);
  for (std::size_t c = 0; c < n_ck; ++c) {
    rep.l1_curve.push_back(curve_l1[c] / denom);
    rep.l2_curve.push_back(curve_l2[c] / denom);
  }

  const MeanSe l1 = mean_and_se(rep.trial_l1);
  const MeanSe l2 = mean_and_se(rep.trial_l2);
  rep.beta_l1 = l1.mean;
  rep.beta_l1_se = l1.se;
  rep.beta_sq_l2 = l2.mean;
  rep.beta_sq_l2_se = l2.se;
  return rep;
}

std::vector<StabilityRow> stability_vs_iterations(const BilevelProblem& p, const PopulationSpec& spec,
                                                  const SolverConfig& base_cfg, const StabilityProtocol& proto,
                                                  std::size_t m1, std::size_t m2,
                                                  const std::vector<GridPoint>& grid, const RandomStream& stream) {
  if (grid.empty()) throw InvalidArgument("stability_vs_iterations: empty grid");
  std::vector<StabilityRow> rows;
  rows.reserve(grid.size());
  for (const GridPoint& g : grid) {
    SolverConfig cfg = base_cfg;
    cfg.K = g.K;
    cfg.T = g.T;
    rows.push_back({g, estimate_stability(p, spec, cfg, proto, m1, m2, stream)});
  }
  return rows;
}

}  // namespace bsl
