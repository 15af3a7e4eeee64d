#include "bsl/harness.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef BSL_VERSION
#define BSL_VERSION "0.0.0"
#endif
#ifndef BSL_YAML_CPP_VERSION
#define BSL_YAML_CPP_VERSION "unknown"
#endif

namespace bsl {

using nlohmann::ordered_json;

std::vector<GridPointSpec> expand_grid(const ExperimentConfig& cfg) {
  std::vector<GridPointSpec> out;
  for (std::size_t m1 : cfg.sweep.m1) {
    for (std::size_t m2 : cfg.sweep.m2) {
      for (std::size_t K : cfg.sweep.K) {
        for (std::size_t T : cfg.sweep.T) out.push_back({out.size(), m1, m2, K, T});
      }
    }
  }
  return out;
}

std::pair<StepSchedule, StepSchedule> default_schedules(Regime regime, Algorithm algorithm) {
  using Kind = StepSchedule::Kind;
  StepSchedule x, y;
  switch (regime) {
    case Regime::SCSC:
      x = y = StepSchedule::scsc_window(0.9);
      break;
    case Regime::CC:
      x.kind = y.kind = algorithm == Algorithm::SSGD ? Kind::LogOverK : Kind::LogOverT;
      break;
    case Regime::NCNC:
      x.kind = Kind::OuterInverse;
      y.kind = Kind::InnerInverse;
      break;
  }
  return {x, y};
}

SolverConfig solver_for(const ExperimentConfig& cfg, const BilevelProblem& p, const GridPointSpec& g) {
  SolverConfig sc = cfg.solver;
  sc.K = g.K;
  sc.T = g.T;
  sc.seed = cfg.seed;
  const auto defaults = default_schedules(p.regime(), sc.algorithm);
  sc.schedule_x = cfg.step_x.value_or(defaults.first);
  sc.schedule_y = cfg.step_y.value_or(defaults.second);
  sc.init = default_init(p);
  if (cfg.init_x) {
    if (cfg.init_x->size() != p.d1()) {
      throw InvalidArgument("solver.init_x has " + std::to_string(cfg.init_x->size()) + " entries, expected " +
                            std::to_string(p.d1()));
    }
    sc.init.x = Eigen::Map<const Vector>(cfg.init_x->data(), static_cast<Eigen::Index>(cfg.init_x->size()));
  }
  if (cfg.init_y) {
    if (cfg.init_y->size() != p.d2()) {
      throw InvalidArgument("solver.init_y has " + std::to_string(cfg.init_y->size()) + " entries, expected " +
                            std::to_string(p.d2()));
    }
    sc.init.y = Eigen::Map<const Vector>(cfg.init_y->data(), static_cast<Eigen::Index>(cfg.init_y->size()));
  }
  return sc;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols = {
      "grid",        "trial",      "problem",    "regime",        "algorithm",     "m1",
      "m2",          "K",          "T",          "beta_l1",       "beta_l1_se",    "beta_sq_l2",
      "beta_sq_l2_se", "emp_risk", "pop_risk",   "pop_risk_se",   "gap",           "gap_bound_l1",
      "gap_bound_l2", "beta_bound_l1", "beta_sq_bound_l2", "status", "wall_time_s"};
  return cols;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  const auto& cols = results_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const ResultRow& r : rows) {
    out << r.grid << ',' << r.trial << ',' << r.problem << ',' << r.regime << ',' << r.algorithm << ',' << r.m1
        << ',' << r.m2 << ',' << r.K << ',' << r.T << ',' << fmt(r.beta_l1) << ',' << fmt(r.beta_l1_se) << ','
        << fmt(r.beta_sq_l2) << ',' << fmt(r.beta_sq_l2_se) << ',' << fmt(r.emp_risk) << ',' << fmt(r.pop_risk)
        << ',' << fmt(r.pop_risk_se) << ',' << fmt(r.gap) << ',' << fmt(r.gap_bound_l1) << ','
        << fmt(r.gap_bound_l2) << ',' << fmt(r.beta_bound_l1) << ',' << fmt(r.beta_sq_bound_l2) << ',' << r.status
        << ',' << fmt(r.wall_time_s) << '\n';
  }
}

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "grid,k,beta_l1,beta_sq_l2,gap,gap_se\n";
  for (const CurveRow& r : rows) {
    out << r.grid << ',' << r.k << ',' << fmt(r.beta_l1) << ',' << fmt(r.beta_sq_l2) << ',' << fmt(r.gap) << ','
        << fmt(r.gap_se) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

ordered_json constants_json(const RegularityConstants& rc) {
  return ordered_json{{"L_f", rc.L_f},     {"L_g", rc.L_g},   {"ell_f", rc.ell_f},
                      {"ell_g", rc.ell_g}, {"mu_f", rc.mu_f}, {"mu_g", rc.mu_g},
                      {"alpha", rc.alpha}, {"tau", rc.tau},   {"grad_at_zero_sup", rc.grad_at_zero_sup}};
}

ordered_json schedule_json(const StepSchedule& s) {
  return ordered_json{{"kind", std::string(to_string(s.kind))}, {"eta", s.eta}, {"c", s.c}, {"fraction", s.fraction}};
}

ordered_json free_json(const FreeConstants& f) {
  ordered_json j{{"c1", f.c1}, {"c2", f.c2}, {"c3", f.c3}, {"c4", f.c4}, {"c5", f.c5}, {"c6", f.c6}};
  j["C"] = f.C ? ordered_json(*f.C) : ordered_json("upper end of the SC-SC step window");
  j["C1"] = f.C1 ? ordered_json(*f.C1) : ordered_json("upper end of the TSGD SC-SC step window");
  return j;
}

ordered_json problem_params_json(const ProblemConfig& p) {
  ordered_json j{{"kind", p.kind}};
  if (p.seed) j["seed"] = *p.seed;
  if (p.kind == "quadratic") {
    const QuadraticParams& q = p.quadratic;
    j.update({{"d1", q.d1}, {"d2", q.d2}, {"p_min", q.p_min}, {"p_max", q.p_max}, {"q_min", q.q_min},
              {"q_max", q.q_max}, {"coupling", q.coupling}, {"coupling_identity", q.coupling_identity},
              {"target_center_norm", q.target_center_norm}, {"target_radius", q.target_radius},
              {"inner_center_norm", q.inner_center_norm}, {"inner_target_radius", q.inner_target_radius},
              {"region_radius", q.region_radius}});
  } else if (p.kind == "logistic") {
    const LogisticParams& l = p.logistic;
    j.update({{"d1", l.d1}, {"d2", l.d2}, {"feature_radius", l.feature_radius}, {"region_radius", l.region_radius}});
  } else if (p.kind == "ncnc") {
    const NcncParams& n = p.ncnc;
    j.update({{"d1", n.d1}, {"d2", n.d2}, {"target_center_max", n.target_center_max},
              {"target_halfwidth", n.target_halfwidth}, {"inner_center_max", n.inner_center_max},
              {"inner_halfwidth", n.inner_halfwidth}, {"coupling", n.coupling}, {"region_radius", n.region_radius}});
  } else if (p.kind == "reweighting") {
    const ReweightingParams& r = p.reweighting;
    j.update({{"n_train", r.n_train}, {"dim", r.dim}, {"corruption_rate", r.corruption_rate},
              {"separation", r.separation}, {"feature_clip", r.feature_clip}, {"ridge", r.ridge},
              {"region_radius", r.region_radius}});
  }
  return j;
}

std::string inputs_hash(const BoundInputs& in) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (double r : in.risk_path) mix(&r, sizeof r);
  const std::size_t sizes[] = {in.K, in.T, in.m1};
  mix(sizes, sizeof sizes);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct BoundOutcome {
  std::optional<double> beta_l1;
  std::optional<double> beta_sq_l2;
  std::string status = "ok";
  ordered_json records = ordered_json::array();
};

BoundOutcome evaluate_bounds(const BilevelProblem& p, const SolverConfig& sc, const ExperimentConfig& cfg,
                             const GridPointSpec& g, const std::vector<double>& risk_path) {
  BoundOutcome out;
  const bool ssgd = sc.algorithm == Algorithm::SSGD;
  if (sc.algorithm == Algorithm::UD || (ssgd && p.regime() == Regime::NCNC)) return out;

  BoundInputs in;
  in.constants = p.constants();
  in.risk_path = risk_path;
  in.free = cfg.free;
  in.K = g.K;
  in.T = g.T;
  in.m1 = g.m1;
  const std::string name = ssgd ? "ssgd_stability" : "tsgd_stability";
  for (BoundMeasure m : {BoundMeasure::L1, BoundMeasure::L2}) {
    try {
      const double v = ssgd ? ssgd_stability_bound(p.regime(), m, in) : tsgd_stability_bound(p.regime(), m, in);
      (m == BoundMeasure::L1 ? out.beta_l1 : out.beta_sq_l2) = v;
      out.records.push_back(ordered_json{{"bound", name},
                                         {"regime", std::string(to_string(p.regime()))},
                                         {"which", m == BoundMeasure::L1 ? "l1" : "l2"},
                                         {"constants", free_json(cfg.free)},
                                         {"risk_path", "trial-averaged empirical risk"},
                                         {"inputs_hash", inputs_hash(in)},
                                         {"value", v}});
    } catch (const BoundOverflow&) {
      out.status = "beta_bound_overflow";
    } catch (const InvalidArgument&) {
      out.status = "beta_bound_infeasible";
    }
  }
  return out;
}

double first_step(const StepSchedule& s, const BilevelProblem& p, const SolverConfig& sc) {
  return s.step(0, ScheduleContext{p.constants(), sc.K, sc.T});
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const ProblemInstance inst = build_problem(cfg);
  const BilevelProblem& p = *inst.problem;
  const PopulationSpec& spec = *inst.population;
  const RandomStream experiment = RandomStream(cfg.seed).fork("experiment");
  const std::vector<GridPointSpec> grid = expand_grid(cfg);

  ExperimentResult result;
  ordered_json grid_json = ordered_json::array();
  StabilityProtocol proto = cfg.stability;
  proto.workers = cfg.workers;

  for (const GridPointSpec& g : grid) {
    const auto start = std::chrono::steady_clock::now();
    const SolverConfig sc = solver_for(cfg, p, g);

    std::optional<StabilityReport> srep;
    std::optional<GapReport> grep;
    if (cfg.stability_enabled) srep = estimate_stability(p, spec, sc, proto, g.m1, g.m2, experiment);
    if (cfg.gap_enabled) {
      grep = estimate_gap(p, spec, sc, g.m1, g.m2, cfg.gap_trials, cfg.gap_n_mc, experiment, cfg.workers);
    }
    const std::vector<double>& risk_path = srep ? srep->mean_risk_path : grep->mean_risk_path;
    const BoundOutcome bounds = evaluate_bounds(p, sc, cfg, g, risk_path);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::size_t n_trials = srep ? srep->n_trials : grep->n_trials;
    const RegularityConstants& rc = p.constants();
    for (std::size_t r = 0; r < n_trials; ++r) {
      ResultRow row;
      row.grid = g.index;
      row.trial = r;
      row.problem = std::string(p.kind());
      row.regime = std::string(to_string(p.regime()));
      row.algorithm = std::string(to_string(sc.algorithm));
      row.m1 = g.m1;
      row.m2 = g.m2;
      row.K = g.K;
      row.T = g.T;
      if (srep) {
        std::vector<double> d;
        for (const IndexDistance& e : srep->distances) {
          if (e.trial == r) d.push_back(e.distance);
        }
        std::vector<double> d2;
        for (double v : d) d2.push_back(v * v);
        row.beta_l1 = srep->trial_l1[r];
        row.beta_sq_l2 = srep->trial_l2[r];
        if (d.size() >= 2) {
          row.beta_l1_se = mean_and_se(d).se;
          row.beta_sq_l2_se = mean_and_se(d2).se;
        }
        row.gap_bound_l1 = gap_bound_l1(rc.L_f, *row.beta_l1);
      }
      if (grep) {
        const GapTrial& t = grep->trials[r];
        row.emp_risk = t.empirical_risk;
        row.pop_risk = t.population.estimate;
        row.pop_risk_se = t.population.std_error;
        row.gap = t.gap;
        if (srep) row.gap_bound_l2 = gap_bound_l2(rc.ell_f, *row.beta_sq_l2, t.empirical_risk, cfg.gamma);
      }
      row.beta_bound_l1 = bounds.beta_l1;
      row.beta_sq_bound_l2 = bounds.beta_sq_l2;
      row.status = bounds.status;
      row.wall_time_s = seconds;
      result.rows.push_back(std::move(row));
    }

    if (sc.checkpoint_every > 0) {
      const auto& ks = srep ? srep->checkpoint_ks : grep->checkpoint_ks;
      for (std::size_t c = 0; c < ks.size(); ++c) {
        CurveRow cr;
        cr.grid = g.index;
        cr.k = ks[c];
        if (srep) {
          cr.beta_l1 = srep->l1_curve[c];
          cr.beta_sq_l2 = srep->l2_curve[c];
        }
        if (grep) {
          cr.gap = grep->gap_curve[c];
          cr.gap_se = grep->gap_curve_se[c];
        }
        result.curves.push_back(cr);
      }
    }

    ordered_json gj{{"index", g.index},
                    {"m1", g.m1},
                    {"m2", g.m2},
                    {"K", g.K},
                    {"T", g.T},
                    {"eta_x_first", first_step(sc.schedule_x, p, sc)},
                    {"eta_y_first", first_step(sc.schedule_y, p, sc)}};
    if (srep) {
      gj["stability"] = ordered_json{{"beta_l1", srep->beta_l1},
                                     {"beta_l1_se", srep->beta_l1_se},
                                     {"beta_sq_l2", srep->beta_sq_l2},
                                     {"beta_sq_l2_se", srep->beta_sq_l2_se},
                                     {"sup_distance", srep->sup_distance},
                                     {"n_trials", srep->n_trials},
                                     {"n_perturb", srep->n_perturb},
                                     {"subsampled_indices", srep->subsampled},
                                     {"coupled", srep->coupled}};
    }
    if (grep) {
      gj["gap"] = ordered_json{{"empirical_risk", grep->empirical_risk},
                               {"population_risk", grep->population_risk.estimate},
                               {"population_risk_se", grep->population_risk.std_error},
                               {"gap", grep->gap},
                               {"gap_se", grep->gap_se},
                               {"n_trials", grep->n_trials}};
    }
    gj["bounds"] = bounds.records;
    gj["bound_status"] = bounds.status;
    grid_json.push_back(std::move(gj));

    log << "grid " << g.index + 1 << "/" << grid.size() << ": m1=" << g.m1 << " m2=" << g.m2 << " K=" << g.K
        << " T=" << g.T;
    if (srep) log << " beta_l1=" << fmt(srep->beta_l1);
    if (grep) log << " gap=" << fmt(grep->gap);
    log << " (" << seconds << " s)\n";
  }

  const auto defaults = default_schedules(p.regime(), cfg.solver.algorithm);
  ordered_json manifest;
  manifest["tool"] = "bsl";
  manifest["version"] = BSL_VERSION;
  manifest["libraries"] = ordered_json{
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"yaml-cpp", BSL_YAML_CPP_VERSION},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  manifest["config"] = ordered_json{
      {"source", cfg.source},
      {"seed", cfg.seed},
      {"problem", problem_params_json(cfg.problem)},
      {"solver",
       {{"algorithm", std::string(to_string(cfg.solver.algorithm))},
        {"update_order", cfg.solver.update_order == UpdateOrder::Simultaneous ? "simultaneous" : "gauss_seidel"},
        {"batch_size", cfg.solver.batch_size},
        {"full_batch", cfg.solver.full_batch},
        {"checkpoint_every", cfg.solver.checkpoint_every},
        {"enforce_region", cfg.solver.enforce_region},
        {"step_x", schedule_json(cfg.step_x.value_or(defaults.first))},
        {"step_y", schedule_json(cfg.step_y.value_or(defaults.second))},
        {"init", cfg.init_x || cfg.init_y ? "configured" : "zeros"}}},
      {"stability",
       {{"enabled", cfg.stability_enabled},
        {"trials", cfg.stability.n_trials},
        {"n_perturb", cfg.stability.n_perturb == 0 ? ordered_json("min(m1, 16)") : ordered_json(cfg.stability.n_perturb)},
        {"coupling", cfg.stability.coupled ? "shared solver stream" : "independent solver streams"},
        {"which", std::string(to_string(cfg.stability.which))},
        {"forced_equal", cfg.stability.forced_equal}}},
      {"gap", {{"enabled", cfg.gap_enabled}, {"trials", cfg.gap_trials}, {"n_mc", cfg.gap_n_mc}}},
      {"sweep", {{"m1", cfg.sweep.m1}, {"m2", cfg.sweep.m2}, {"K", cfg.sweep.K}, {"T", cfg.sweep.T}}},
      {"bounds",
       {{"free_constants", free_json(cfg.free)},
        {"gamma", cfg.gamma ? ordered_json(*cfg.gamma) : ordered_json("minimizing value")}}},
      {"workers", cfg.workers}};
  manifest["problem"] = ordered_json{{"kind", std::string(p.kind())},
                                     {"regime", std::string(to_string(p.regime()))},
                                     {"d1", p.d1()},
                                     {"d2", p.d2()},
                                     {"region_radius", p.region_radius()},
                                     {"constants", constants_json(p.constants())}};
  manifest["grid"] = std::move(grid_json);
  manifest["columns"] = results_columns();
  result.manifest = manifest.dump(2) + "\n";
  return result;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void apply_options(ExperimentConfig& cfg, const RunOptions& opts) {
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.workers) cfg.workers = std::max<std::size_t>(1, *opts.workers);
  if (opts.out_dir) {
    cfg.output_dir = *opts.out_dir;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    cfg.output_dir = env;
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Checks that need the built problem. Returns an error message or empty.
std::string check_resolved(const ExperimentConfig& cfg, const BilevelProblem& p, std::ostream& out) {
  const RegularityConstants& rc = p.constants();
  if (!p.in_region(default_init(p))) return "initial point lies outside the operating region";
  if (auto star = p.exact_minimizer(); star && !p.in_region(*star)) {
    return "operating region (radius " + fmt(p.region_radius()) +
           ") does not contain the population fixed point; increase problem.region_radius";
  }
  for (const GridPointSpec& g : expand_grid(cfg)) {
    SolverConfig sc;
    try {
      sc = solver_for(cfg, p, g);
    } catch (const InvalidArgument& e) {
      return e.what();
    }
    if (!p.in_region(sc.init)) return "solver.init_x / solver.init_y lie outside the operating region";
    for (const auto& [name, sched] : {std::pair{"step_x", sc.schedule_x}, std::pair{"step_y", sc.schedule_y}}) {
      if (sched.kind == StepSchedule::Kind::ScscWindow) {
        if (!(rc.mu_f > 0.0 && rc.mu_g > 0.0)) {
          return std::string("solver.") + name + ": scsc_window needs a strongly convex problem (mu_f, mu_g > 0)";
        }
        const double S = rc.mu_f + rc.mu_g;
        const double L = rc.ell_f * rc.ell_f + rc.ell_g * rc.ell_g;
        const double disc = 4.0 * S * S - 2.0 * L;
        if (disc < 0.0) {
          return std::string("solver.") + name +
                 ": SC-SC step-size window is infeasible: 4(mu_f+mu_g)^2 - 2(ell_f^2+ell_g^2) = " + fmt(disc) +
                 " < 0 (mu_f=" + fmt(rc.mu_f) + ", mu_g=" + fmt(rc.mu_g) + ", ell_f=" + fmt(rc.ell_f) +
                 ", ell_g=" + fmt(rc.ell_g) + ")";
        }
      }
      try {
        const double eta = first_step(sched, p, sc);
        out << "  grid " << g.index << " (m1=" << g.m1 << ", m2=" << g.m2 << ", K=" << g.K << ", T=" << g.T
            << "): " << name << " " << to_string(sched.kind) << " first step = " << fmt(eta) << "\n";
      } catch (const InvalidArgument& e) {
        return std::string("solver.") + name + " at grid point " + std::to_string(g.index) + ": " + e.what();
      }
    }
  }
  return {};
}

}  // namespace

int cmd_validate(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return 2;
  }
  apply_options(cfg, opts);
  ProblemInstance inst;
  try {
    inst = build_problem(cfg);
  } catch (const std::exception& e) {
    err << "invalid config: " << config_path << ": problem: " << e.what() << "\n";
    return 2;
  }
  const BilevelProblem& p = *inst.problem;
  const RegularityConstants& rc = p.constants();
  out << "config: " << config_path << "\n";
  out << "seed: " << cfg.seed << "\n";
  out << "problem: " << p.kind() << " (" << to_string(p.regime()) << "), d1=" << p.d1() << ", d2=" << p.d2()
      << ", region radius " << fmt(p.region_radius()) << "\n";
  out << "constants: L_f=" << fmt(rc.L_f) << " L_g=" << fmt(rc.L_g) << " ell_f=" << fmt(rc.ell_f)
      << " ell_g=" << fmt(rc.ell_g) << " mu_f=" << fmt(rc.mu_f) << " mu_g=" << fmt(rc.mu_g) << "\n";
  out << "solver: " << to_string(cfg.solver.algorithm) << ", batch " << cfg.solver.batch_size
      << (cfg.solver.full_batch ? ", full batch" : "") << "\n";
  out << "stability: " << (cfg.stability_enabled ? "on" : "off") << ", trials " << cfg.stability.n_trials
      << ", n_perturb "
      << (cfg.stability.n_perturb == 0 ? std::string("min(m1, 16)") : std::to_string(cfg.stability.n_perturb))
      << ", " << (cfg.stability.coupled ? "coupled" : "independent") << "\n";
  out << "gap: " << (cfg.gap_enabled ? "on" : "off") << ", trials " << cfg.gap_trials << ", n_mc "
      << cfg.gap_n_mc << "\n";
  out << "grid points: " << expand_grid(cfg).size() << "\n";
  out << "output: " << cfg.output_dir << "\n";
  out << "resolved step sizes:\n";
  const std::string problem = check_resolved(cfg, p, out);
  if (!problem.empty()) {
    err << "invalid config: " << config_path << ": " << problem << "\n";
    return 2;
  }
  out << "config OK\n";
  return 0;
}

int cmd_run(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return 2;
  }
  apply_options(cfg, opts);
  try {
    const ProblemInstance inst = build_problem(cfg);
    std::ostringstream sink;
    const std::string problem = check_resolved(cfg, *inst.problem, sink);
    if (!problem.empty()) {
      err << "invalid config: " << config_path << ": " << problem << "\n";
      return 2;
    }
  } catch (const std::exception& e) {
    err << "invalid config: " << config_path << ": problem: " << e.what() << "\n";
    return 2;
  }

  try {
    const ExperimentResult res = run_experiment(cfg, err);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_results_csv(csv, res.rows);
    write_file(dir / "results.csv", csv.str());
    write_file(dir / "manifest.json", res.manifest);
    if (!res.curves.empty()) {
      std::ostringstream curves;
      write_curves_csv(curves, res.curves);
      write_file(dir / "curves.csv", curves.str());
    }
    out << "wrote " << res.rows.size() << " rows to " << (dir / "results.csv").string() << "\n";
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bsl
