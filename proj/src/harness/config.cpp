#include "bsl/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace bsl {

namespace {

std::string format_location(const std::string& source, int line, const std::string& message) {
  if (line <= 0) return source + ": " + message;
  return source + ":" + std::to_string(line) + ": " + message;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(format_location(source, line, message)), line_(line) {}

namespace {

// Typed access to a YAML mapping with line-anchored errors and rejection of
// unknown keys.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& source, std::set<std::string> allowed)
      : node_(std::move(node)), path_(std::move(path)), source_(source), allowed_(std::move(allowed)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
    if (node_ && node_.IsMap()) {
      for (const auto& kv : node_) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed_.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
      }
    }
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  YAML::Node raw(const std::string& key) const { return has(key) ? node_[key] : YAML::Node(); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(node_[key], key);
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return convert<T>(node_[key], key);
  }

  template <typename T>
  T required(const std::string& key) const {
    if (!has(key)) fail(node_, "missing required key '" + qualified(key) + "'");
    return convert<T>(node_[key], key);
  }

  double positive(const std::string& key, double fallback) const {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail(raw(key), "'" + qualified(key) + "' must be positive");
    return v;
  }

  double nonnegative(const std::string& key, double fallback) const {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) fail(raw(key), "'" + qualified(key) + "' must be nonnegative");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min_value) const {
    const auto v = get<std::size_t>(key, fallback);
    if (v < min_value) {
      fail(raw(key), "'" + qualified(key) + "' must be >= " + std::to_string(min_value));
    }
    return v;
  }

  std::vector<std::size_t> grid(const std::string& key, std::size_t min_value) const {
    const YAML::Node n = raw(key);
    std::vector<std::size_t> out;
    if (n.IsScalar()) {
      out.push_back(convert<std::size_t>(n, key));
    } else if (n.IsSequence()) {
      for (const auto& item : n) out.push_back(convert<std::size_t>(item, key));
    } else {
      fail(n, "'" + qualified(key) + "' must be an integer or a list of integers");
    }
    if (out.empty()) fail(n, "'" + qualified(key) + "' must not be empty");
    for (std::size_t v : out) {
      if (v < min_value) fail(n, "'" + qualified(key) + "' entries must be >= " + std::to_string(min_value));
    }
    return out;
  }

  Section child(const std::string& key, std::set<std::string> allowed) const {
    return Section(raw(key), qualified(key), source_, std::move(allowed));
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const YAML::Node& n = at ? at : node_;
    const int line = n ? n.Mark().line + 1 : 0;
    throw ConfigError(source_, line, message);
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <typename T>
  T convert(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, "'" + qualified(key) + "' must be a scalar");
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      const std::string text = n.Scalar();
      if (!text.empty() && text[0] == '-') fail(n, "'" + qualified(key) + "' must be a nonnegative integer");
    }
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + qualified(key) + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> allowed_;
};

std::optional<StepSchedule> parse_schedule(const Section& parent, const std::string& key) {
  if (!parent.has(key)) return std::nullopt;
  const Section s = parent.child(key, {"kind", "eta", "c", "fraction"});
  StepSchedule out;
  try {
    out.kind = parse_schedule_kind(s.required<std::string>("kind"));
  } catch (const InvalidArgument& e) {
    s.fail(s.raw("kind"), e.what());
  }
  out.eta = s.positive("eta", out.eta);
  out.c = s.positive("c", out.c);
  out.fraction = s.positive("fraction", out.fraction);
  if (out.fraction > 1.0) s.fail(s.raw("fraction"), "'" + s.qualified("fraction") + "' must lie in (0, 1]");
  return out;
}

std::vector<double> parse_vector(const Section& parent, const std::string& key) {
  const YAML::Node n = parent.raw(key);
  if (!n.IsSequence()) parent.fail(n, "'" + parent.qualified(key) + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& item : n) {
    try {
      out.push_back(item.as<double>());
    } catch (const YAML::Exception&) {
      parent.fail(item, "'" + parent.qualified(key) + "' entries must be numbers");
    }
  }
  return out;
}

void parse_problem(const Section& root, ExperimentConfig& cfg) {
  if (!root.has("problem")) root.fail(YAML::Node(), "missing required section 'problem'");
  const Section s = root.child(
      "problem", {"kind", "seed", "d1", "d2", "region_radius",
                  // quadratic
                  "p_min", "p_max", "q_min", "q_max", "coupling", "coupling_identity", "target_center_norm",
                  "target_radius", "inner_center_norm", "inner_target_radius",
                  // logistic
                  "feature_radius",
                  // ncnc
                  "target_center_max", "target_halfwidth", "inner_center_max", "inner_halfwidth",
                  // reweighting
                  "n_train", "dim", "corruption_rate", "separation", "feature_clip", "ridge"});
  ProblemConfig& p = cfg.problem;
  p.kind = s.required<std::string>("kind");
  p.seed = s.optional<std::uint64_t>("seed");

  auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (s.has(k)) s.fail(s.raw(k), "'" + s.qualified(k) + "' does not apply to problem kind '" + p.kind + "'");
    }
  };

  if (p.kind == "quadratic") {
    QuadraticParams& q = p.quadratic;
    q.d1 = s.count("d1", q.d1, 1);
    q.d2 = s.count("d2", q.d2, 1);
    q.p_min = s.positive("p_min", q.p_min);
    q.p_max = s.positive("p_max", q.p_max);
    q.q_min = s.positive("q_min", q.q_min);
    q.q_max = s.positive("q_max", q.q_max);
    q.coupling = s.nonnegative("coupling", q.coupling);
    q.coupling_identity = s.get<bool>("coupling_identity", q.coupling_identity);
    q.target_center_norm = s.nonnegative("target_center_norm", q.target_center_norm);
    q.target_radius = s.nonnegative("target_radius", q.target_radius);
    q.inner_center_norm = s.nonnegative("inner_center_norm", q.inner_center_norm);
    q.inner_target_radius = s.nonnegative("inner_target_radius", q.inner_target_radius);
    q.region_radius = s.positive("region_radius", q.region_radius);
    if (q.p_min > q.p_max) s.fail(s.raw("p_min"), "'problem.p_min' exceeds 'problem.p_max'");
    if (q.q_min > q.q_max) s.fail(s.raw("q_min"), "'problem.q_min' exceeds 'problem.q_max'");
    reject({"feature_radius", "target_center_max", "target_halfwidth", "inner_center_max", "inner_halfwidth",
            "n_train", "dim", "corruption_rate", "separation", "feature_clip", "ridge"});
  } else if (p.kind == "logistic") {
    LogisticParams& l = p.logistic;
    l.d1 = s.count("d1", l.d1, 1);
    l.d2 = s.count("d2", l.d2, 1);
    l.feature_radius = s.positive("feature_radius", l.feature_radius);
    l.region_radius = s.positive("region_radius", l.region_radius);
    reject({"p_min", "p_max", "q_min", "q_max", "coupling", "coupling_identity", "target_center_norm",
            "target_radius", "inner_center_norm", "inner_target_radius", "target_center_max", "target_halfwidth",
            "inner_center_max", "inner_halfwidth", "n_train", "dim", "corruption_rate", "separation",
            "feature_clip", "ridge"});
  } else if (p.kind == "ncnc") {
    NcncParams& n = p.ncnc;
    n.d1 = s.count("d1", n.d1, 1);
    n.d2 = s.count("d2", n.d2, 1);
    n.target_center_max = s.nonnegative("target_center_max", n.target_center_max);
    n.target_halfwidth = s.nonnegative("target_halfwidth", n.target_halfwidth);
    n.inner_center_max = s.nonnegative("inner_center_max", n.inner_center_max);
    n.inner_halfwidth = s.nonnegative("inner_halfwidth", n.inner_halfwidth);
    n.coupling = s.nonnegative("coupling", n.coupling);
    n.region_radius = s.positive("region_radius", n.region_radius);
    if (n.target_center_max + n.target_halfwidth > 1.0) {
      s.fail(s.raw("target_halfwidth"), "ncnc targets must stay inside [-1, 1] (center + halfwidth <= 1)");
    }
    if (n.inner_center_max + n.inner_halfwidth > 1.0) {
      s.fail(s.raw("inner_halfwidth"), "ncnc inner targets must stay inside [-1, 1] (center + halfwidth <= 1)");
    }
    reject({"p_min", "p_max", "q_min", "q_max", "coupling_identity", "target_center_norm", "target_radius",
            "inner_center_norm", "inner_target_radius", "feature_radius", "n_train", "dim", "corruption_rate",
            "separation", "feature_clip", "ridge"});
  } else if (p.kind == "reweighting") {
    ReweightingParams& r = p.reweighting;
    r.n_train = s.count("n_train", r.n_train, 1);
    r.dim = s.count("dim", r.dim, 1);
    r.corruption_rate = s.nonnegative("corruption_rate", r.corruption_rate);
    if (r.corruption_rate > 1.0) s.fail(s.raw("corruption_rate"), "'problem.corruption_rate' must lie in [0, 1]");
    r.separation = s.nonnegative("separation", r.separation);
    r.feature_clip = s.positive("feature_clip", r.feature_clip);
    r.ridge = s.positive("ridge", r.ridge);
    r.region_radius = s.positive("region_radius", r.region_radius);
    reject({"d1", "d2", "p_min", "p_max", "q_min", "q_max", "coupling", "coupling_identity",
            "target_center_norm", "target_radius", "inner_center_norm", "inner_target_radius", "feature_radius",
            "target_center_max", "target_halfwidth", "inner_center_max", "inner_halfwidth"});
  } else {
    s.fail(s.raw("kind"), "unknown problem kind '" + p.kind + "' (expected quadratic, logistic, ncnc or reweighting)");
  }
}

void parse_solver(const Section& root, ExperimentConfig& cfg) {
  const Section s = root.child("solver", {"algorithm", "update_order", "batch_size", "full_batch",
                                          "checkpoint_every", "step_x", "step_y", "init_x", "init_y",
                                          "enforce_region"});
  SolverConfig& sc = cfg.solver;
  try {
    sc.algorithm = parse_algorithm(s.get<std::string>("algorithm", "SSGD"));
  } catch (const InvalidArgument& e) {
    s.fail(s.raw("algorithm"), e.what());
  }
  const std::string order = s.get<std::string>("update_order", "simultaneous");
  if (order == "simultaneous") {
    sc.update_order = UpdateOrder::Simultaneous;
  } else if (order == "gauss_seidel") {
    sc.update_order = UpdateOrder::GaussSeidel;
  } else {
    s.fail(s.raw("update_order"), "'solver.update_order' must be simultaneous or gauss_seidel");
  }
  sc.batch_size = s.count("batch_size", 1, 1);
  sc.full_batch = s.get<bool>("full_batch", false);
  sc.checkpoint_every = s.count("checkpoint_every", 0, 0);
  sc.enforce_region = s.get<bool>("enforce_region", true);
  cfg.step_x = parse_schedule(s, "step_x");
  cfg.step_y = parse_schedule(s, "step_y");
  if (s.has("init_x")) cfg.init_x = parse_vector(s, "init_x");
  if (s.has("init_y")) cfg.init_y = parse_vector(s, "init_y");
}

void parse_rest(const Section& root, ExperimentConfig& cfg) {
  const Section st = root.child("stability", {"enabled", "trials", "n_perturb", "coupled", "which", "forced_equal"});
  cfg.stability_enabled = st.get<bool>("enabled", true);
  cfg.stability.n_trials = st.count("trials", 1, 1);
  cfg.stability.n_perturb = st.count("n_perturb", 0, 0);
  cfg.stability.coupled = st.get<bool>("coupled", true);
  cfg.stability.forced_equal = st.get<bool>("forced_equal", false);
  try {
    cfg.stability.which = parse_stability_which(st.get<std::string>("which", "both"));
  } catch (const InvalidArgument& e) {
    st.fail(st.raw("which"), e.what());
  }

  const Section gp = root.child("gap", {"enabled", "trials", "n_mc"});
  cfg.gap_enabled = gp.get<bool>("enabled", true);
  cfg.gap_trials = gp.count("trials", cfg.stability.n_trials, 1);
  cfg.gap_n_mc = gp.count("n_mc", 1000, 2);
  if (cfg.stability_enabled && cfg.gap_enabled && cfg.gap_trials != cfg.stability.n_trials) {
    gp.fail(gp.raw("trials"), "'gap.trials' must equal 'stability.trials' when both are enabled");
  }
  if (!cfg.stability_enabled && !cfg.gap_enabled) {
    gp.fail(YAML::Node(), "at least one of 'stability' and 'gap' must be enabled");
  }

  if (!root.has("sweep")) root.fail(YAML::Node(), "missing required section 'sweep'");
  const Section sw = root.child("sweep", {"m1", "m2", "K", "T"});
  cfg.sweep.m1 = sw.grid("m1", 1);
  if (sw.has("m2")) {
    cfg.sweep.m2 = sw.grid("m2", 1);
  } else if (cfg.problem.kind == "reweighting") {
    cfg.sweep.m2 = {cfg.problem.reweighting.n_train};
  } else {
    sw.fail(YAML::Node(), "missing required key 'sweep.m2'");
  }
  if (cfg.problem.kind == "reweighting") {
    for (std::size_t m2 : cfg.sweep.m2) {
      if (m2 != cfg.problem.reweighting.n_train) {
        sw.fail(sw.raw("m2"), "'sweep.m2' must equal problem.n_train for the reweighting problem");
      }
    }
  }
  cfg.sweep.K = sw.grid("K", 0);
  cfg.sweep.T = sw.has("T") ? sw.grid("T", 1) : std::vector<std::size_t>{1};
  if (cfg.stability.n_perturb > 0) {
    for (std::size_t m1 : cfg.sweep.m1) {
      if (cfg.stability.n_perturb > m1) {
        st.fail(st.raw("n_perturb"), "'stability.n_perturb' exceeds the smallest m1 in the sweep");
      }
    }
  }

  const Section b = root.child("bounds", {"c1", "c2", "c3", "c4", "c5", "c6", "C", "C1", "gamma"});
  cfg.free.c1 = b.positive("c1", 1.0);
  cfg.free.c2 = b.positive("c2", 1.0);
  cfg.free.c3 = b.positive("c3", 1.0);
  cfg.free.c4 = b.positive("c4", 1.0);
  cfg.free.c5 = b.positive("c5", 1.0);
  cfg.free.c6 = b.positive("c6", 1.0);
  if (b.has("C")) cfg.free.C = b.positive("C", 1.0);
  if (b.has("C1")) cfg.free.C1 = b.positive("C1", 1.0);
  if (b.has("gamma")) cfg.gamma = b.positive("gamma", 1.0);

  const Section out = root.child("output", {"dir"});
  cfg.output_dir = out.get<std::string>("dir", "results");
  cfg.workers = root.count("workers", 1, 1);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, "YAML syntax error: " + e.msg);
  }
  ExperimentConfig cfg;
  cfg.source = source;
  if (!doc || doc.IsNull()) throw ConfigError(source, 0, "empty configuration");
  const Section root(doc, "", cfg.source,
                     {"seed", "problem", "solver", "stability", "gap", "sweep", "bounds", "output", "workers"});
  cfg.seed = root.required<std::uint64_t>("seed");
  parse_problem(root, cfg);
  parse_solver(root, cfg);
  parse_rest(root, cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open configuration file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

ProblemInstance build_problem(const ExperimentConfig& cfg) {
  RandomStream stream = cfg.problem.seed ? RandomStream(*cfg.problem.seed) : RandomStream(cfg.seed).fork("problem");
  const ProblemConfig& p = cfg.problem;
  if (p.kind == "quadratic") return make_quadratic_scsc(p.quadratic, stream);
  if (p.kind == "logistic") return make_logistic_cc(p.logistic, stream);
  if (p.kind == "ncnc") return make_smooth_ncnc(p.ncnc, stream);
  if (p.kind == "reweighting") return make_data_reweighting(p.reweighting, stream);
  throw InvalidArgument("unknown problem kind '" + p.kind + "'");
}

}  // namespace bsl
