#include "bsl/solvers.hpp"

#include <cmath>
#include <numbers>

namespace bsl {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::SSGD: return "SSGD";
    case Algorithm::TSGD: return "TSGD";
    case Algorithm::UD: return "UD";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "SSGD" || s == "ssgd") return Algorithm::SSGD;
  if (s == "TSGD" || s == "tsgd") return Algorithm::TSGD;
  if (s == "UD" || s == "ud") return Algorithm::UD;
  throw InvalidArgument("unknown algorithm '" + std::string(s) + "'");
}

std::optional<StepWindow> scsc_stepsize_window(double mu_f, double mu_g, double ell_f, double ell_g) {
  if (!(mu_f > 0.0 && mu_g > 0.0 && ell_f > 0.0 && ell_g > 0.0)) {
    throw InvalidArgument("scsc_stepsize_window: inputs must be positive");
  }
  const double s = mu_f + mu_g;
  const double l = ell_f * ell_f + ell_g * ell_g;
  const double disc = 4.0 * s * s - 2.0 * l;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  return StepWindow{(2.0 * s - root) / (2.0 * l), (2.0 * s + root) / (2.0 * l)};
}

StepSchedule StepSchedule::constant(double eta) {
  StepSchedule s;
  s.kind = Kind::Constant;
  s.eta = eta;
  return s;
}

StepSchedule StepSchedule::scsc_window(double fraction) {
  StepSchedule s;
  s.kind = Kind::ScscWindow;
  s.fraction = fraction;
  return s;
}

std::string_view to_string(StepSchedule::Kind k) {
  using K = StepSchedule::Kind;
  switch (k) {
    case K::Constant: return "constant";
    case K::OuterInverse: return "outer_inverse";
    case K::InnerInverse: return "inner_inverse";
    case K::LogOverK: return "log_over_K";
    case K::LogOverT: return "log_over_T";
    case K::ScscWindow: return "scsc_window";
  }
  return "?";
}

StepSchedule::Kind parse_schedule_kind(std::string_view s) {
  using K = StepSchedule::Kind;
  for (K k : {K::Constant, K::OuterInverse, K::InnerInverse, K::LogOverK, K::LogOverT, K::ScscWindow}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown step schedule '" + std::string(s) + "'");
}

double StepSchedule::step(std::size_t index, const ScheduleContext& ctx) const {
  const RegularityConstants& rc = ctx.constants;
  const double K = static_cast<double>(ctx.K);
  const double T = static_cast<double>(ctx.T);
  double value = 0.0;
  switch (kind) {
    case Kind::Constant:
      value = eta;
      break;
    case Kind::OuterInverse:
      value = c / (rc.ell() * static_cast<double>(index + 1));
      break;
    case Kind::InnerInverse:
      value = c / (rc.ell_g * static_cast<double>(index + 1));
      break;
    case Kind::LogOverK:
      if (ctx.K < 2) throw InvalidArgument("log_over_K schedule needs K >= 2");
      value = c * std::log(K) / (std::numbers::sqrt2 * K * rc.ell());
      break;
    case Kind::LogOverT:
      if (ctx.T < 2) throw InvalidArgument("log_over_T schedule needs T >= 2");
      value = c * std::log(T) / (std::sqrt(1.0 + T * T) * K * rc.ell());
      break;
    case Kind::ScscWindow: {
      const auto window = scsc_stepsize_window(rc.mu_f, rc.mu_g, rc.ell_f, rc.ell_g);
      if (!window) throw InvalidArgument("SC-SC step-size window is infeasible (negative discriminant)");
      if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidArgument("scsc_window fraction must lie in (0, 1]");
      }
      value = fraction * window->hi;
      if (value < window->lo) throw InvalidArgument("scsc_window fraction places the step below the window");
      break;
    }
  }
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument("step schedule '" + std::string(to_string(kind)) + "' produced a nonpositive step");
  }
  return value;
}

ParameterPair default_init(const BilevelProblem& p) { return ParameterPair::zeros(p.d1(), p.d2()); }

namespace {

enum class GradKind { OuterX, InnerY };

// Stochastic (or full-batch) gradient estimate. Draws happen even when the
// dataset has one element so that index consumption is independent of m.
class GradientSampler {
 public:
  GradientSampler(const BilevelProblem& p, const Dataset& data, RandomStream draws, const SolverConfig& cfg,
                  GradKind kind)
      : p_(p), data_(data), draws_(std::move(draws)), cfg_(cfg), kind_(kind) {}

  Vector operator()(const ParameterPair& w) {
    if (cfg_.full_batch) {
      Vector acc = eval(w, data_[0]);
      for (std::size_t i = 1; i < data_.size(); ++i) acc += eval(w, data_[i]);
      return acc / static_cast<double>(data_.size());
    }
    Vector acc = eval(w, data_[draws_.index(data_.size())]);
    for (std::size_t b = 1; b < cfg_.batch_size; ++b) acc += eval(w, data_[draws_.index(data_.size())]);
    if (cfg_.batch_size > 1) acc /= static_cast<double>(cfg_.batch_size);
    return acc;
  }

 private:
  Vector eval(const ParameterPair& w, const Sample& s) const {
    return kind_ == GradKind::OuterX ? p_.outer_grad_x(w, s) : p_.inner_grad_y(w, s);
  }

  const BilevelProblem& p_;
  const Dataset& data_;
  RandomStream draws_;
  const SolverConfig& cfg_;
  GradKind kind_;
};

void validate(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train, const SolverConfig& cfg,
              Algorithm expected) {
  if (cfg.algorithm != expected) {
    throw InvalidArgument("solver config names " + std::string(to_string(cfg.algorithm)) + ", expected " +
                          std::string(to_string(expected)));
  }
  if (d_val.empty() || d_train.empty()) throw InvalidArgument("solver: datasets must be nonempty");
  if (cfg.init.d1() != p.d1() || cfg.init.d2() != p.d2()) {
    throw InvalidArgument("solver: initial point has the wrong dimensions");
  }
  if (!cfg.init.all_finite()) throw InvalidArgument("solver: initial point is not finite");
  if (expected != Algorithm::SSGD && cfg.T < 1) throw InvalidArgument("solver: T must be >= 1");
  if (cfg.batch_size < 1) throw InvalidArgument("solver: batch_size must be >= 1");
  const ScheduleContext ctx{p.constants(), cfg.K, cfg.T};
  cfg.schedule_x.step(0, ctx);
  cfg.schedule_y.step(0, ctx);
}

void guard(const BilevelProblem& p, const SolverConfig& cfg, const ParameterPair& w, std::size_t k) {
  if (!w.all_finite()) throw SolverError("non-finite iterate", k);
  if (cfg.enforce_region && !p.in_region(w)) {
    throw SolverError("iterate left the operating region (radius " + std::to_string(p.region_radius()) + ")", k);
  }
}

bool is_checkpoint(const SolverConfig& cfg, std::size_t k) {
  return cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0;
}

TrajectoryRecord run_nested(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                            const SolverConfig& cfg, const RandomStream& stream, bool reset_inner) {
  const ScheduleContext ctx{p.constants(), cfg.K, cfg.T};
  GradientSampler inner(p, d_train, stream.fork("train-index"), cfg, GradKind::InnerY);
  GradientSampler outer(p, d_val, stream.fork("val-index"), cfg, GradKind::OuterX);

  TrajectoryRecord rec;
  if (cfg.record_risk) rec.empirical_risk_path.reserve(cfg.K);
  ParameterPair w = cfg.init;
  const Vector& y0 = cfg.init.y;

  for (std::size_t k = 0; k < cfg.K; ++k) {
    const bool snap = is_checkpoint(cfg, k);
    ParameterPair output_if_stopped;
    if (snap) output_if_stopped = w;
    if (reset_inner) w.y = y0;
    if (snap) rec.iterates.push_back({k, std::move(output_if_stopped), w.y});

    for (std::size_t t = 0; t < cfg.T; ++t) {
      const double eta_y = cfg.schedule_y.step(t, ctx);
      w.y -= eta_y * inner(w);
    }
    if (cfg.record_risk) rec.empirical_risk_path.push_back(p.mean_outer_loss(w, d_val));
    const double eta_x = cfg.schedule_x.step(k, ctx);
    w.x -= eta_x * outer(w);
    guard(p, cfg, w, k + 1);
  }
  rec.iterates.push_back({cfg.K, w, w.y});
  rec.final = std::move(w);
  return rec;
}

}  // namespace

TrajectoryRecord run_ssgd(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                          const SolverConfig& cfg, const RandomStream& stream) {
  validate(p, d_val, d_train, cfg, Algorithm::SSGD);
  const ScheduleContext ctx{p.constants(), cfg.K, cfg.T};
  GradientSampler inner(p, d_train, stream.fork("train-index"), cfg, GradKind::InnerY);
  GradientSampler outer(p, d_val, stream.fork("val-index"), cfg, GradKind::OuterX);

  TrajectoryRecord rec;
  if (cfg.record_risk) rec.empirical_risk_path.reserve(cfg.K);
  ParameterPair w = cfg.init;

  for (std::size_t k = 0; k < cfg.K; ++k) {
    if (is_checkpoint(cfg, k)) rec.iterates.push_back({k, w, w.y});
    const double eta_y = cfg.schedule_y.step(k, ctx);
    const double eta_x = cfg.schedule_x.step(k, ctx);
    Vector y_next = w.y - eta_y * inner(w);
    if (cfg.update_order == UpdateOrder::GaussSeidel) std::swap(w.y, y_next);
    if (cfg.record_risk) rec.empirical_risk_path.push_back(p.mean_outer_loss(w, d_val));
    w.x -= eta_x * outer(w);
    if (cfg.update_order == UpdateOrder::Simultaneous) w.y = std::move(y_next);
    guard(p, cfg, w, k + 1);
  }
  rec.iterates.push_back({cfg.K, w, w.y});
  rec.final = std::move(w);
  return rec;
}

TrajectoryRecord run_tsgd(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                          const SolverConfig& cfg, const RandomStream& stream) {
  validate(p, d_val, d_train, cfg, Algorithm::TSGD);
  return run_nested(p, d_val, d_train, cfg, stream, false);
}

TrajectoryRecord run_ud(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                        const SolverConfig& cfg, const RandomStream& stream) {
  validate(p, d_val, d_train, cfg, Algorithm::UD);
  return run_nested(p, d_val, d_train, cfg, stream, true);
}

TrajectoryRecord run_solver(const BilevelProblem& p, const Dataset& d_val, const Dataset& d_train,
                            const SolverConfig& cfg, const RandomStream& stream) {
  switch (cfg.algorithm) {
    case Algorithm::SSGD: return run_ssgd(p, d_val, d_train, cfg, stream);
    case Algorithm::TSGD: return run_tsgd(p, d_val, d_train, cfg, stream);
    case Algorithm::UD: return run_ud(p, d_val, d_train, cfg, stream);
  }
  throw InvalidArgument("unknown algorithm");
}

}  // namespace bsl
