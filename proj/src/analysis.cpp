#include "bsl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace bsl {

// ---------------------------------------------------------------------------
// Gap estimation

namespace {

struct GapTrialResult {
  GapTrial final;
  std::vector<double> risk_path;
  std::vector<std::size_t> ks;
  std::vector<double> curve;
};

GapTrial evaluate_gap(const BilevelProblem& p, const PopulationSpec& spec, const Dataset& d_val,
                      const ParameterPair& w, std::size_t n_mc, const RandomStream& mc) {
  GapTrial g;
  g.empirical_risk = empirical_outer_risk(p, d_val, w);
  RandomStream draws = mc;
  g.population = population_outer_risk(p, spec, w, n_mc, draws);
  g.gap = g.population.estimate - g.empirical_risk;
  return g;
}

}  // namespace

GapReport estimate_gap(const BilevelProblem& p, const PopulationSpec& spec, const SolverConfig& cfg,
                       std::size_t m1, std::size_t m2, std::size_t n_trials, std::size_t n_mc,
                       const RandomStream& stream, std::size_t workers) {
  if (n_trials < 1) throw InvalidArgument("estimate_gap: n_trials must be >= 1");

  std::vector<GapTrialResult> results(n_trials);
  parallel_for(n_trials, workers, [&](std::size_t r) {
    TrialSetup setup = make_trial(spec, m1, m2, stream, r);
    TrajectoryRecord rec;
    try {
      rec = run_solver(p, setup.d_val, setup.d_train, cfg, setup.solver);
    } catch (const std::exception& e) {
      throw std::runtime_error("gap trial " + std::to_string(r) + ": " + e.what());
    }
    GapTrialResult& out = results[r];
    out.final = evaluate_gap(p, spec, setup.d_val, rec.final, n_mc, setup.mc);
    out.risk_path = std::move(rec.empirical_risk_path);
    for (const Checkpoint& c : rec.iterates) {
      out.ks.push_back(c.k);
      out.curve.push_back(c.k == cfg.K ? out.final.gap
                                       : evaluate_gap(p, spec, setup.d_val, c.iterate, n_mc, setup.mc).gap);
    }
  });

  GapReport rep;
  rep.n_trials = n_trials;
  rep.checkpoint_ks = results.front().ks;
  std::vector<double> emp, pop, gap;
  rep.mean_risk_path.assign(results.front().risk_path.size(), 0.0);
  for (const GapTrialResult& t : results) {
    rep.trials.push_back(t.final);
    emp.push_back(t.final.empirical_risk);
    pop.push_back(t.final.population.estimate);
    gap.push_back(t.final.gap);
    for (std::size_t k = 0; k < rep.mean_risk_path.size(); ++k) rep.mean_risk_path[k] += t.risk_path[k];
  }
  for (double& v : rep.mean_risk_path) v /= static_cast<double>(n_trials);

  const MeanSe e = mean_and_se(emp);
  const MeanSe q = mean_and_se(pop);
  const MeanSe g = mean_and_se(gap);
  rep.empirical_risk = e.mean;
  rep.population_risk.estimate = q.mean;
  rep.gap = q.mean - e.mean;
  if (n_trials >= 2) {
    rep.population_risk.std_error = q.se;
    rep.gap_se = g.se;
  } else {
    rep.population_risk.std_error = results.front().final.population.std_error;
    rep.gap_se = rep.population_risk.std_error;
  }

  for (std::size_t c = 0; c < rep.checkpoint_ks.size(); ++c) {
    std::vector<double> column;
    for (const GapTrialResult& t : results) column.push_back(t.curve[c]);
    const MeanSe s = mean_and_se(column);
    rep.gap_curve.push_back(s.mean);
    rep.gap_curve_se.push_back(s.se);
  }
  return rep;
}

double population_risk_power_mean(const GapReport& report, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("population_risk_power_mean: alpha must lie in [0, 1]");
  if (report.trials.empty()) return 0.0;
  const double power = 2.0 * alpha / (1.0 + alpha);
  double sum = 0.0;
  for (const GapTrial& t : report.trials) sum += std::pow(std::max(t.population.estimate, 0.0), power);
  return sum / static_cast<double>(report.trials.size());
}

// ---------------------------------------------------------------------------
// Gap bounds

namespace {

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite and nonnegative");
}

void require_gamma(std::optional<double> gamma) {
  if (gamma && (!(*gamma > 0.0) || !std::isfinite(*gamma))) throw InvalidArgument("gamma must be positive");
}

}  // namespace

double gap_bound_l1(double L_f, double beta) {
  require_nonnegative(L_f, "L_f");
  require_nonnegative(beta, "beta");
  return L_f * beta;
}

double gap_bound_l2(double ell_f, double beta_sq, double emp_risk, std::optional<double> gamma) {
  require_nonnegative(ell_f, "ell_f");
  require_nonnegative(beta_sq, "beta_sq");
  require_nonnegative(emp_risk, "emp_risk");
  require_gamma(gamma);
  if (gamma) return ell_f / *gamma * emp_risk + (ell_f + *gamma) * beta_sq / 2.0;
  return std::sqrt(2.0 * ell_f * emp_risk) * std::sqrt(beta_sq) + ell_f * beta_sq / 2.0;
}

double self_bounding_constant(double alpha, double tau, double grad_at_zero_sup) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("self_bounding_constant: alpha must lie in [0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("self_bounding_constant: tau must be positive");
  if (alpha == 0.0) {
    require_nonnegative(grad_at_zero_sup, "grad_at_zero_sup");
    return grad_at_zero_sup + tau;
  }
  return std::pow(1.0 + 1.0 / alpha, alpha / (1.0 + alpha)) * std::pow(tau, 1.0 / (1.0 + alpha));
}

double gap_bound_holder(double alpha, double tau, double grad_at_zero_sup, std::optional<double> gamma,
                        double risk_power_term, double beta_sq) {
  require_nonnegative(risk_power_term, "risk_power_term");
  require_nonnegative(beta_sq, "beta_sq");
  require_gamma(gamma);
  const double c = self_bounding_constant(alpha, tau, grad_at_zero_sup);
  if (gamma) return c * c / (2.0 * *gamma) * risk_power_term + *gamma * beta_sq / 2.0;
  return c * std::sqrt(risk_power_term * beta_sq);
}

// ---------------------------------------------------------------------------
// Stability bounds

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_inputs(const BoundInputs& in) {
  if (in.risk_path.size() != in.K) {
    throw InvalidArgument("stability bound: risk path has " + std::to_string(in.risk_path.size()) +
                          " entries, expected K = " + std::to_string(in.K));
  }
  if (in.m1 < 1) throw InvalidArgument("stability bound: m1 must be >= 1");
  if (in.T < 1) throw InvalidArgument("stability bound: T must be >= 1");
  for (double r : in.risk_path) require_nonnegative(r, "risk path entry");
  require_nonnegative(in.constants.ell_f, "ell_f");
  require_nonnegative(in.constants.L_g, "L_g");
}

double positive_ell(const RegularityConstants& rc) {
  const double ell = rc.ell();
  if (!(ell > 0.0)) throw InvalidArgument("stability bound: ell = max(ell_f, ell_g) must be positive");
  return ell;
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// log of sum_k exp(log_weight(k) + log u_k * (L1 ? 1/2 : 1)) over k = 1..K,
// with u_k = 2 ell_f R_k + lg_scale * L_g^2. Returns exp(log_prefactor + that).
template <typename LogWeight>
double weighted_sum(const BoundInputs& in, BoundMeasure measure, double lg_scale, double log_prefactor,
                    LogWeight log_weight) {
  const RegularityConstants& rc = in.constants;
  const double exponent = measure == BoundMeasure::L1 ? 0.5 : 1.0;
  std::vector<double> logs;
  logs.reserve(in.K);
  double top = kNegInf;
  for (std::size_t k = 1; k <= in.K; ++k) {
    const double u = 2.0 * rc.ell_f * in.risk_path[k - 1] + lg_scale * rc.L_g * rc.L_g;
    const double l = log_weight(k) + exponent * safe_log(u);
    logs.push_back(l);
    top = std::max(top, l);
  }
  if (top == kNegInf || log_prefactor == kNegInf) return 0.0;
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - top);
  const double total = log_prefactor + top + std::log(acc);
  if (total > std::log(std::numeric_limits<double>::max())) {
    throw BoundOverflow("stability bound exceeds the double range (log value " + std::to_string(total) +
                        "); use a smaller K");
  }
  return std::exp(total);
}

double no_weight(std::size_t) { return 0.0; }

}  // namespace

std::optional<double> tsgd_scsc_step_ceiling(const RegularityConstants& rc, std::size_t K, std::size_t T,
                                             double c1) {
  if (K < 1 || T < 1) throw InvalidArgument("tsgd_scsc_step_ceiling: K and T must be >= 1");
  const double ell = rc.ell();
  if (!(ell > 0.0)) throw InvalidArgument("tsgd_scsc_step_ceiling: ell must be positive");
  const double t = static_cast<double>(T);
  const double a = t * ell - rc.mu_f - t * rc.mu_g;
  const double disc = 4.0 * a * a -
                      2.0 * (1.0 + t * t) * ell * ell * (1.0 - c1 * std::log(t) / static_cast<double>(K));
  if (disc < 0.0) return std::nullopt;
  const double ceiling = (-2.0 * a + std::sqrt(disc)) / (2.0 * (1.0 + t * t) * ell * ell);
  if (!(ceiling > 0.0)) return std::nullopt;
  return ceiling;
}

double ssgd_stability_bound(Regime regime, BoundMeasure measure, const BoundInputs& in) {
  validate_inputs(in);
  if (in.K == 0) return 0.0;
  const RegularityConstants& rc = in.constants;
  const double m1 = static_cast<double>(in.m1);
  const double K = static_cast<double>(in.K);
  const bool l1 = measure == BoundMeasure::L1;

  switch (regime) {
    case Regime::SCSC: {
      double C = 0.0;
      if (in.free.C) {
        C = *in.free.C;
      } else {
        const auto window = scsc_stepsize_window(rc.mu_f, rc.mu_g, rc.ell_f, rc.ell_g);
        if (!window) throw InvalidArgument("SSGD SC-SC bound: step-size window is infeasible");
        C = window->hi;
      }
      require_nonnegative(C, "C");
      const double log_pre = l1 ? std::log(2.0 * C / m1)
                                : std::log(4.0 * (m1 + K) * std::numbers::e) + 2.0 * std::log(C / m1);
      return weighted_sum(in, measure, 1.0, log_pre, no_weight);
    }
    case Regime::CC: {
      const double ell = positive_ell(rc);
      const double c1 = in.free.c1;
      require_nonnegative(c1, "c1");
      const double log_ln_k = safe_log(std::log(K));
      const double log_pre =
          l1 ? std::log(std::numbers::sqrt2 * c1) + log_ln_k + (c1 - 1.0) * std::log(K) - std::log(m1 * ell)
             : std::log(2.0 * c1 * c1 * (m1 + K) * std::numbers::e) + (2.0 * c1 - 2.0) * std::log(K) +
                   2.0 * log_ln_k - 2.0 * std::log(m1 * ell);
      return weighted_sum(in, measure, 1.0, log_pre, no_weight);
    }
    case Regime::NCNC:
      break;
  }
  throw InvalidArgument("SSGD has no stability bound for the NC-NC regime");
}

double tsgd_stability_bound(Regime regime, BoundMeasure measure, const BoundInputs& in) {
  validate_inputs(in);
  if (in.K == 0) return 0.0;
  const RegularityConstants& rc = in.constants;
  const double m1 = static_cast<double>(in.m1);
  const double K = static_cast<double>(in.K);
  const double T = static_cast<double>(in.T);
  const bool l1 = measure == BoundMeasure::L1;
  const double lg_scale = T * T;
  const double ln2 = std::numbers::ln2;
  const double e = std::numbers::e;

  switch (regime) {
    case Regime::SCSC: {
      const double c1 = in.free.c1;
      double C1 = 0.0;
      if (in.free.C1) {
        C1 = *in.free.C1;
      } else {
        const auto ceiling = tsgd_scsc_step_ceiling(rc, in.K, in.T, c1);
        if (!ceiling) throw InvalidArgument("TSGD SC-SC bound: step-size window is infeasible");
        C1 = *ceiling;
      }
      require_nonnegative(C1, "C1");
      const double log_pre = l1 ? std::log(2.0 * C1 / m1) + 0.5 * c1 * std::log(T)
                                : std::log(4.0 * (m1 + K) * e) + c1 * std::log(T) + 2.0 * std::log(C1 / m1);
      return weighted_sum(in, measure, lg_scale, log_pre, no_weight);
    }
    case Regime::CC: {
      const double ell = positive_ell(rc);
      const double c2 = in.free.c2;
      require_nonnegative(c2, "c2");
      const double log_ln_t = safe_log(std::log(T));
      const double log_den = std::log(m1) + 0.5 * std::log(1.0 + T * T) + std::log(K * ell);
      const double log_pre = l1 ? std::log(2.0 * c2) + log_ln_t + c2 * std::log(T) - log_den
                                : std::log(4.0 * c2 * c2 * (K + m1) * e) + 2.0 * log_ln_t + 2.0 * c2 * std::log(T) -
                                      2.0 * log_den;
      const double scale = l1 ? 0.5 : 1.0;
      return weighted_sum(in, measure, lg_scale, log_pre,
                          [&](std::size_t k) { return scale * (K - static_cast<double>(k)) * ln2; });
    }
    case Regime::NCNC: {
      const double ell = positive_ell(rc);
      const FreeConstants& f = in.free;
      const double power = f.c4 * f.c5 * std::pow(T, f.c6) * std::sqrt(1.0 + T * T);
      const double log_pre = l1 ? std::log(2.0 * f.c4 / (m1 * ell))
                                : std::log(4.0 * (m1 + K) * f.c4 * f.c4 * e) - 2.0 * std::log(m1 * ell);
      const double scale = l1 ? 0.5 : 1.0;
      const double p = l1 ? power : 2.0 * power;
      return weighted_sum(in, measure, lg_scale, log_pre, [&](std::size_t k) {
        const double kk = static_cast<double>(k);
        return scale * (K - kk) * ln2 + p * std::log(K / kk);
      });
    }
  }
  throw InvalidArgument("unknown regime");
}

// ---------------------------------------------------------------------------
// Regularity verification

namespace {

Vector joint(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

ParameterPair random_point(const BilevelProblem& p, double radius, RandomStream& stream) {
  const Vector v = stream.uniform_ball(p.d1() + p.d2(), radius);
  const auto d1 = static_cast<Eigen::Index>(p.d1());
  return {v.head(d1), v.tail(v.size() - d1)};
}

double resolve_radius(const BilevelProblem& p, double radius) {
  if (radius < 0.0 || !std::isfinite(radius)) throw InvalidArgument("verify_regularity: invalid radius");
  return radius == 0.0 ? p.region_radius() : radius;
}

// True when lhs >= rhs fails beyond rounding of the terms involved.
bool violates(double lhs, double rhs, double scale) { return lhs < rhs - 1e-9 * (1.0 + scale); }

}  // namespace

RegularityReport verify_regularity(const BilevelProblem& p, const PopulationSpec& spec, std::size_t n_pairs,
                                   double radius, RandomStream& stream) {
  if (n_pairs < 1) throw InvalidArgument("verify_regularity: n_pairs must be >= 1");
  const double r = resolve_radius(p, radius);
  const RegularityConstants& rc = p.constants();
  RegularityReport rep;
  rep.n_pairs = n_pairs;
  for (std::size_t n = 0; n < n_pairs; ++n) {
    const ParameterPair a = random_point(p, r, stream);
    const ParameterPair b = random_point(p, r, stream);
    const Sample xi = spec.sample_validation(stream);
    const Sample zeta = spec.sample_training(stream);
    const double dist = joint_norm(a, b);
    if (dist == 0.0) continue;

    const double fa = p.outer_loss(a, xi), fb = p.outer_loss(b, xi);
    const double ga = p.inner_loss(a, zeta), gb = p.inner_loss(b, zeta);
    const Vector dfa = joint(p.outer_grad_x(a, xi), p.outer_grad_y(a, xi));
    const Vector dfb = joint(p.outer_grad_x(b, xi), p.outer_grad_y(b, xi));
    const Vector dga = joint(p.inner_grad_x(a, zeta), p.inner_grad_y(a, zeta));
    const Vector dgb = joint(p.inner_grad_x(b, zeta), p.inner_grad_y(b, zeta));
    rep.L_f = std::max(rep.L_f, std::abs(fa - fb) / dist);
    rep.L_g = std::max(rep.L_g, std::abs(ga - gb) / dist);
    rep.ell_f = std::max(rep.ell_f, (dfa - dfb).norm() / dist);
    rep.ell_g = std::max(rep.ell_g, (dga - dgb).norm() / dist);

    const Vector step = joint(b.x - a.x, b.y - a.y);
    const double lin_f = dfa.dot(step);
    if (violates(fb, fa + lin_f + 0.5 * rc.mu_f * dist * dist, std::abs(fa) + std::abs(fb) + std::abs(lin_f))) {
      ++rep.outer_convexity_violations;
    }

    const ParameterPair c{a.x, b.y};
    const double gc = p.inner_loss(c, zeta);
    const Vector dy = b.y - a.y;
    const double lin_g = p.inner_grad_y(a, zeta).dot(dy);
    if (violates(gc, ga + lin_g + 0.5 * rc.mu_g * dy.squaredNorm(), std::abs(ga) + std::abs(gc) + std::abs(lin_g))) {
      ++rep.inner_convexity_violations;
    }
  }
  return rep;
}

std::size_t self_bounding_violations(const BilevelProblem& p, const PopulationSpec& spec, std::size_t n_points,
                                     double radius, double slack, RandomStream& stream) {
  const double r = resolve_radius(p, radius);
  const RegularityConstants& rc = p.constants();
  const double c = self_bounding_constant(rc.alpha, rc.tau, rc.grad_at_zero_sup);
  const double power = rc.alpha / (1.0 + rc.alpha);
  std::size_t violations = 0;
  for (std::size_t n = 0; n < n_points; ++n) {
    const ParameterPair w = random_point(p, r, stream);
    const Sample xi = spec.sample_validation(stream);
    const double grad = joint(p.outer_grad_x(w, xi), p.outer_grad_y(w, xi)).norm();
    const double f = p.outer_loss(w, xi);
    if (grad > c * std::pow(std::max(f, 0.0), power) + slack) ++violations;
  }
  return violations;
}

}  // namespace bsl
