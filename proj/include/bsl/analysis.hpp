#pragma once

// Generalization-gap estimation, stability-to-gap bounds, closed-form
// stability bounds for SSGD and TSGD, and empirical regularity checks.

#include "bsl/core.hpp"
#include "bsl/problems.hpp"
#include "bsl/solvers.hpp"
#include "bsl/stability.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace bsl {

// ---------------------------------------------------------------------------
// Gap estimation

struct GapTrial {
  double empirical_risk = 0.0;
  RiskEstimate population;
  double gap = 0.0;
};

struct GapReport {
  std::size_t n_trials = 0;
  /// Trial means. gap == population_risk.estimate - empirical_risk exactly.
  double empirical_risk = 0.0;
  RiskEstimate population_risk;
  double gap = 0.0;
  double gap_se = 0.0;
  std::vector<GapTrial> trials;
  /// Empirical risk path averaged over trials.
  std::vector<double> mean_risk_path;
  /// Gap at each solver checkpoint, averaged over trials.
  std::vector<std::size_t> checkpoint_ks;
  std::vector<double> gap_curve;
  std::vector<double> gap_curve_se;
};

/// Trial r uses make_trial(spec, m1, m2, stream, r). Population risk uses
/// the exact oracle when available, otherwise n_mc fresh samples shared by
/// every checkpoint of the trial.
GapReport estimate_gap(const BilevelProblem& p, const PopulationSpec& spec, const SolverConfig& cfg,
                       std::size_t m1, std::size_t m2, std::size_t n_trials, std::size_t n_mc,
                       const RandomStream& stream, std::size_t workers = 1);

/// Mean over trials of population_risk^(2 alpha / (1 + alpha)) (plug-in).
double population_risk_power_mean(const GapReport& report, double alpha);

// ---------------------------------------------------------------------------
// Gap bounds from stability

/// L_f * beta.
double gap_bound_l1(double L_f, double beta);

/// (ell_f / gamma) emp_risk + (ell_f + gamma) beta_sq / 2, or with gamma
/// absent the minimized value sqrt(2 ell_f emp_risk) beta + ell_f beta_sq / 2.
double gap_bound_l2(double ell_f, double beta_sq, double emp_risk, std::optional<double> gamma = std::nullopt);

/// c^2 / (2 gamma) * risk_power_term + gamma * beta_sq / 2 with
/// c = self_bounding_constant(alpha, tau, grad_at_zero_sup). With gamma
/// absent the minimized value c * sqrt(risk_power_term * beta_sq).
double gap_bound_holder(double alpha, double tau, double grad_at_zero_sup, std::optional<double> gamma,
                        double risk_power_term, double beta_sq);

/// (1 + 1/alpha)^(alpha / (1 + alpha)) * tau^(1 / (1 + alpha)) for alpha > 0,
/// grad_at_zero_sup + tau for alpha = 0.
double self_bounding_constant(double alpha, double tau, double grad_at_zero_sup);

// ---------------------------------------------------------------------------
// Closed-form stability bounds

enum class BoundMeasure { L1, L2 };

/// Constants the step-size conditions leave free.
struct FreeConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double c4 = 1.0;
  double c5 = 1.0;
  double c6 = 1.0;
  /// SSGD SC-SC step ceiling; defaults to the upper end of the step window.
  std::optional<double> C;
  /// TSGD SC-SC step ceiling; defaults to tsgd_scsc_step_ceiling().
  std::optional<double> C1;
};

struct BoundInputs {
  RegularityConstants constants;
  /// Expected empirical validation risk at each outer iterate, K entries.
  std::vector<double> risk_path;
  FreeConstants free;
  std::size_t K = 0;
  std::size_t T = 1;
  std::size_t m1 = 1;
};

/// Raised when a bound is too large to represent as a double.
class BoundOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// beta (L1) or beta^2 (L2) for SSGD. Regime must be SC-SC or C-C.
double ssgd_stability_bound(Regime regime, BoundMeasure measure, const BoundInputs& in);

/// beta (L1) or beta^2 (L2) for TSGD, any regime. Sums with geometric
/// weights are accumulated in log space.
double tsgd_stability_bound(Regime regime, BoundMeasure measure, const BoundInputs& in);

/// Upper end of the TSGD SC-SC step window, or nullopt when it is empty.
std::optional<double> tsgd_scsc_step_ceiling(const RegularityConstants& rc, std::size_t K, std::size_t T,
                                             double c1);

// ---------------------------------------------------------------------------
// Regularity verification

struct RegularityReport {
  std::size_t n_pairs = 0;
  /// Largest sampled difference quotients.
  double L_f = 0.0;
  double ell_f = 0.0;
  double L_g = 0.0;
  double ell_g = 0.0;
  /// Pairs violating f(q) >= f(p) + <grad f(p), q - p> + mu_f/2 |q - p|^2
  /// jointly in (x, y), at the declared mu_f.
  std::size_t outer_convexity_violations = 0;
  /// Same inequality for g in y alone, at the declared mu_g.
  std::size_t inner_convexity_violations = 0;
};

/// Samples n_pairs point pairs uniformly in the ball of the given radius
/// (0 selects the problem's operating region) with one fresh sample each.
RegularityReport verify_regularity(const BilevelProblem& p, const PopulationSpec& spec, std::size_t n_pairs,
                                   double radius, RandomStream& stream);

/// Points where |grad f(w; z)| > c * f(w; z)^(alpha / (1 + alpha)) + slack,
/// with c from the declared Hölder constants.
std::size_t self_bounding_violations(const BilevelProblem& p, const PopulationSpec& spec, std::size_t n_points,
                                     double radius, double slack, RandomStream& stream);

}  // namespace bsl
