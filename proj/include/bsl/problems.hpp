#pragma once

// Bilevel problem abstraction and the concrete instance suite.
//
// Every instance declares its regularity constants over an operating
// region: the closed ball of radius region_radius() around the origin of
// R^{d1} x R^{d2}. Solvers refuse to leave that ball.

#include "bsl/core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace bsl {

enum class Regime { SCSC, CC, NCNC };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

class BilevelProblem {
 public:
  BilevelProblem(std::size_t d1, std::size_t d2, Regime regime, double region_radius);
  virtual ~BilevelProblem() = default;

  virtual std::string_view kind() const = 0;

  std::size_t d1() const { return d1_; }
  std::size_t d2() const { return d2_; }
  Regime regime() const { return regime_; }
  double region_radius() const { return region_radius_; }
  const RegularityConstants& constants() const { return constants_; }

  /// Outer loss f(x, y; xi) >= 0.
  virtual double outer_loss(const ParameterPair& w, const Sample& xi) const = 0;
  /// Inner loss g(x, y; zeta).
  virtual double inner_loss(const ParameterPair& w, const Sample& zeta) const = 0;
  virtual Vector outer_grad_x(const ParameterPair& w, const Sample& xi) const = 0;
  virtual Vector outer_grad_y(const ParameterPair& w, const Sample& xi) const = 0;
  virtual Vector inner_grad_x(const ParameterPair& w, const Sample& zeta) const = 0;
  virtual Vector inner_grad_y(const ParameterPair& w, const Sample& zeta) const = 0;

  /// Mean of f over d. Instances may override with a batched evaluation.
  virtual double mean_outer_loss(const ParameterPair& w, const Dataset& d) const;

  /// Exact inner solution y*(x) of the population inner problem, if known.
  virtual std::optional<Vector> inner_solution(const Vector& x) const;
  /// Exact population fixed point (x*, y*) of the first-order dynamics.
  virtual std::optional<ParameterPair> exact_minimizer() const;
  /// Exact population outer risk R(x, y).
  virtual std::optional<double> exact_population_risk(const ParameterPair& w) const;

  bool in_region(const ParameterPair& w) const;

 protected:
  RegularityConstants constants_;

 private:
  std::size_t d1_;
  std::size_t d2_;
  Regime regime_;
  double region_radius_;
};

/// Generating distributions D_1 (validation) and D_2 (training).
class PopulationSpec {
 public:
  virtual ~PopulationSpec() = default;

  virtual Sample sample_validation(RandomStream& stream) const = 0;
  virtual Sample sample_training(RandomStream& stream) const = 0;

  /// m i.i.d. validation samples.
  virtual Dataset draw_validation(std::size_t m, RandomStream& stream) const;
  /// m i.i.d. training samples.
  virtual Dataset draw_training(std::size_t m, RandomStream& stream) const;
};

struct ProblemInstance {
  std::shared_ptr<const BilevelProblem> problem;
  std::shared_ptr<const PopulationSpec> population;
};

/// Mean of f over D_val. Throws on an empty dataset.
double empirical_outer_risk(const BilevelProblem& p, const Dataset& d_val, const ParameterPair& w);

struct RiskEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of R(x, y) from n_mc fresh validation samples, or the
/// exact value (std_error 0) when the problem provides one.
RiskEstimate population_outer_risk(const BilevelProblem& p, const PopulationSpec& spec,
                                   const ParameterPair& w, std::size_t n_mc, RandomStream& stream);

// ---------------------------------------------------------------------------
// Strongly convex quadratic pair:
//   f(x, y; xi)   = 1/2 (x - a)^T P (x - a) + 1/2 (y - b)^T Q (y - b)
//   g(x, y; zeta) = 1/2 |y - M x - c|^2
// Validation payload v = (a, b), training payload v = c.

struct QuadraticParams {
  std::size_t d1 = 2;
  std::size_t d2 = 2;
  /// Eigenvalue ranges of P and Q; eigenvectors are random unless min == max.
  double p_min = 1.0;
  double p_max = 1.0;
  double q_min = 1.0;
  double q_max = 1.0;
  /// Spectral norm of M.
  double coupling = 1.0;
  /// Use M = coupling * I (requires d1 == d2) instead of a random direction.
  bool coupling_identity = false;
  /// Targets are uniform in balls of these radii around random centers.
  double target_center_norm = 0.5;
  double target_radius = 1.0;
  double inner_center_norm = 0.5;
  double inner_target_radius = 1.0;
  double region_radius = 10.0;
};

class QuadraticProblem final : public BilevelProblem {
 public:
  QuadraticProblem(const QuadraticParams& params, Matrix P, Matrix Q, Matrix M, Vector a_center,
                   Vector b_center, Vector c_center);

  std::string_view kind() const override { return "quadratic"; }

  double outer_loss(const ParameterPair& w, const Sample& xi) const override;
  double inner_loss(const ParameterPair& w, const Sample& zeta) const override;
  Vector outer_grad_x(const ParameterPair& w, const Sample& xi) const override;
  Vector outer_grad_y(const ParameterPair& w, const Sample& xi) const override;
  Vector inner_grad_x(const ParameterPair& w, const Sample& zeta) const override;
  Vector inner_grad_y(const ParameterPair& w, const Sample& zeta) const override;

  std::optional<Vector> inner_solution(const Vector& x) const override;
  std::optional<ParameterPair> exact_minimizer() const override;
  std::optional<double> exact_population_risk(const ParameterPair& w) const override;

  /// Fixed point of full-batch first-order dynamics on the given datasets.
  ParameterPair empirical_minimizer(const Dataset& d_val, const Dataset& d_train) const;

  const Matrix& P() const { return P_; }
  const Matrix& Q() const { return Q_; }
  const Matrix& M() const { return M_; }
  const QuadraticParams& params() const { return params_; }

 private:
  QuadraticParams params_;
  Matrix P_, Q_, M_;
  Vector a_center_, b_center_, c_center_;
};

/// Throws InvalidArgument if a curvature range is not positive definite.
ProblemInstance make_quadratic_scsc(const QuadraticParams& params, RandomStream& stream);

// ---------------------------------------------------------------------------
// Softplus pair (convex, nonnegative):
//   f(x, y; xi)   = log(1 + exp(<a, x> + <b, y>))
//   g(x, y; zeta) = log(1 + exp(<a', x> + <b', y>))
// Payload v = (a, b), uniform in the ball of radius feature_radius.

struct LogisticParams {
  std::size_t d1 = 3;
  std::size_t d2 = 3;
  double feature_radius = 1.0;
  double region_radius = 10.0;
};

class LogisticProblem final : public BilevelProblem {
 public:
  explicit LogisticProblem(const LogisticParams& params);

  std::string_view kind() const override { return "logistic"; }

  double outer_loss(const ParameterPair& w, const Sample& xi) const override;
  double inner_loss(const ParameterPair& w, const Sample& zeta) const override;
  Vector outer_grad_x(const ParameterPair& w, const Sample& xi) const override;
  Vector outer_grad_y(const ParameterPair& w, const Sample& xi) const override;
  Vector inner_grad_x(const ParameterPair& w, const Sample& zeta) const override;
  Vector inner_grad_y(const ParameterPair& w, const Sample& zeta) const override;

 private:
  double margin(const ParameterPair& w, const Sample& s) const;

  LogisticParams params_;
};

ProblemInstance make_logistic_cc(const LogisticParams& params, RandomStream& stream);

// ---------------------------------------------------------------------------
// Smooth nonconvex pair:
//   f(x, y; xi)   = 1/2 |tanh(x) - a|^2 + 1/2 |tanh(y) - b|^2
//   g(x, y; zeta) = 1/2 |tanh(y) - B tanh(x) - c|^2
// Targets are uniform in boxes center +- halfwidth with |center| + halfwidth <= 1.

struct NcncParams {
  std::size_t d1 = 3;
  std::size_t d2 = 3;
  double target_center_max = 0.4;
  double target_halfwidth = 0.5;
  double inner_center_max = 0.3;
  double inner_halfwidth = 0.3;
  /// Spectral norm of B.
  double coupling = 0.5;
  double region_radius = 10.0;
};

class NcncProblem final : public BilevelProblem {
 public:
  NcncProblem(const NcncParams& params, Matrix B, Vector a_center, Vector b_center, Vector c_center);

  std::string_view kind() const override { return "ncnc"; }

  double outer_loss(const ParameterPair& w, const Sample& xi) const override;
  double inner_loss(const ParameterPair& w, const Sample& zeta) const override;
  Vector outer_grad_x(const ParameterPair& w, const Sample& xi) const override;
  Vector outer_grad_y(const ParameterPair& w, const Sample& xi) const override;
  Vector inner_grad_x(const ParameterPair& w, const Sample& zeta) const override;
  Vector inner_grad_y(const ParameterPair& w, const Sample& zeta) const override;

  std::optional<double> exact_population_risk(const ParameterPair& w) const override;

  const Matrix& B() const { return B_; }
  const NcncParams& params() const { return params_; }

 private:
  Vector residual(const ParameterPair& w, const Sample& zeta) const;

  NcncParams params_;
  Matrix B_;
  Vector a_center_, b_center_, c_center_;
};

/// Throws InvalidArgument when a target box leaves [-1, 1].
ProblemInstance make_smooth_ncnc(const NcncParams& params, RandomStream& stream);

// ---------------------------------------------------------------------------
// Data reweighting on a two-Gaussian binary task with corrupted training
// labels. x holds one weight logit per training sample, y a linear
// classifier. With s(z) the logistic sigmoid and
//   p(x) = (1/n) sum_j s(x_j) b_j a_j
// (the weighted training prototype):
//   g(x, y; zeta_j) = s(x_j) * softplus(-b_j <y, a_j>) + lambda/2 |y|^2
//   f(x, y; xi)     = softplus(-b <y + p(x), a>)
// The training set is fixed at construction and indexed by Sample::tag.

struct ReweightingParams {
  std::size_t n_train = 200;
  std::size_t dim = 10;
  double corruption_rate = 0.5;
  /// Distance between the two class means.
  double separation = 2.0;
  /// Features are rescaled into the ball of this radius.
  double feature_clip = 6.0;
  double ridge = 0.1;
  double region_radius = 200.0;
};

class ReweightingProblem final : public BilevelProblem {
 public:
  ReweightingProblem(const ReweightingParams& params, Vector mean_direction, Dataset train,
                     std::vector<bool> corrupted);

  std::string_view kind() const override { return "reweighting"; }

  double outer_loss(const ParameterPair& w, const Sample& xi) const override;
  double inner_loss(const ParameterPair& w, const Sample& zeta) const override;
  Vector outer_grad_x(const ParameterPair& w, const Sample& xi) const override;
  Vector outer_grad_y(const ParameterPair& w, const Sample& xi) const override;
  Vector inner_grad_x(const ParameterPair& w, const Sample& zeta) const override;
  Vector inner_grad_y(const ParameterPair& w, const Sample& zeta) const override;
  double mean_outer_loss(const ParameterPair& w, const Dataset& d) const override;

  /// Weighted training prototype p(x).
  Vector prototype(const Vector& x) const;

  const Dataset& training_set() const { return train_; }
  const std::vector<bool>& corrupted() const { return corrupted_; }
  const Vector& mean_direction() const { return mean_direction_; }
  const ReweightingParams& params() const { return params_; }

 private:
  ReweightingParams params_;
  Vector mean_direction_;
  Dataset train_;
  std::vector<bool> corrupted_;
  /// Columns are b_j a_j.
  Matrix signed_features_;
};

/// Draws one clean sample of the two-Gaussian task.
Sample draw_two_gaussian_sample(const ReweightingParams& params, const Vector& mean_direction,
                                RandomStream& stream);

ProblemInstance make_data_reweighting(const ReweightingParams& params, RandomStream& stream);

double softplus(double t);
double sigmoid(double t);

}  // namespace bsl
