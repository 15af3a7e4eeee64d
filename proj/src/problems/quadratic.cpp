#include "bsl/problems.hpp"
#include "random_matrix.hpp"

#include <cmath>

namespace bsl {

namespace {

class QuadraticPopulation final : public PopulationSpec {
 public:
  QuadraticPopulation(QuadraticParams params, Vector a_center, Vector b_center, Vector c_center)
      : params_(params), a_(std::move(a_center)), b_(std::move(b_center)), c_(std::move(c_center)) {}

  Sample sample_validation(RandomStream& stream) const override {
    Sample s;
    s.v.resize(static_cast<Eigen::Index>(params_.d1 + params_.d2));
    s.v.head(a_.size()) = a_ + stream.uniform_ball(params_.d1, params_.target_radius);
    s.v.tail(b_.size()) = b_ + stream.uniform_ball(params_.d2, params_.target_radius);
    return s;
  }

  Sample sample_training(RandomStream& stream) const override {
    Sample s;
    s.v = c_ + stream.uniform_ball(params_.d2, params_.inner_target_radius);
    return s;
  }

 private:
  QuadraticParams params_;
  Vector a_, b_, c_;
};

std::pair<double, double> eigen_range(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

QuadraticProblem::QuadraticProblem(const QuadraticParams& params, Matrix P, Matrix Q, Matrix M,
                                   Vector a_center, Vector b_center, Vector c_center)
    : BilevelProblem(params.d1, params.d2, Regime::SCSC, params.region_radius),
      params_(params),
      P_(std::move(P)),
      Q_(std::move(Q)),
      M_(std::move(M)),
      a_center_(std::move(a_center)),
      b_center_(std::move(b_center)),
      c_center_(std::move(c_center)) {
  const auto [p_lo, p_hi] = eigen_range(P_);
  const auto [q_lo, q_hi] = eigen_range(Q_);
  if (!(p_lo > 0.0) || !(q_lo > 0.0)) {
    throw InvalidArgument("quadratic problem: curvature matrices must be positive definite");
  }
  Eigen::JacobiSVD<Matrix> svd(M_);
  const double sigma = M_.size() == 0 ? 0.0 : svd.singularValues()(0);
  const double R = params.region_radius;
  const double a_max = a_center_.norm() + params.target_radius;
  const double b_max = b_center_.norm() + params.target_radius;
  const double target_max = std::sqrt(a_max * a_max + b_max * b_max);
  const double c_max = c_center_.norm() + params.inner_target_radius;
  const double jac = std::sqrt(1.0 + sigma * sigma);

  constants_.ell_f = std::max(p_hi, q_hi);
  constants_.mu_f = std::min(p_lo, q_lo);
  // Joint Hessian of g is J^T J with J = [-M, I]; |J|^2 = 1 + sigma^2.
  constants_.ell_g = 1.0 + sigma * sigma;
  constants_.mu_g = 1.0;
  constants_.L_f = constants_.ell_f * (R + target_max);
  constants_.L_g = jac * (jac * R + c_max);
  constants_.alpha = 1.0;
  constants_.tau = constants_.ell_f;
  constants_.grad_at_zero_sup = constants_.ell_f * target_max;
  constants_.validate();
}

double QuadraticProblem::outer_loss(const ParameterPair& w, const Sample& xi) const {
  const Vector dx = w.x - xi.v.head(w.x.size());
  const Vector dy = w.y - xi.v.tail(w.y.size());
  return 0.5 * dx.dot(P_ * dx) + 0.5 * dy.dot(Q_ * dy);
}

double QuadraticProblem::inner_loss(const ParameterPair& w, const Sample& zeta) const {
  return 0.5 * (w.y - M_ * w.x - zeta.v).squaredNorm();
}

Vector QuadraticProblem::outer_grad_x(const ParameterPair& w, const Sample& xi) const {
  return P_ * (w.x - xi.v.head(w.x.size()));
}

Vector QuadraticProblem::outer_grad_y(const ParameterPair& w, const Sample& xi) const {
  return Q_ * (w.y - xi.v.tail(w.y.size()));
}

Vector QuadraticProblem::inner_grad_x(const ParameterPair& w, const Sample& zeta) const {
  return -M_.transpose() * (w.y - M_ * w.x - zeta.v);
}

Vector QuadraticProblem::inner_grad_y(const ParameterPair& w, const Sample& zeta) const {
  return w.y - M_ * w.x - zeta.v;
}

std::optional<Vector> QuadraticProblem::inner_solution(const Vector& x) const {
  return Vector(M_ * x + c_center_);
}

std::optional<ParameterPair> QuadraticProblem::exact_minimizer() const {
  return ParameterPair(a_center_, M_ * a_center_ + c_center_);
}

std::optional<double> QuadraticProblem::exact_population_risk(const ParameterPair& w) const {
  const Vector dx = w.x - a_center_;
  const Vector dy = w.y - b_center_;
  const double r2 = params_.target_radius * params_.target_radius;
  const double var_a = r2 / static_cast<double>(d1() + 2);
  const double var_b = r2 / static_cast<double>(d2() + 2);
  return 0.5 * dx.dot(P_ * dx) + 0.5 * var_a * P_.trace() + 0.5 * dy.dot(Q_ * dy) +
         0.5 * var_b * Q_.trace();
}

ParameterPair QuadraticProblem::empirical_minimizer(const Dataset& d_val, const Dataset& d_train) const {
  if (d_val.empty() || d_train.empty()) throw InvalidArgument("empirical_minimizer: empty dataset");
  Vector a_mean = Vector::Zero(static_cast<Eigen::Index>(d1()));
  for (const Sample& s : d_val.samples()) a_mean += s.v.head(a_mean.size());
  a_mean /= static_cast<double>(d_val.size());
  Vector c_mean = Vector::Zero(static_cast<Eigen::Index>(d2()));
  for (const Sample& s : d_train.samples()) c_mean += s.v;
  c_mean /= static_cast<double>(d_train.size());
  return {a_mean, M_ * a_mean + c_mean};
}

ProblemInstance make_quadratic_scsc(const QuadraticParams& params, RandomStream& stream) {
  if (params.d1 == 0 || params.d2 == 0) throw InvalidArgument("quadratic problem: dimensions must be >= 1");
  if (!(params.p_min > 0.0) || !(params.q_min > 0.0) || params.p_max < params.p_min ||
      params.q_max < params.q_min) {
    throw InvalidArgument("quadratic problem: curvature ranges must be positive with min <= max");
  }
  if (params.coupling < 0.0 || params.target_radius < 0.0 || params.inner_target_radius < 0.0 ||
      params.target_center_norm < 0.0 || params.inner_center_norm < 0.0) {
    throw InvalidArgument("quadratic problem: negative scale parameter");
  }
  RandomStream s = stream.fork("quadratic");
  RandomStream curv = s.fork("curvature");
  Matrix P = detail::random_spd(params.d1, params.p_min, params.p_max, curv);
  Matrix Q = detail::random_spd(params.d2, params.q_min, params.q_max, curv);
  Matrix M;
  if (params.coupling_identity) {
    if (params.d1 != params.d2) throw InvalidArgument("quadratic problem: identity coupling needs d1 == d2");
    M = params.coupling * Matrix::Identity(static_cast<Eigen::Index>(params.d2),
                                           static_cast<Eigen::Index>(params.d1));
  } else {
    RandomStream cs = s.fork("coupling");
    M = detail::random_with_spectral_norm(params.d2, params.d1, params.coupling, cs);
  }
  RandomStream ts = s.fork("targets");
  Vector a = detail::random_direction(params.d1, params.target_center_norm, ts);
  Vector b = detail::random_direction(params.d2, params.target_center_norm, ts);
  Vector c = detail::random_direction(params.d2, params.inner_center_norm, ts);
  auto problem = std::make_shared<QuadraticProblem>(params, std::move(P), std::move(Q), std::move(M), a, b, c);
  auto population = std::make_shared<QuadraticPopulation>(params, a, b, c);
  return {problem, population};
}

}  // namespace bsl
