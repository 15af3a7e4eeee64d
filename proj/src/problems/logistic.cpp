#include "bsl/problems.hpp"

#include <cmath>

namespace bsl {

namespace {

class LogisticPopulation final : public PopulationSpec {
 public:
  explicit LogisticPopulation(LogisticParams params) : params_(params) {}

  Sample sample_validation(RandomStream& stream) const override { return draw(stream); }
  Sample sample_training(RandomStream& stream) const override { return draw(stream); }

 private:
  Sample draw(RandomStream& stream) const {
    Sample s;
    s.v = stream.uniform_ball(params_.d1 + params_.d2, params_.feature_radius);
    return s;
  }

  LogisticParams params_;
};

}  // namespace

LogisticProblem::LogisticProblem(const LogisticParams& params)
    : BilevelProblem(params.d1, params.d2, Regime::CC, params.region_radius), params_(params) {
  const double B = params.feature_radius;
  constants_.L_f = B;
  constants_.L_g = B;
  constants_.ell_f = 0.25 * B * B;
  constants_.ell_g = 0.25 * B * B;
  constants_.alpha = 1.0;
  constants_.tau = constants_.ell_f;
  constants_.grad_at_zero_sup = 0.5 * B;
  constants_.validate();
}

double LogisticProblem::margin(const ParameterPair& w, const Sample& s) const {
  return s.v.head(w.x.size()).dot(w.x) + s.v.tail(w.y.size()).dot(w.y);
}

double LogisticProblem::outer_loss(const ParameterPair& w, const Sample& xi) const {
  return softplus(margin(w, xi));
}

double LogisticProblem::inner_loss(const ParameterPair& w, const Sample& zeta) const {
  return softplus(margin(w, zeta));
}

Vector LogisticProblem::outer_grad_x(const ParameterPair& w, const Sample& xi) const {
  return sigmoid(margin(w, xi)) * xi.v.head(w.x.size());
}

Vector LogisticProblem::outer_grad_y(const ParameterPair& w, const Sample& xi) const {
  return sigmoid(margin(w, xi)) * xi.v.tail(w.y.size());
}

Vector LogisticProblem::inner_grad_x(const ParameterPair& w, const Sample& zeta) const {
  return sigmoid(margin(w, zeta)) * zeta.v.head(w.x.size());
}

Vector LogisticProblem::inner_grad_y(const ParameterPair& w, const Sample& zeta) const {
  return sigmoid(margin(w, zeta)) * zeta.v.tail(w.y.size());
}

ProblemInstance make_logistic_cc(const LogisticParams& params, RandomStream&) {
  if (params.d1 == 0 || params.d2 == 0) throw InvalidArgument("logistic problem: dimensions must be >= 1");
  if (!(params.feature_radius > 0.0) || !std::isfinite(params.feature_radius)) {
    throw InvalidArgument("logistic problem: feature norm bound must be positive and finite");
  }
  return {std::make_shared<LogisticProblem>(params), std::make_shared<LogisticPopulation>(params)};
}

}  // namespace bsl
