#include "bsl/problems.hpp"
#include "random_matrix.hpp"

#include <cmath>
#include <numbers>

namespace bsl {

namespace {

// sup |s''(t)| for the logistic sigmoid s.
constexpr double kSigmoidCurvatureMax = 0.0962250448649376;

class ReweightingPopulation final : public PopulationSpec {
 public:
  ReweightingPopulation(ReweightingParams params, Vector direction, Dataset train)
      : params_(params), direction_(std::move(direction)), train_(std::move(train)) {}

  Sample sample_validation(RandomStream& stream) const override {
    return draw_two_gaussian_sample(params_, direction_, stream);
  }

  Sample sample_training(RandomStream& stream) const override { return train_[stream.index(train_.size())]; }

  /// The training set is part of the problem: x carries one weight per sample.
  Dataset draw_training(std::size_t m, RandomStream&) const override {
    if (m != 0 && m != train_.size()) {
      throw InvalidArgument("reweighting problem: training set is fixed, m2 must equal n_train");
    }
    return train_;
  }

 private:
  ReweightingParams params_;
  Vector direction_;
  Dataset train_;
};

}  // namespace

Sample draw_two_gaussian_sample(const ReweightingParams& params, const Vector& mean_direction,
                                RandomStream& stream) {
  Sample s;
  s.label = stream.uniform() < 0.5 ? -1.0 : 1.0;
  s.v = s.label * (0.5 * params.separation) * mean_direction + stream.normal_vector(params.dim);
  const double norm = s.v.norm();
  if (norm > params.feature_clip) s.v *= params.feature_clip / norm;
  return s;
}

ReweightingProblem::ReweightingProblem(const ReweightingParams& params, Vector mean_direction, Dataset train,
                                       std::vector<bool> corrupted)
    : BilevelProblem(params.n_train, params.dim, Regime::NCNC, params.region_radius),
      params_(params),
      mean_direction_(std::move(mean_direction)),
      train_(std::move(train)),
      corrupted_(std::move(corrupted)) {
  const auto n = static_cast<Eigen::Index>(params.n_train);
  signed_features_.resize(static_cast<Eigen::Index>(params.dim), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Sample& s = train_[static_cast<std::size_t>(j)];
    signed_features_.col(j) = s.label * s.v;
  }
  const double A = params.feature_clip;
  const double nd = static_cast<double>(params.n_train);
  const double R = params.region_radius;
  const double lam = params.ridge;
  const double score_lip = std::sqrt(A * A + A * A * A * A / (16.0 * nd));
  constants_.L_f = score_lip;
  constants_.ell_f = 0.25 * score_lip * score_lip + kSigmoidCurvatureMax * A * A / nd;
  const double loss_max = std::numbers::ln2 + A * R;
  constants_.L_g = std::hypot(0.25 * loss_max, A + lam * R);
  constants_.ell_g = 0.25 * A * A + lam + 0.5 * A + kSigmoidCurvatureMax * loss_max;
  constants_.mu_g = lam;
  constants_.alpha = 1.0;
  constants_.tau = constants_.ell_f;
  constants_.grad_at_zero_sup = constants_.L_f;
  constants_.validate();
}

Vector ReweightingProblem::prototype(const Vector& x) const {
  const Vector weights = x.unaryExpr([](double t) { return sigmoid(t); });
  return signed_features_ * weights / static_cast<double>(params_.n_train);
}

double ReweightingProblem::outer_loss(const ParameterPair& w, const Sample& xi) const {
  return softplus(-xi.label * (w.y + prototype(w.x)).dot(xi.v));
}

double ReweightingProblem::mean_outer_loss(const ParameterPair& w, const Dataset& d) const {
  const Vector model = w.y + prototype(w.x);
  double sum = 0.0;
  for (const Sample& s : d.samples()) sum += softplus(-s.label * model.dot(s.v));
  return sum / static_cast<double>(d.size());
}

Vector ReweightingProblem::outer_grad_x(const ParameterPair& w, const Sample& xi) const {
  const double m = xi.label * (w.y + prototype(w.x)).dot(xi.v);
  const double coeff = -sigmoid(-m) * xi.label / static_cast<double>(params_.n_train);
  const Vector slope = w.x.unaryExpr([](double t) {
    const double s = sigmoid(t);
    return s * (1.0 - s);
  });
  return coeff * (slope.array() * (signed_features_.transpose() * xi.v).array()).matrix();
}

Vector ReweightingProblem::outer_grad_y(const ParameterPair& w, const Sample& xi) const {
  const double m = xi.label * (w.y + prototype(w.x)).dot(xi.v);
  return -sigmoid(-m) * xi.label * xi.v;
}

double ReweightingProblem::inner_loss(const ParameterPair& w, const Sample& zeta) const {
  const double m = zeta.label * w.y.dot(zeta.v);
  return sigmoid(w.x[static_cast<Eigen::Index>(zeta.tag)]) * softplus(-m) + 0.5 * params_.ridge * w.y.squaredNorm();
}

Vector ReweightingProblem::inner_grad_x(const ParameterPair& w, const Sample& zeta) const {
  const auto j = static_cast<Eigen::Index>(zeta.tag);
  const double s = sigmoid(w.x[j]);
  Vector g = Vector::Zero(w.x.size());
  g[j] = s * (1.0 - s) * softplus(-zeta.label * w.y.dot(zeta.v));
  return g;
}

Vector ReweightingProblem::inner_grad_y(const ParameterPair& w, const Sample& zeta) const {
  const double m = zeta.label * w.y.dot(zeta.v);
  const double weight = sigmoid(w.x[static_cast<Eigen::Index>(zeta.tag)]);
  return -weight * sigmoid(-m) * zeta.label * zeta.v + params_.ridge * w.y;
}

ProblemInstance make_data_reweighting(const ReweightingParams& params, RandomStream& stream) {
  if (params.n_train < 1) throw InvalidArgument("reweighting problem: n_train must be >= 1");
  if (params.dim < 1) throw InvalidArgument("reweighting problem: dim must be >= 1");
  if (!(params.corruption_rate >= 0.0 && params.corruption_rate <= 1.0)) {
    throw InvalidArgument("reweighting problem: corruption_rate must lie in [0, 1]");
  }
  if (!(params.feature_clip > 0.0) || !std::isfinite(params.feature_clip) || params.ridge < 0.0 ||
      params.separation < 0.0) {
    throw InvalidArgument("reweighting problem: invalid scale parameter");
  }
  RandomStream s = stream.fork("reweighting");
  RandomStream ds = s.fork("direction");
  Vector direction = detail::random_direction(params.dim, 1.0, ds);
  RandomStream train_stream = s.fork("train");
  RandomStream flip_stream = s.fork("corruption");
  std::vector<Sample> train;
  std::vector<bool> corrupted;
  train.reserve(params.n_train);
  for (std::size_t j = 0; j < params.n_train; ++j) {
    Sample smp = draw_two_gaussian_sample(params, direction, train_stream);
    const bool flip = flip_stream.uniform() < params.corruption_rate;
    if (flip) smp.label = -smp.label;
    smp.tag = j;
    corrupted.push_back(flip);
    train.push_back(std::move(smp));
  }
  Dataset train_set(std::move(train));
  auto problem = std::make_shared<ReweightingProblem>(params, direction, train_set, std::move(corrupted));
  auto population = std::make_shared<ReweightingPopulation>(params, direction, train_set);
  return {problem, population};
}

}  // namespace bsl
