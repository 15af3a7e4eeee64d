#include "bsl/problems.hpp"
#include "random_matrix.hpp"

#include <cmath>

namespace bsl {

namespace {

// max_t |2 t (1 - t^2)| over t in (-1, 1), i.e. sup |d/du sech^2(u)|.
constexpr double kSech2SlopeMax = 0.769800358919501;

Vector tanh_of(const Vector& v) { return v.array().tanh().matrix(); }

Vector sech2_of(const Vector& v) { return (1.0 - v.array().tanh().square()).matrix(); }

// Scans h(u) = 1/2 (tanh u - a)^2 with |a| <= A over a grid in t = tanh u.
// Returns {sup |h'|, sup |h''|} inflated by a grid-error margin.
std::pair<double, double> coordinate_bounds(double A) {
  constexpr int kGrid = 400000;
  double d1 = 0.0;
  double d2 = 0.0;
  for (int i = 1; i < kGrid; ++i) {
    const double t = -1.0 + 2.0 * static_cast<double>(i) / kGrid;
    const double s = 1.0 - t * t;
    d1 = std::max(d1, (std::abs(t) + A) * s);
    for (double a : {-A, A}) d2 = std::max(d2, std::abs(s * s - 2.0 * (t - a) * t * s));
  }
  return {d1 * 1.001 + 1e-6, d2 * 1.001 + 1e-6};
}

class NcncPopulation final : public PopulationSpec {
 public:
  NcncPopulation(NcncParams params, Vector a, Vector b, Vector c)
      : params_(params), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {}

  Sample sample_validation(RandomStream& stream) const override {
    Sample s;
    s.v.resize(static_cast<Eigen::Index>(params_.d1 + params_.d2));
    s.v.head(a_.size()) = a_ + detail::uniform_box(params_.d1, params_.target_halfwidth, stream);
    s.v.tail(b_.size()) = b_ + detail::uniform_box(params_.d2, params_.target_halfwidth, stream);
    return s;
  }

  Sample sample_training(RandomStream& stream) const override {
    Sample s;
    s.v = c_ + detail::uniform_box(params_.d2, params_.inner_halfwidth, stream);
    return s;
  }

 private:
  NcncParams params_;
  Vector a_, b_, c_;
};

}  // namespace

NcncProblem::NcncProblem(const NcncParams& params, Matrix B, Vector a_center, Vector b_center, Vector c_center)
    : BilevelProblem(params.d1, params.d2, Regime::NCNC, params.region_radius),
      params_(params),
      B_(std::move(B)),
      a_center_(std::move(a_center)),
      b_center_(std::move(b_center)),
      c_center_(std::move(c_center)) {
  const double A = params.target_center_max + params.target_halfwidth;
  const auto [h1, h2] = coordinate_bounds(A);
  const double d = static_cast<double>(params.d1 + params.d2);
  const double s = params.coupling;
  const double r_max = std::sqrt(static_cast<double>(params.d2)) *
                           (1.0 + params.inner_center_max + params.inner_halfwidth) +
                       s * std::sqrt(static_cast<double>(params.d1));
  constants_.L_f = std::sqrt(d) * h1;
  constants_.ell_f = h2;
  constants_.L_g = std::sqrt(1.0 + s * s) * r_max;
  constants_.ell_g = 1.0 + s * s + kSech2SlopeMax * std::max(1.0, s) * r_max;
  constants_.alpha = 1.0;
  constants_.tau = constants_.ell_f;
  constants_.grad_at_zero_sup = A * std::sqrt(d);
  constants_.validate();
}

double NcncProblem::outer_loss(const ParameterPair& w, const Sample& xi) const {
  return 0.5 * (tanh_of(w.x) - xi.v.head(w.x.size())).squaredNorm() +
         0.5 * (tanh_of(w.y) - xi.v.tail(w.y.size())).squaredNorm();
}

Vector NcncProblem::residual(const ParameterPair& w, const Sample& zeta) const {
  return tanh_of(w.y) - B_ * tanh_of(w.x) - zeta.v;
}

double NcncProblem::inner_loss(const ParameterPair& w, const Sample& zeta) const {
  return 0.5 * residual(w, zeta).squaredNorm();
}

Vector NcncProblem::outer_grad_x(const ParameterPair& w, const Sample& xi) const {
  return ((tanh_of(w.x) - xi.v.head(w.x.size())).array() * sech2_of(w.x).array()).matrix();
}

Vector NcncProblem::outer_grad_y(const ParameterPair& w, const Sample& xi) const {
  return ((tanh_of(w.y) - xi.v.tail(w.y.size())).array() * sech2_of(w.y).array()).matrix();
}

Vector NcncProblem::inner_grad_x(const ParameterPair& w, const Sample& zeta) const {
  return -(sech2_of(w.x).array() * (B_.transpose() * residual(w, zeta)).array()).matrix();
}

Vector NcncProblem::inner_grad_y(const ParameterPair& w, const Sample& zeta) const {
  return (residual(w, zeta).array() * sech2_of(w.y).array()).matrix();
}

std::optional<double> NcncProblem::exact_population_risk(const ParameterPair& w) const {
  const double h = params_.target_halfwidth;
  const double var = h * h / 3.0;
  const double d = static_cast<double>(d1() + d2());
  return 0.5 * (tanh_of(w.x) - a_center_).squaredNorm() + 0.5 * (tanh_of(w.y) - b_center_).squaredNorm() +
         0.5 * var * d;
}

ProblemInstance make_smooth_ncnc(const NcncParams& params, RandomStream& stream) {
  if (params.d1 == 0 || params.d2 == 0) throw InvalidArgument("ncnc problem: dimensions must be >= 1");
  if (params.target_center_max < 0.0 || params.target_halfwidth < 0.0 || params.inner_center_max < 0.0 ||
      params.inner_halfwidth < 0.0 || params.coupling < 0.0) {
    throw InvalidArgument("ncnc problem: negative scale parameter");
  }
  if (params.target_center_max + params.target_halfwidth > 1.0) {
    throw InvalidArgument("ncnc problem: outer targets must lie in [-1, 1]");
  }
  RandomStream s = stream.fork("ncnc");
  RandomStream ms = s.fork("coupling");
  Matrix B = detail::random_with_spectral_norm(params.d2, params.d1, params.coupling, ms);
  RandomStream ts = s.fork("targets");
  Vector a = detail::uniform_box(params.d1, params.target_center_max, ts);
  Vector b = detail::uniform_box(params.d2, params.target_center_max, ts);
  Vector c = detail::uniform_box(params.d2, params.inner_center_max, ts);
  auto problem = std::make_shared<NcncProblem>(params, std::move(B), a, b, c);
  auto population = std::make_shared<NcncPopulation>(params, a, b, c);
  return {problem, population};
}

}  // namespace bsl
