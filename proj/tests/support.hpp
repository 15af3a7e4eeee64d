#pragma once

// Independent oracles and small fixture problems shared by the unit and
// acceptance tests. Nothing here calls the library code it is used to check.

#include "bsl/analysis.hpp"
#include "bsl/core.hpp"
#include "bsl/problems.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace bsl::testing {

/// Central differences of a scalar function of the joint vector (x, y).
inline Vector fd_gradient(const std::function<double(const ParameterPair&)>& fn, const ParameterPair& w,
                          double h = 1e-5) {
  const auto d1 = w.x.size();
  Vector g(w.x.size() + w.y.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    ParameterPair plus = w, minus = w;
    double& p = i < d1 ? plus.x[i] : plus.y[i - d1];
    double& m = i < d1 ? minus.x[i] : minus.y[i - d1];
    const double step = h * std::max(1.0, std::abs(p));
    p += step;
    m -= step;
    g[i] = (fn(plus) - fn(minus)) / (2.0 * step);
  }
  return g;
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

/// Relative error with the larger norm as denominator.
inline double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Worst analytic-vs-finite-difference relative error over n random points
/// for both f and g.
inline double worst_gradient_error(const BilevelProblem& p, const PopulationSpec& spec, std::size_t n,
                                   double radius, RandomStream& rng) {
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vector v = rng.uniform_ball(p.d1() + p.d2(), radius);
    const ParameterPair w{v.head(static_cast<Eigen::Index>(p.d1())),
                          v.tail(static_cast<Eigen::Index>(p.d2()))};
    const Sample xi = spec.sample_validation(rng);
    const Sample zeta = spec.sample_training(rng);
    const Vector fa = concat(p.outer_grad_x(w, xi), p.outer_grad_y(w, xi));
    const Vector ff = fd_gradient([&](const ParameterPair& q) { return p.outer_loss(q, xi); }, w);
    const Vector ga = concat(p.inner_grad_x(w, zeta), p.inner_grad_y(w, zeta));
    const Vector gf = fd_gradient([&](const ParameterPair& q) { return p.inner_loss(q, zeta); }, w);
    worst = std::max({worst, rel_error(fa, ff), rel_error(ga, gf)});
  }
  return worst;
}

/// Neumaier-compensated summation.
inline double compensated_sum(const std::vector<double>& v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

/// Smallest eigenvalue of a symmetric PSD matrix by power iteration on
/// (shift I - A), shift taken from a Gershgorin bound.
inline double min_eigenvalue_power(const Matrix& A, int iters = 20000) {
  double shift = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) shift = std::max(shift, A.row(i).cwiseAbs().sum());
  const Matrix B = shift * Matrix::Identity(A.rows(), A.cols()) - A;
  Vector v = Vector::Ones(A.rows()) + 0.1 * Vector::LinSpaced(A.rows(), 0.0, 1.0);
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = B * v;
    lambda = v.dot(w) / v.dot(v);
    v = w / w.norm();
  }
  return shift - lambda;
}

// ---------------------------------------------------------------------------
// Direct transcriptions of the stability bounds (no log space, no shared
// helpers). Used as the oracle for the library's log-space evaluation.

struct DirectInputs {
  double ell_f, ell_g, mu_f, mu_g, L_g;
  std::vector<double> risk;
  std::size_t m1, K, T;
  double c1 = 1, c2 = 1, c4 = 1, c5 = 1, c6 = 1;
  double C = 0, C1 = 0;
};

inline double direct_ssgd(bool scsc, bool l1, const DirectInputs& d) {
  const double m1 = d.m1, K = d.K, ell = std::max(d.ell_f, d.ell_g), e = std::exp(1.0);
  double sum = 0.0;
  for (std::size_t k = 1; k <= d.K; ++k) {
    const double u = 2 * d.ell_f * d.risk[k - 1] + d.L_g * d.L_g;
    sum += l1 ? std::sqrt(u) : u;
  }
  if (scsc) {
    return l1 ? 2 * d.C / m1 * sum : 4 * (m1 + K) * e * d.C * d.C / (m1 * m1) * sum;
  }
  const double lnK = std::log(K);
  return l1 ? std::sqrt(2.0) * d.c1 * lnK * std::pow(K, d.c1 - 1) / (m1 * ell) * sum
            : 2 * d.c1 * d.c1 * (m1 + K) * e * std::pow(K, 2 * d.c1 - 2) * lnK * lnK / (m1 * m1 * ell * ell) * sum;
}

enum class DirectRegime { SCSC, CC, NCNC };

inline double direct_tsgd(DirectRegime r, bool l1, const DirectInputs& d) {
  const double m1 = d.m1, K = d.K, T = d.T, ell = std::max(d.ell_f, d.ell_g), e = std::exp(1.0);
  const double p = d.c4 * d.c5 * std::pow(T, d.c6) * std::sqrt(1 + T * T);
  double sum = 0.0;
  for (std::size_t k = 1; k <= d.K; ++k) {
    const double u = 2 * d.ell_f * d.risk[k - 1] + T * T * d.L_g * d.L_g;
    const double kk = static_cast<double>(k);
    switch (r) {
      case DirectRegime::SCSC:
        sum += l1 ? std::sqrt(u) : u;
        break;
      case DirectRegime::CC:
        sum += l1 ? std::pow(2.0, (K - kk) / 2) * std::sqrt(u) : std::pow(2.0, K - kk) * u;
        break;
      case DirectRegime::NCNC:
        sum += l1 ? std::pow(2.0, (K - kk) / 2) * std::pow(K / kk, p) * std::sqrt(u)
                  : std::pow(K / kk, 2 * p) * std::pow(2.0, K - kk) * u;
        break;
    }
  }
  switch (r) {
    case DirectRegime::SCSC:
      return l1 ? 2 * std::pow(T, d.c1 / 2) * d.C1 / m1 * sum
                : 4 * (m1 + K) * e * std::pow(T, d.c1) * d.C1 * d.C1 / (m1 * m1) * sum;
    case DirectRegime::CC: {
      const double lnT = std::log(T);
      return l1 ? 2 * d.c2 * lnT * std::pow(T, d.c2) / (m1 * std::sqrt(1 + T * T) * K * ell) * sum
                : 4 * d.c2 * d.c2 * (K + m1) * lnT * lnT * std::pow(T, 2 * d.c2) * e /
                      (m1 * m1 * (1 + T * T) * K * K * ell * ell) * sum;
    }
    case DirectRegime::NCNC:
      return l1 ? 2 * d.c4 / (m1 * ell) * sum : 4 * (m1 + K) * d.c4 * d.c4 * e / (m1 * m1 * ell * ell) * sum;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Fixture problems

/// f = c (constant), g = 1/2 |y - x|^2. Population samples are empty.
class ConstantOuterProblem final : public BilevelProblem {
 public:
  ConstantOuterProblem(double c, std::size_t d) : BilevelProblem(d, d, Regime::CC, 100.0), c_(c) {
    constants_.ell_g = 1.0;
    constants_.ell_f = 0.0;
    constants_.alpha = 1.0;
    constants_.tau = 1.0;
  }
  std::string_view kind() const override { return "constant"; }
  double outer_loss(const ParameterPair&, const Sample&) const override { return c_; }
  double inner_loss(const ParameterPair& w, const Sample&) const override { return 0.5 * (w.y - w.x).squaredNorm(); }
  Vector outer_grad_x(const ParameterPair& w, const Sample&) const override { return Vector::Zero(w.x.size()); }
  Vector outer_grad_y(const ParameterPair& w, const Sample&) const override { return Vector::Zero(w.y.size()); }
  Vector inner_grad_x(const ParameterPair& w, const Sample&) const override { return w.x - w.y; }
  Vector inner_grad_y(const ParameterPair& w, const Sample&) const override { return w.y - w.x; }

 private:
  double c_;
};

class EmptyPopulation final : public PopulationSpec {
 public:
  Sample sample_validation(RandomStream& s) const override { return {Vector::Constant(1, s.uniform()), 0, 0}; }
  Sample sample_training(RandomStream& s) const override { return {Vector::Constant(1, s.uniform()), 0, 0}; }
};

/// f = offset + <slope, (x, y)>, g = 1/2 |y|^2. Lipschitz constant |slope|.
class LinearOuterProblem final : public BilevelProblem {
 public:
  LinearOuterProblem(Vector slope, std::size_t d1)
      : BilevelProblem(d1, static_cast<std::size_t>(slope.size()) - d1, Regime::CC, 1.0), slope_(std::move(slope)) {
    constants_.L_f = slope_.norm();
    constants_.ell_g = 1.0;
    constants_.mu_g = 1.0;
  }
  std::string_view kind() const override { return "linear"; }
  double outer_loss(const ParameterPair& w, const Sample&) const override {
    return 10.0 + slope_.dot(concat(w.x, w.y));
  }
  double inner_loss(const ParameterPair& w, const Sample&) const override { return 0.5 * w.y.squaredNorm(); }
  Vector outer_grad_x(const ParameterPair&, const Sample&) const override { return slope_.head(d1()); }
  Vector outer_grad_y(const ParameterPair&, const Sample&) const override { return slope_.tail(d2()); }
  Vector inner_grad_x(const ParameterPair& w, const Sample&) const override { return Vector::Zero(w.x.size()); }
  Vector inner_grad_y(const ParameterPair& w, const Sample&) const override { return w.y; }

 private:
  Vector slope_;
};

/// Delegates to another problem but hides its exact population risk.
class WithoutExactRisk final : public BilevelProblem {
 public:
  explicit WithoutExactRisk(std::shared_ptr<const BilevelProblem> inner)
      : BilevelProblem(inner->d1(), inner->d2(), inner->regime(), inner->region_radius()), inner_(std::move(inner)) {
    constants_ = inner_->constants();
  }
  std::string_view kind() const override { return inner_->kind(); }
  double outer_loss(const ParameterPair& w, const Sample& s) const override { return inner_->outer_loss(w, s); }
  double inner_loss(const ParameterPair& w, const Sample& s) const override { return inner_->inner_loss(w, s); }
  Vector outer_grad_x(const ParameterPair& w, const Sample& s) const override { return inner_->outer_grad_x(w, s); }
  Vector outer_grad_y(const ParameterPair& w, const Sample& s) const override { return inner_->outer_grad_y(w, s); }
  Vector inner_grad_x(const ParameterPair& w, const Sample& s) const override { return inner_->inner_grad_x(w, s); }
  Vector inner_grad_y(const ParameterPair& w, const Sample& s) const override { return inner_->inner_grad_y(w, s); }

 private:
  std::shared_ptr<const BilevelProblem> inner_;
};

/// Spearman rank correlation (no ties expected).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace bsl::testing
