#include <doctest.h>

#include "bsl/analysis.hpp"
#include "support.hpp"

#include <cmath>

using namespace bsl;
using namespace bsl::testing;

namespace {

RegularityConstants unit_constants() {
  RegularityConstants rc;
  rc.mu_f = rc.mu_g = rc.ell_f = rc.ell_g = 1.0;
  rc.L_g = 1.0;
  return rc;
}

BoundInputs inputs(const RegularityConstants& rc, std::vector<double> risk, std::size_t m1, std::size_t T = 1) {
  BoundInputs in;
  in.constants = rc;
  in.K = risk.size();
  in.risk_path = std::move(risk);
  in.m1 = m1;
  in.T = T;
  return in;
}

DirectInputs direct_from(const BoundInputs& in) {
  DirectInputs d;
  d.ell_f = in.constants.ell_f;
  d.ell_g = in.constants.ell_g;
  d.mu_f = in.constants.mu_f;
  d.mu_g = in.constants.mu_g;
  d.L_g = in.constants.L_g;
  d.risk = in.risk_path;
  d.m1 = in.m1;
  d.K = in.K;
  d.T = in.T;
  d.c1 = in.free.c1;
  d.c2 = in.free.c2;
  d.c4 = in.free.c4;
  d.c5 = in.free.c5;
  d.c6 = in.free.c6;
  d.C = in.free.C.value_or(0.0);
  d.C1 = in.free.C1.value_or(0.0);
  return d;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

ProblemInstance quadratic(std::uint64_t seed = 1) {
  RandomStream s(seed);
  return make_quadratic_scsc({}, s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Gap bounds

TEST_CASE("Lipschitz gap bound") {
  CHECK(gap_bound_l1(3.0, 0.0) == 0.0);
  CHECK(gap_bound_l1(2.0, 0.3) == doctest::Approx(0.6));
  CHECK_THROWS_AS(gap_bound_l1(-1.0, 0.3), InvalidArgument);
  CHECK_THROWS_AS(gap_bound_l1(1.0, -0.3), InvalidArgument);
}

TEST_CASE("smooth gap bound with the optimal weight") {
  CHECK(gap_bound_l2(1.0, 0.0, 5.0) == 0.0);
  CHECK(gap_bound_l2(1.0, 0.25, 2.0) == doctest::Approx(1.125).epsilon(1e-14));
  CHECK(gap_bound_l2(2.0, 0.25, 2.0, 4.0) == doctest::Approx(2.0 / 4.0 * 2.0 + 6.0 * 0.25 / 2.0));
  CHECK_THROWS_AS(gap_bound_l2(1.0, 0.25, 2.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(gap_bound_l2(1.0, 0.25, 2.0, -1.0), InvalidArgument);
}

TEST_CASE("optimal-weight smooth bound is below every explicit weight") {
  RandomStream rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double ell = 0.1 + 5 * rng.uniform(), beta_sq = 1e-4 + rng.uniform(), risk = 1e-3 + 3 * rng.uniform();
    const double gamma = std::exp(-7.0 + 14.0 * rng.uniform());
    CHECK(gap_bound_l2(ell, beta_sq, risk) <= gap_bound_l2(ell, beta_sq, risk, gamma) * (1 + 1e-12));
  }
}

TEST_CASE("explicit-weight smooth bound is minimized near the closed-form weight") {
  const double ell = 1.5, beta_sq = 0.04, risk = 0.7;
  double best = INFINITY, best_gamma = 0.0;
  for (int i = 0; i <= 6000; ++i) {
    const double gamma = std::pow(10.0, -3.0 + 6.0 * i / 6000.0);
    const double v = gap_bound_l2(ell, beta_sq, risk, gamma);
    if (v < best) {
      best = v;
      best_gamma = gamma;
    }
  }
  const double closed = std::sqrt(2.0 * ell * risk / beta_sq);
  CHECK(best_gamma == doctest::Approx(closed).epsilon(0.003));
  CHECK(best >= gap_bound_l2(ell, beta_sq, risk) * (1 - 1e-9));
}

TEST_CASE("self-bounding constant") {
  CHECK(self_bounding_constant(1.0, 2.0, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(self_bounding_constant(0.0, 0.5, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(self_bounding_constant(0.5, 1.0, 0.0) == doctest::Approx(std::pow(3.0, 1.0 / 3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(self_bounding_constant(1.5, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(self_bounding_constant(-0.1, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(self_bounding_constant(1.0, 0.0, 0.0), InvalidArgument);
}

TEST_CASE("Holder gap bound") {
  const double tau = 3.0, gamma = 0.7, term = 1.3, beta_sq = 0.2;
  CHECK(gap_bound_holder(1.0, tau, 0.0, gamma, term, beta_sq) ==
        doctest::Approx(2 * tau / (2 * gamma) * term + gamma * beta_sq / 2).epsilon(1e-14));
  CHECK(gap_bound_holder(0.5, 1.0, 0.0, 2.0, 0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(gap_bound_holder(1.0, 1.0, 0.0, 0.0, term, beta_sq), InvalidArgument);
  // Grid minimum over the weight matches the stationary point.
  double best = INFINITY, best_gamma = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double g = std::pow(10.0, -3.0 + 6.0 * i / 4000.0);
    const double v = gap_bound_holder(1.0, tau, 0.0, g, term, beta_sq);
    if (v < best) best = v, best_gamma = g;
  }
  const double c = self_bounding_constant(1.0, tau, 0.0);
  CHECK(best_gamma == doctest::Approx(std::sqrt(c * c * term / beta_sq)).epsilon(0.01));
  CHECK(gap_bound_holder(1.0, tau, 0.0, std::nullopt, term, beta_sq) == doctest::Approx(best).epsilon(1e-5));
}

TEST_CASE("self-bounding property holds pointwise on the smooth nonconvex pair") {
  RandomStream s(3);
  const auto inst = make_smooth_ncnc({}, s);
  RandomStream rng(4);
  CHECK(self_bounding_violations(*inst.problem, *inst.population, 10000, 0.0, 1e-10, rng) == 0);
}

// ---------------------------------------------------------------------------
// Stability bounds

TEST_CASE("stability bounds vanish with zero risk and zero inner Lipschitz constant") {
  auto rc = unit_constants();
  rc.L_g = 0.0;
  for (auto m : {BoundMeasure::L1, BoundMeasure::L2}) {
    CHECK(ssgd_stability_bound(Regime::SCSC, m, inputs(rc, {0, 0, 0}, 10)) == 0.0);
    CHECK(ssgd_stability_bound(Regime::CC, m, inputs(rc, {0, 0, 0}, 10)) == 0.0);
    for (Regime r : {Regime::CC, Regime::NCNC}) CHECK(tsgd_stability_bound(r, m, inputs(rc, {0, 0, 0}, 10, 2)) == 0.0);
  }
}

TEST_CASE("zero outer iterations give a zero bound") {
  const auto in = inputs(unit_constants(), {}, 10, 2);
  CHECK(ssgd_stability_bound(Regime::SCSC, BoundMeasure::L1, in) == 0.0);
  CHECK(tsgd_stability_bound(Regime::NCNC, BoundMeasure::L2, in) == 0.0);
}

TEST_CASE("SSGD SC-SC hand case") {
  const double C = (4.0 + std::sqrt(12.0)) / 4.0;
  const double v = ssgd_stability_bound(Regime::SCSC, BoundMeasure::L1, inputs(unit_constants(), {0.0}, 10));
  CHECK(std::abs(v - 2.0 * C / 10.0) < 1e-12);
  CHECK(v == doctest::Approx(0.3732).epsilon(1e-4));
}

TEST_CASE("TSGD C-C hand case") {
  auto rc = unit_constants();
  const double v = tsgd_stability_bound(Regime::CC, BoundMeasure::L1, inputs(rc, {0.0, 0.0}, 10, 2));
  const double hand = (2.0 * std::log(2.0) * 2.0) / (10.0 * std::sqrt(5.0) * 2.0) * (std::sqrt(2.0) * 2.0 + 2.0);
  CHECK(std::abs(v - hand) < 1e-10);
  CHECK(v == doctest::Approx(0.2994).epsilon(1e-3));
}

TEST_CASE("doubling m1 halves the l1 bound and rescales the l2 bound") {
  const auto rc = unit_constants();
  const std::vector<double> risk{0.3, 0.2, 0.1, 0.05};
  const std::size_t m1 = 25, K = risk.size();
  for (Regime r : {Regime::SCSC, Regime::CC}) {
    const double a1 = ssgd_stability_bound(r, BoundMeasure::L1, inputs(rc, risk, m1));
    const double b1 = ssgd_stability_bound(r, BoundMeasure::L1, inputs(rc, risk, 2 * m1));
    CHECK(b1 == doctest::Approx(a1 / 2).epsilon(1e-13));
    const double a2 = ssgd_stability_bound(r, BoundMeasure::L2, inputs(rc, risk, m1));
    const double b2 = ssgd_stability_bound(r, BoundMeasure::L2, inputs(rc, risk, 2 * m1));
    const double ratio = static_cast<double>(2 * m1 + K) / static_cast<double>(4 * (m1 + K));
    CHECK(b2 == doctest::Approx(a2 * ratio).epsilon(1e-13));
  }
}

TEST_CASE("TSGD SC-SC with one inner step reduces to SSGD") {
  const auto rc = unit_constants();
  auto in = inputs(rc, {0.4, 0.3, 0.2}, 12, 1);
  in.free.c1 = 0.0;
  in.free.C = 1.3;
  in.free.C1 = 1.3;
  for (auto m : {BoundMeasure::L1, BoundMeasure::L2}) {
    CHECK(tsgd_stability_bound(Regime::SCSC, m, in) ==
          doctest::Approx(ssgd_stability_bound(Regime::SCSC, m, in)).epsilon(1e-13));
  }
}

TEST_CASE("NC-NC l2 bound with one outer iteration matches a direct transcription") {
  auto rc = unit_constants();
  rc.ell_f = 2.0;
  rc.L_g = 0.7;
  auto in = inputs(rc, {0.8}, 7, 3);
  const double v = tsgd_stability_bound(Regime::NCNC, BoundMeasure::L2, in);
  CHECK(rel(v, direct_tsgd(DirectRegime::NCNC, false, direct_from(in))) < 1e-12);
}

TEST_CASE("log-space evaluation agrees with direct transcription up to K = 40") {
  RandomStream rng(7);
  for (std::size_t K : {1u, 2u, 5u, 13u, 27u, 40u}) {
    for (std::size_t T : {1u, 2u, 5u}) {
      RegularityConstants rc;
      rc.ell_f = 0.5 + rng.uniform();
      rc.ell_g = 0.5 + rng.uniform();
      rc.mu_f = 0.2;
      rc.mu_g = 0.2;
      rc.L_g = 0.1 + rng.uniform();
      std::vector<double> risk(K);
      for (auto& r : risk) r = rng.uniform();
      auto in = inputs(rc, risk, 30, T);
      in.free.c1 = 0.5;
      in.free.c2 = 0.8;
      in.free.c4 = 0.3;
      in.free.c5 = 0.5;
      in.free.c6 = 0.2;
      in.free.C = 0.9;
      in.free.C1 = 0.6;
      const auto d = direct_from(in);
      CAPTURE(K);
      CAPTURE(T);
      for (bool l1 : {true, false}) {
        const auto m = l1 ? BoundMeasure::L1 : BoundMeasure::L2;
        CHECK(rel(ssgd_stability_bound(Regime::SCSC, m, in), direct_ssgd(true, l1, d)) < 1e-9);
        if (K >= 2) CHECK(rel(ssgd_stability_bound(Regime::CC, m, in), direct_ssgd(false, l1, d)) < 1e-9);
        CHECK(rel(tsgd_stability_bound(Regime::SCSC, m, in), direct_tsgd(DirectRegime::SCSC, l1, d)) < 1e-9);
        if (T >= 2) CHECK(rel(tsgd_stability_bound(Regime::CC, m, in), direct_tsgd(DirectRegime::CC, l1, d)) < 1e-9);
        CHECK(rel(tsgd_stability_bound(Regime::NCNC, m, in), direct_tsgd(DirectRegime::NCNC, l1, d)) < 1e-9);
      }
    }
  }
}

TEST_CASE("bounds are monotone in risk entries, the inner Lipschitz constant and K") {
  auto rc = unit_constants();
  rc.mu_f = rc.mu_g = 0.5;
  std::vector<double> risk{0.5, 0.4, 0.3, 0.2, 0.1};
  auto base = inputs(rc, risk, 20, 3);
  for (auto m : {BoundMeasure::L1, BoundMeasure::L2}) {
    for (Regime r : {Regime::CC, Regime::NCNC}) {
      const double v0 = tsgd_stability_bound(r, m, base);
      auto bumped = base;
      bumped.risk_path[2] += 0.1;
      CHECK(tsgd_stability_bound(r, m, bumped) >= v0);
      auto lg = base;
      lg.constants.L_g *= 1.5;
      CHECK(tsgd_stability_bound(r, m, lg) >= v0);
    }
    // Appending an outer iteration with fixed free constants.
    auto longer = base;
    longer.risk_path.push_back(0.05);
    longer.K += 1;
    CHECK(ssgd_stability_bound(Regime::SCSC, m, longer) >= ssgd_stability_bound(Regime::SCSC, m, base));
    CHECK(tsgd_stability_bound(Regime::NCNC, m, longer) >= tsgd_stability_bound(Regime::NCNC, m, base));
  }
}

TEST_CASE("bound preconditions") {
  auto rc = unit_constants();
  auto in = inputs(rc, {0.1, 0.2}, 10, 2);
  in.K = 3;
  CHECK_THROWS_AS(ssgd_stability_bound(Regime::SCSC, BoundMeasure::L1, in), InvalidArgument);
  in.K = 2;
  CHECK_THROWS_AS(ssgd_stability_bound(Regime::NCNC, BoundMeasure::L1, in), InvalidArgument);
  rc.mu_f = rc.mu_g = 0.1;
  rc.ell_f = rc.ell_g = 10;
  CHECK_THROWS_AS(ssgd_stability_bound(Regime::SCSC, BoundMeasure::L1, inputs(rc, {0.1}, 10)), InvalidArgument);
}

TEST_CASE("NC-NC bound overflow is reported") {
  std::vector<double> risk(3000, 1.0);
  auto in = inputs(unit_constants(), risk, 10, 32);
  CHECK_THROWS_AS(tsgd_stability_bound(Regime::NCNC, BoundMeasure::L2, in), BoundOverflow);
  // Large but representable.
  in.T = 1;
  in.risk_path.resize(500);
  in.K = 500;
  CHECK(std::isfinite(tsgd_stability_bound(Regime::NCNC, BoundMeasure::L1, in)));
}

TEST_CASE("TSGD SC-SC step ceiling") {
  const auto rc = unit_constants();
  const auto c = tsgd_scsc_step_ceiling(rc, 100, 1, 1.0);
  REQUIRE(c.has_value());
  const double T = 1, ell = 1, a = T * ell - 1 - T * 1;
  const double disc = 4 * a * a - 2 * (1 + T * T) * ell * ell * (1 - 0.0);
  CHECK(*c == doctest::Approx((-2 * a + std::sqrt(disc)) / (2 * (1 + T * T) * ell * ell)).epsilon(1e-14));
  CHECK_FALSE(tsgd_scsc_step_ceiling(rc, 100, 8, 1.0).has_value());
}

// ---------------------------------------------------------------------------
// Regularity verification

TEST_CASE("verify_regularity recovers the Lipschitz constant of a linear loss") {
  Vector slope(4);
  slope << 1.0, -2.0, 0.5, 3.0;
  LinearOuterProblem p(slope, 2);
  EmptyPopulation spec;
  RandomStream rng(8);
  const auto rep = verify_regularity(p, spec, 2000, 1.0, rng);
  CHECK(rep.L_f <= slope.norm() * (1 + 1e-12));
  CHECK(rep.L_f >= 0.99 * slope.norm());
  CHECK(rep.ell_f < 1e-8);
}

TEST_CASE("verify_regularity on the quadratic stays below the declared smoothness") {
  const auto inst = quadratic();
  RandomStream rng(9);
  const auto rep = verify_regularity(*inst.problem, *inst.population, 100000, 0.0, rng);
  CHECK(rep.n_pairs == 100000);
  CHECK(rep.ell_f <= inst.problem->constants().ell_f * (1 + 1e-9));
  CHECK(rep.ell_g <= inst.problem->constants().ell_g * (1 + 1e-9));
  CHECK(rep.outer_convexity_violations == 0);
  CHECK(rep.inner_convexity_violations == 0);
}

TEST_CASE("verify_regularity finds convexity violations on the smooth nonconvex pair") {
  RandomStream s(10);
  const auto inst = make_smooth_ncnc({}, s);
  RandomStream rng(11);
  const auto rep = verify_regularity(*inst.problem, *inst.population, 20000, 0.0, rng);
  CHECK(rep.outer_convexity_violations > 0);
}

TEST_CASE("verify_regularity finds no convexity violations on the softplus pair") {
  RandomStream s(12);
  const auto inst = make_logistic_cc({}, s);
  RandomStream rng(13);
  const auto rep = verify_regularity(*inst.problem, *inst.population, 20000, 0.0, rng);
  CHECK(rep.outer_convexity_violations == 0);
  CHECK(rep.inner_convexity_violations == 0);
}

// ---------------------------------------------------------------------------
// Gap estimation

TEST_CASE("constant outer loss gives an exactly zero gap") {
  ConstantOuterProblem p(1.75, 2);
  EmptyPopulation spec;
  SolverConfig cfg;
  cfg.K = 5;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::constant(0.1);
  cfg.init = default_init(p);
  const auto rep = estimate_gap(p, spec, cfg, 10, 10, 3, 50, RandomStream(1));
  CHECK(rep.gap == 0.0);
  for (const auto& t : rep.trials) CHECK(t.gap == 0.0);
}

TEST_CASE("gap is population minus empirical risk") {
  const auto inst = quadratic();
  SolverConfig cfg;
  cfg.K = 20;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::scsc_window();
  cfg.init = default_init(*inst.problem);
  const auto rep = estimate_gap(*inst.problem, *inst.population, cfg, 20, 20, 4, 100, RandomStream(2));
  REQUIRE(rep.trials.size() == 4);
  for (const auto& t : rep.trials) CHECK(t.gap == t.population.estimate - t.empirical_risk);
  CHECK(rep.gap == doctest::Approx(rep.population_risk.estimate - rep.empirical_risk).epsilon(1e-14));
  CHECK(rep.gap_se > 0.0);
}

TEST_CASE("gap vanishes at population-sized validation sets") {
  const auto inst = quadratic();
  SolverConfig cfg;
  cfg.K = 50;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::scsc_window();
  cfg.init = default_init(*inst.problem);
  const auto rep = estimate_gap(*inst.problem, *inst.population, cfg, 10000, 50, 10, 100, RandomStream(3));
  CHECK(std::abs(rep.gap) < 3 * rep.gap_se);
}

TEST_CASE("gap shrinks as the validation set grows") {
  // A wide outer block makes the overfitting term dominate per-trial loss noise.
  QuadraticParams qp;
  qp.d1 = 20;
  qp.d2 = 1;
  qp.coupling = 0.5;
  RandomStream s(1);
  const auto inst = make_quadratic_scsc(qp, s);
  SolverConfig cfg;
  cfg.K = 100;
  cfg.full_batch = true;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::scsc_window();
  cfg.init = default_init(*inst.problem);
  std::vector<double> m1s{50, 200, 800}, gaps;
  for (double m1 : m1s) {
    gaps.push_back(std::abs(estimate_gap(*inst.problem, *inst.population, cfg, static_cast<std::size_t>(m1), 50,
                                         20, 100, RandomStream(4))
                                .gap));
  }
  CHECK(spearman(m1s, gaps) < 0.0);
}

TEST_CASE("gap standard error shrinks like one over root trials") {
  const auto inst = quadratic();
  SolverConfig cfg;
  cfg.K = 30;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::scsc_window();
  cfg.init = default_init(*inst.problem);
  double ratio = 0.0;
  const int reps = 8;
  for (int r = 0; r < reps; ++r) {
    const auto a = estimate_gap(*inst.problem, *inst.population, cfg, 20, 20, 40, 100, RandomStream(100 + r));
    const auto b = estimate_gap(*inst.problem, *inst.population, cfg, 20, 20, 80, 100, RandomStream(200 + r));
    ratio += b.gap_se / a.gap_se;
  }
  CHECK(ratio / reps == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("population risk power mean") {
  GapReport rep;
  rep.trials.resize(2);
  rep.trials[0].population.estimate = 4.0;
  rep.trials[1].population.estimate = 1.0;
  CHECK(population_risk_power_mean(rep, 1.0) == doctest::Approx(2.5));
  CHECK(population_risk_power_mean(rep, 1.0 / 3.0) == doctest::Approx(1.5));
  CHECK(population_risk_power_mean(rep, 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(population_risk_power_mean(rep, 2.0), InvalidArgument);
}
