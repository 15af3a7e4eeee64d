#include <doctest.h>

#include "bsl/solvers.hpp"
#include "support.hpp"

#include <cmath>

using namespace bsl;
using namespace bsl::testing;

namespace {

struct Fixture {
  ProblemInstance inst;
  Dataset d_val, d_train;
};

Fixture quadratic_fixture(std::size_t m1, std::size_t m2, std::uint64_t seed = 1, QuadraticParams qp = {}) {
  RandomStream s(seed);
  Fixture f{make_quadratic_scsc(qp, s), {}, {}};
  RandomStream ds = s.fork("data");
  f.d_val = f.inst.population->draw_validation(m1, ds);
  f.d_train = f.inst.population->draw_training(m2, ds);
  return f;
}

Fixture ncnc_fixture(std::size_t m1, std::size_t m2, std::uint64_t seed = 2) {
  RandomStream s(seed);
  Fixture f{make_smooth_ncnc({}, s), {}, {}};
  RandomStream ds = s.fork("data");
  f.d_val = f.inst.population->draw_validation(m1, ds);
  f.d_train = f.inst.population->draw_training(m2, ds);
  return f;
}

SolverConfig config(const BilevelProblem& p, Algorithm a, std::size_t K, std::size_t T, double eta) {
  SolverConfig c;
  c.algorithm = a;
  c.K = K;
  c.T = T;
  c.schedule_x = StepSchedule::constant(eta);
  c.schedule_y = StepSchedule::constant(eta);
  c.init = default_init(p);
  return c;
}

}  // namespace

TEST_CASE("SC-SC window for unit constants") {
  const auto w = scsc_stepsize_window(1, 1, 1, 1);
  REQUIRE(w.has_value());
  CHECK(w->lo == doctest::Approx(1.0 - std::sqrt(3.0) / 2.0).epsilon(1e-12));
  CHECK(w->hi == doctest::Approx(1.0 + std::sqrt(3.0) / 2.0).epsilon(1e-12));
  CHECK(w->lo == doctest::Approx(0.134).epsilon(1e-2));
  CHECK(w->hi == doctest::Approx(1.866).epsilon(1e-3));
}

TEST_CASE("SC-SC window is infeasible for weak curvature and strong smoothness") {
  CHECK_FALSE(scsc_stepsize_window(0.1, 0.1, 10, 10).has_value());
}

TEST_CASE("SC-SC window collapses to a point at zero discriminant") {
  const auto w = scsc_stepsize_window(0.5, 0.5, 1, 1);
  REQUIRE(w.has_value());
  CHECK(w->lo == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w->hi == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("SC-SC window rejects nonpositive constants") {
  CHECK_THROWS_AS(scsc_stepsize_window(0, 1, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(scsc_stepsize_window(1, 1, -1, 1), InvalidArgument);
}

TEST_CASE("step schedules evaluate their closed forms") {
  RegularityConstants rc;
  rc.ell_f = 2;
  rc.ell_g = 4;
  rc.mu_f = rc.mu_g = 1;
  const ScheduleContext ctx{rc, 100, 8};
  StepSchedule s;
  s.kind = StepSchedule::Kind::OuterInverse;
  s.c = 2;
  CHECK(s.step(4, ctx) == doctest::Approx(2.0 / (4.0 * 5.0)));
  s.kind = StepSchedule::Kind::InnerInverse;
  CHECK(s.step(0, ctx) == doctest::Approx(0.5));
  s.kind = StepSchedule::Kind::LogOverK;
  s.c = 1;
  CHECK(s.step(7, ctx) == doctest::Approx(std::log(100.0) / (std::sqrt(2.0) * 100.0 * 4.0)));
  s.kind = StepSchedule::Kind::LogOverT;
  CHECK(s.step(7, ctx) == doctest::Approx(std::log(8.0) / (std::sqrt(65.0) * 100.0 * 4.0)));
  CHECK_THROWS_AS(s.step(0, {rc, 10, 1}), InvalidArgument);
  s.kind = StepSchedule::Kind::LogOverK;
  CHECK_THROWS_AS(s.step(0, {rc, 1, 8}), InvalidArgument);
  CHECK_THROWS_AS(StepSchedule::constant(0.0).step(0, ctx), InvalidArgument);
  CHECK_THROWS_AS(StepSchedule::constant(-1.0).step(0, ctx), InvalidArgument);
}

TEST_CASE("scsc_window schedule uses a fraction of the window top") {
  RegularityConstants rc;
  rc.ell_f = rc.ell_g = rc.mu_f = rc.mu_g = 1;
  CHECK(StepSchedule::scsc_window(0.5).step(3, {rc, 10, 1}) == doctest::Approx(0.5 * (1 + std::sqrt(3.0) / 2)));
  CHECK_THROWS_AS(StepSchedule::scsc_window(0.01).step(0, {rc, 10, 1}), InvalidArgument);
  CHECK_THROWS_AS(StepSchedule::scsc_window(1.5).step(0, {rc, 10, 1}), InvalidArgument);
  rc.ell_f = rc.ell_g = 10;
  rc.mu_f = rc.mu_g = 0.1;
  CHECK_THROWS_AS(StepSchedule::scsc_window().step(0, {rc, 10, 1}), InvalidArgument);
}

TEST_CASE("schedule and algorithm names round-trip") {
  using K = StepSchedule::Kind;
  for (K k : {K::Constant, K::OuterInverse, K::InnerInverse, K::LogOverK, K::LogOverT, K::ScscWindow}) {
    CHECK(parse_schedule_kind(to_string(k)) == k);
  }
  for (Algorithm a : {Algorithm::SSGD, Algorithm::TSGD, Algorithm::UD}) CHECK(parse_algorithm(to_string(a)) == a);
  CHECK(parse_algorithm("tsgd") == Algorithm::TSGD);
  CHECK_THROWS_AS(parse_algorithm("adam"), InvalidArgument);
}

TEST_CASE("zero outer iterations return the initial point") {
  auto f = quadratic_fixture(5, 5);
  for (Algorithm a : {Algorithm::SSGD, Algorithm::TSGD, Algorithm::UD}) {
    auto cfg = config(*f.inst.problem, a, 0, 3, 0.1);
    cfg.init.x << 0.25, -1.0;
    const auto rec = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(1));
    CHECK(rec.final == cfg.init);
    CHECK(rec.empirical_risk_path.empty());
    REQUIRE(rec.iterates.size() == 1);
    CHECK(rec.iterates[0].k == 0);
  }
}

TEST_CASE("solvers are deterministic given the stream") {
  auto f = ncnc_fixture(20, 20);
  for (Algorithm a : {Algorithm::SSGD, Algorithm::TSGD, Algorithm::UD}) {
    auto cfg = config(*f.inst.problem, a, 50, 4, 0.1);
    cfg.checkpoint_every = 7;
    const auto r1 = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(42));
    const auto r2 = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(42));
    CHECK(r1.final == r2.final);
    CHECK(r1.empirical_risk_path == r2.empirical_risk_path);
    CHECK(r1.iterates.size() == r2.iterates.size());
    const auto r3 = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(43));
    CHECK_FALSE(r1.final == r3.final);
  }
}

TEST_CASE("risk path has one finite nonnegative entry per outer iteration") {
  auto f = ncnc_fixture(10, 10);
  for (Algorithm a : {Algorithm::SSGD, Algorithm::TSGD, Algorithm::UD}) {
    const auto cfg = config(*f.inst.problem, a, 33, 2, 0.1);
    const auto rec = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(3));
    REQUIRE(rec.empirical_risk_path.size() == 33);
    for (double r : rec.empirical_risk_path) CHECK((std::isfinite(r) && r >= 0.0));
  }
}

TEST_CASE("checkpoints record the requested outer indices and the output") {
  auto f = quadratic_fixture(5, 5);
  auto cfg = config(*f.inst.problem, Algorithm::TSGD, 10, 2, 0.2);
  cfg.checkpoint_every = 4;
  const auto rec = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(3));
  REQUIRE(rec.iterates.size() == 4);
  CHECK(rec.iterates[0].k == 0);
  CHECK(rec.iterates[1].k == 4);
  CHECK(rec.iterates[2].k == 8);
  CHECK(rec.iterates[3].k == 10);
  CHECK(rec.iterates[0].iterate == cfg.init);
  CHECK(rec.iterates[3].iterate == rec.final);
}

TEST_CASE("Gauss-Seidel SSGD equals TSGD with one inner step") {
  const Fixture fixtures[] = {quadratic_fixture(15, 12), ncnc_fixture(15, 12)};
  for (const auto& f : fixtures) {
    auto s = config(*f.inst.problem, Algorithm::SSGD, 60, 1, 0.15);
    s.update_order = UpdateOrder::GaussSeidel;
    s.batch_size = 2;
    auto t = s;
    t.algorithm = Algorithm::TSGD;
    const auto rs = run_solver(*f.inst.problem, f.d_val, f.d_train, s, RandomStream(5));
    const auto rt = run_solver(*f.inst.problem, f.d_val, f.d_train, t, RandomStream(5));
    CHECK(rs.final == rt.final);
    CHECK(rs.empirical_risk_path == rt.empirical_risk_path);
  }
}

TEST_CASE("simultaneous SSGD reads the previous inner iterate") {
  auto f = quadratic_fixture(1, 1);
  auto cfg = config(*f.inst.problem, Algorithm::SSGD, 1, 1, 0.3);
  cfg.init.y << 1.0, -2.0;
  const auto rec = run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(1));
  const auto& p = *f.inst.problem;
  const Vector x1 = cfg.init.x - 0.3 * p.outer_grad_x(cfg.init, f.d_val[0]);
  const Vector y1 = cfg.init.y - 0.3 * p.inner_grad_y(cfg.init, f.d_train[0]);
  CHECK((rec.final.x - x1).norm() == 0.0);
  CHECK((rec.final.y - y1).norm() == 0.0);
  CHECK(rec.empirical_risk_path[0] == doctest::Approx(p.outer_loss(cfg.init, f.d_val[0])));
}

TEST_CASE("UD and TSGD agree for a single outer iteration") {
  auto f = ncnc_fixture(8, 8);
  auto u = config(*f.inst.problem, Algorithm::UD, 1, 5, 0.2);
  u.init.y.setConstant(0.3);
  auto t = u;
  t.algorithm = Algorithm::TSGD;
  const auto ru = run_solver(*f.inst.problem, f.d_val, f.d_train, u, RandomStream(7));
  const auto rt = run_solver(*f.inst.problem, f.d_val, f.d_train, t, RandomStream(7));
  CHECK(ru.final == rt.final);
}

TEST_CASE("UD restarts every inner loop from the initial inner state; TSGD carries it over") {
  auto f = quadratic_fixture(8, 8);
  auto u = config(*f.inst.problem, Algorithm::UD, 3, 10, 0.2);
  u.init.y << 0.7, -0.4;
  u.checkpoint_every = 1;
  auto t = u;
  t.algorithm = Algorithm::TSGD;
  const auto ru = run_solver(*f.inst.problem, f.d_val, f.d_train, u, RandomStream(8));
  const auto rt = run_solver(*f.inst.problem, f.d_val, f.d_train, t, RandomStream(8));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(ru.iterates[k].inner_start == u.init.y);
    if (k > 0) {
      CHECK_FALSE(rt.iterates[k].inner_start == u.init.y);
      CHECK(rt.iterates[k].inner_start == rt.iterates[k].iterate.y);
    }
  }
}

TEST_CASE("TSGD inner loop contracts toward the inner solution at the gradient-descent rate") {
  auto f = quadratic_fixture(6, 6);
  const auto& prob = dynamic_cast<const QuadraticProblem&>(*f.inst.problem);
  const double eta = 0.2;
  auto cfg = config(prob, Algorithm::TSGD, 20, 50, eta);
  cfg.full_batch = true;
  cfg.checkpoint_every = 1;
  cfg.init.y << 3.0, -3.0;
  const auto rec = run_solver(prob, f.d_val, f.d_train, cfg, RandomStream(9));
  Vector c_mean = Vector::Zero(2);
  for (const auto& s : f.d_train.samples()) c_mean += s.v;
  c_mean /= static_cast<double>(f.d_train.size());
  const double rate = std::pow(1.0 - eta * prob.constants().mu_g, 50);
  for (std::size_t k = 0; k + 1 < rec.iterates.size(); ++k) {
    const Vector target = prob.M() * rec.iterates[k].iterate.x + c_mean;
    const double before = (rec.iterates[k].inner_start - target).norm();
    const double after = (rec.iterates[k + 1].inner_start - target).norm();
    CHECK(after <= rate * before + 1e-12);
  }
}

TEST_CASE("full-batch SSGD in the SC-SC window is a contraction") {
  auto f = quadratic_fixture(1, 1);
  const auto& p = *f.inst.problem;
  SolverConfig base;
  base.algorithm = Algorithm::SSGD;
  base.full_batch = true;
  base.schedule_x = base.schedule_y = StepSchedule::scsc_window(0.9);
  RandomStream rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = base, b = base;
    a.init = {rng.uniform_ball(2, 2.0), rng.uniform_ball(2, 2.0)};
    b.init = {rng.uniform_ball(2, 2.0), rng.uniform_ball(2, 2.0)};
    double prev = joint_norm(a.init, b.init);
    ParameterPair wa = a.init, wb = b.init;
    for (int k = 0; k < 30; ++k) {
      a.K = b.K = 1;
      a.init = wa;
      b.init = wb;
      wa = run_ssgd(p, f.d_val, f.d_train, a, RandomStream(1)).final;
      wb = run_ssgd(p, f.d_val, f.d_train, b, RandomStream(1)).final;
      const double d = joint_norm(wa, wb);
      CHECK(d <= prev * (1 + 1e-12));
      prev = d;
    }
  }
}

TEST_CASE("deterministic SSGD converges to the empirical fixed point") {
  auto f = quadratic_fixture(1, 1);
  const auto& prob = dynamic_cast<const QuadraticProblem&>(*f.inst.problem);
  SolverConfig cfg;
  cfg.algorithm = Algorithm::SSGD;
  cfg.K = 2000;
  cfg.schedule_x = cfg.schedule_y = StepSchedule::scsc_window(0.9);
  cfg.init = default_init(prob);
  cfg.checkpoint_every = 100;
  const auto rec = run_solver(prob, f.d_val, f.d_train, cfg, RandomStream(11));
  const auto star = prob.empirical_minimizer(f.d_val, f.d_train);
  CHECK(joint_norm(rec.final, star) < 1e-6);
  double prev = joint_norm(rec.iterates[0].iterate, star);
  for (std::size_t i = 1; i < rec.iterates.size(); ++i) {
    const double d = joint_norm(rec.iterates[i].iterate, star);
    CHECK(d <= prev + 1e-15);
    prev = d;
  }
}

TEST_CASE("full batch averages the whole dataset") {
  auto f = quadratic_fixture(4, 3);
  const auto& p = *f.inst.problem;
  auto cfg = config(p, Algorithm::SSGD, 1, 1, 0.1);
  cfg.full_batch = true;
  const auto rec = run_solver(p, f.d_val, f.d_train, cfg, RandomStream(1));
  Vector gx = Vector::Zero(2), gy = Vector::Zero(2);
  for (const auto& s : f.d_val.samples()) gx += p.outer_grad_x(cfg.init, s);
  for (const auto& s : f.d_train.samples()) gy += p.inner_grad_y(cfg.init, s);
  CHECK((rec.final.x - (cfg.init.x - 0.1 * gx / 4.0)).norm() < 1e-15);
  CHECK((rec.final.y - (cfg.init.y - 0.1 * gy / 3.0)).norm() < 1e-15);
}

TEST_CASE("divergence and region exits raise a solver error with the iteration") {
  auto f = quadratic_fixture(5, 5);
  auto cfg = config(*f.inst.problem, Algorithm::SSGD, 500, 1, 5.0);
  try {
    run_solver(*f.inst.problem, f.d_val, f.d_train, cfg, RandomStream(1));
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(e.iteration() >= 1);
    CHECK(e.iteration() <= 500);
  }
}

TEST_CASE("invalid solver configurations are rejected") {
  auto f = quadratic_fixture(5, 5);
  const auto& p = *f.inst.problem;
  auto cfg = config(p, Algorithm::TSGD, 5, 0, 0.1);
  CHECK_THROWS_AS(run_solver(p, f.d_val, f.d_train, cfg, RandomStream(1)), InvalidArgument);
  cfg.T = 1;
  cfg.init = ParameterPair::zeros(3, 2);
  CHECK_THROWS_AS(run_solver(p, f.d_val, f.d_train, cfg, RandomStream(1)), InvalidArgument);
  cfg.init = default_init(p);
  CHECK_THROWS_AS(run_solver(p, Dataset{}, f.d_train, cfg, RandomStream(1)), InvalidArgument);
  CHECK_THROWS_AS(run_ssgd(p, f.d_val, f.d_train, cfg, RandomStream(1)), InvalidArgument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(run_solver(p, f.d_val, f.d_train, cfg, RandomStream(1)), InvalidArgument);
}
