#include <doctest.h>

#include <cmath>

#include "lcbo/lcbo.hpp"
#include "test_util.hpp"

using namespace lcbo;
using testutil::random_vector;

namespace {

LCBOConfig toy_config(long budget_calls) {
  LCBOConfig cfg;
  cfg.constraint_sense = ConstraintSense::Equality;
  cfg.window = 12;
  cfg.budget = budget_calls;
  return cfg;
}

ProblemDef unconstrained_quadratic() {
  ProblemDef p;
  p.name = "quadratic";
  p.dim = 2;
  p.num_constraints = 0;
  p.domain = BoxDomain::unit_cube(2);
  p.sense = ConstraintSense::Equality;
  const Vector a = Vector::Constant(2, 0.4);
  p.objective = [a](const Vector& x) { return (x - a).squaredNorm(); };
  p.objective_grad = [a](const Vector& x) { return (2.0 * (x - a)).eval(); };
  return p;
}

}  // namespace

TEST_CASE("penalty_value arithmetic") {
  Vector zero(1), c(1);
  zero << 0.0;
  c << 2.0;
  CHECK(penalty_value(3.5, zero, 7.0, ConstraintSense::Equality) == 3.5);
  CHECK(penalty_value(1.0, c, 3.0, ConstraintSense::Equality) == doctest::Approx(7.0));
  Vector neg(1);
  neg << -5.0;
  CHECK(penalty_value(1.25, neg, 99.0, ConstraintSense::Inequality) == 1.25);
  CHECK_THROWS_AS(penalty_value(0.0, c, -1.0, ConstraintSense::Equality), std::invalid_argument);
}

TEST_CASE("penalized_grad against a one-observation closed form") {
  // single observation at x0; posterior mean/gradient have an explicit form
  const Vector x0 = (Vector(2) << 0.3, 0.5).finished();
  const Vector u = (Vector(2) << 0.6, 0.5).finished();
  const double yf = 0.8, yc = 0.5, s2 = 0.01;
  Dataset ds;
  ds.X = x0.transpose();
  ds.Y.resize(1, 2);
  ds.Y << yf, yc;
  ds.noise_var = s2;
  const KernelSpec spec{KernelFamily::RBF, 1.0, 1.0};
  const auto model =
      fit(ds, {spec, spec}, Standardizer::identity(BoxDomain::unit_cube(2), 2));

  const double k = std::exp(-0.5 * (u - x0).squaredNorm());
  const double af = yf / (1.0 + s2), ac = yc / (1.0 + s2);
  const Vector gk = -k * (u - x0);
  const double rho = 4.0;
  const Vector want = af * gk + rho * (ac * k) * (ac * gk);
  const Vector got = penalized_grad(model, u, rho, ConstraintSense::Equality);
  CHECK(testutil::rel_err(got, want) < 1e-12);

  // inactive hinge: the constraint term vanishes entirely
  Dataset ds2 = ds;
  ds2.Y(0, 1) = -0.5;
  const auto model2 =
      fit(ds2, {spec, spec}, Standardizer::identity(BoxDomain::unit_cube(2), 2));
  const Vector hinge = penalized_grad(model2, u, rho, ConstraintSense::Inequality);
  CHECK(hinge == posterior_grad_original(model2, u, 0));
}

TEST_CASE("exploit_step takes normalized projected steps") {
  const BoxDomain box = BoxDomain::unit_cube(2);
  const Vector x = Vector::Constant(2, 0.5);
  CHECK(exploit_step(x, Vector::Zero(2), 0.1, box) == x);

  Vector g(2);
  g << 3.0, 4.0;
  const Vector stepped = exploit_step(x, g, 0.1, box);
  CHECK(stepped(0) == doctest::Approx(0.5 - 0.06).epsilon(1e-14));
  CHECK(stepped(1) == doctest::Approx(0.5 - 0.08).epsilon(1e-14));
  CHECK((stepped - x).norm() <= 0.1 + 1e-14);

  Vector near_edge(2);
  near_edge << 0.01, 0.5;
  Vector towards(2);
  towards << 1.0, 0.0;
  CHECK(exploit_step(near_edge, towards, 0.5, box)(0) == 0.0);
}

TEST_CASE("kkt residuals on the toy circle") {
  const auto p = make_toy_circle();
  Vector xstar(2), lam(1);
  xstar << -0.5, -0.5;
  lam << 1.0;
  const auto at_opt = kkt_residuals_analytic(p, xstar, lam);
  CHECK(std::abs(at_opt.stationarity) < 1e-12);
  CHECK(std::abs(at_opt.feasibility) < 1e-12);

  Vector origin = Vector::Zero(2), lam0 = Vector::Zero(1);
  const auto at_origin = kkt_residuals_analytic(p, origin, lam0);
  CHECK(at_origin.stationarity == doctest::Approx(2.0));
  CHECK(at_origin.feasibility == doctest::Approx(0.25));
}

TEST_CASE("kkt residuals vanish at an interior stationary point") {
  const auto p = unconstrained_quadratic();
  const auto r = kkt_residuals_analytic(p, Vector::Constant(2, 0.4), Vector(0));
  CHECK(r.stationarity == 0.0);
  CHECK(r.feasibility == 0.0);
}

TEST_CASE("kkt residual source dispatch") {
  const auto p = make_toy_circle();
  ProblemDef no_grads = p;
  no_grads.objective_grad = nullptr;
  Vector x = Vector::Zero(2), lam = Vector::Zero(1);
  CHECK_THROWS_AS(kkt_residuals_analytic(no_grads, x, lam), std::invalid_argument);
  CHECK_THROWS_AS(kkt_residuals(GradSource::Model, p, nullptr, x, lam), std::invalid_argument);
}

TEST_CASE("schedule shapes") {
  LCBOConfig cfg;
  for (int k = 2; k <= 200; ++k) {
    const double ratio = cfg.rho(k) / cfg.rho(k - 1);
    CHECK(testutil::rel_err(ratio, std::pow(double(k) / double(k - 1), 0.25)) < 1e-14);
    CHECK(testutil::rel_err(cfg.eta(k) * std::sqrt(double(k)), cfg.step_scale) < 1e-14);
  }
  cfg.step_mode = StepMode::Constant;
  CHECK(cfg.eta(77) == cfg.step_scale);
}

TEST_CASE("batch schedules match their formulas exactly") {
  const int d = 7;
  for (int k = 1; k <= 100; ++k) {
    const auto fixed = batch_sizes(BatchSchedule::Fixed, k, d, 2, 5);
    CHECK(fixed.b1 == 2);
    CHECK(fixed.b2 == 5);
    const auto large = batch_sizes(BatchSchedule::Large, k, d, 2, 5);
    CHECK(large.b1 == 5);
    CHECK(large.b2 == d);
    const auto growing = batch_sizes(BatchSchedule::Growing, k, d, 2, 5);
    CHECK(growing.b1 == static_cast<int>(std::floor(std::log(double(k + 1)) + 1.0)));
    CHECK(growing.b2 == static_cast<int>(std::floor(0.5 * k + 5.0)));
    const auto theo = batch_sizes(BatchSchedule::Theoretical, k, d, 2, 5);
    CHECK(theo.b1 == k);
    CHECK(theo.b2 == d * k * k);
  }
}

TEST_CASE("budget gate: too small a budget yields an empty run") {
  const auto p = make_toy_circle();
  const auto records = run(p, toy_config(13), 1);  // first batch needs 14 calls
  CHECK(records.empty());
}

TEST_CASE("fixed seed gives bitwise identical runs") {
  const auto p = make_toy_circle();
  const auto cfg = toy_config(7 * 2 * 10);
  const auto a = run(p, cfg, 7);
  const auto b = run(p, cfg, 7);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].x_next == b[i].x_next);
    CHECK(a[i].batch == b[i].batch);
    CHECK(a[i].observations == b[i].observations);
    CHECK(a[i].rs_hat == b[i].rs_hat);
    CHECK(a[i].rs_true == b[i].rs_true);
  }
}

TEST_CASE("oracle accounting and iterate feasibility") {
  const auto p = make_toy_circle();
  const auto records = run(p, toy_config(7 * 2 * 8), 3);
  REQUIRE(records.size() == 8);
  long expected = 0;
  for (const auto& rec : records) {
    expected += (2 + 5) * 2;
    CHECK(rec.oracle_calls_cumulative == expected);
    CHECK(rec.batch.rows() == 7);
    for (int i = 0; i < 2; ++i) {
      CHECK(rec.x(i) >= p.domain.lower(i) - 1e-12);
      CHECK(rec.x(i) <= p.domain.upper(i) + 1e-12);
      CHECK(rec.x_next(i) >= p.domain.lower(i) - 1e-12);
      CHECK(rec.x_next(i) <= p.domain.upper(i) + 1e-12);
    }
    // the first b1 rows are repeated evaluations at the iterate
    CHECK((rec.batch.row(0).transpose() - rec.x).norm() < 1e-12);
    CHECK((rec.batch.row(1).transpose() - rec.x).norm() < 1e-12);
    // sliding window: at most N_m rows retained after each iteration
    CHECK(rec.dataset_size <= 12);
    CHECK(rec.dataset_size ==
          std::min<long>(12, rec.oracle_calls_cumulative / 2));
  }
}

TEST_CASE("descent inequality of the single-loop analysis, exact gradients") {
  // unnormalized projected steps with eta_k <= 1/(2 L_rho): the penalty
  // value cannot increase when the surrogate gradient is exact
  const auto p = make_toy_circle(0.0);
  const BoxDomain& box = p.domain;
  Vector x = (Vector(2) << 0.9, -0.2).finished();
  for (int k = 1; k <= 100; ++k) {
    const double rho = 10.0 * std::pow(double(k), 0.25);
    const double L_rho = 11.0 * rho;  // |grad c|^2 <= 8, |c| <= 1.5, hess c = 2I
    const double eta = 1.0 / (2.0 * L_rho);
    const Vector c = p.constraint_values(x);
    const Vector grad_q = p.objective_grad(x) + rho * c(0) * p.constraint_grads[0](x);
    const Vector x_next = project(box, x - eta * grad_q);
    const double q_before = penalty_value(p.objective(x), c, rho, p.sense);
    const double q_after =
        penalty_value(p.objective(x_next), p.constraint_values(x_next), rho, p.sense);
    CHECK(q_after <= q_before + 1e-12);
    x = x_next;
  }
}

TEST_CASE("stationarity residual trend on the toy circle") {
  const auto p = make_toy_circle();
  const auto records = run(p, toy_config(7 * 2 * 100), 11);
  REQUIRE(records.size() == 100);
  double avg50 = 0.0, avg100 = 0.0;
  for (int k = 0; k < 100; ++k) {
    avg100 += records[static_cast<std::size_t>(k)].rs_true;
    if (k < 50) avg50 += records[static_cast<std::size_t>(k)].rs_true;
  }
  avg50 /= 50.0;
  avg100 /= 100.0;
  CHECK(avg100 <= 0.85 * avg50);
}

TEST_CASE("config validation") {
  LCBOConfig cfg;
  cfg.step_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LCBOConfig{};
  cfg.penalty_exponent = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
