#include <doctest.h>

#include <random>

#include "qpdec/master.hpp"
#include "test_util.hpp"

using namespace qpdec;
using namespace qpdec::testing;

TEST_CASE("coordination step solves the local quadratic model") {
  GlobalConstraints g;
  g.Aeq = Matrix(0, 1);
  g.beq = Vector(0);
  g.Bineq = Matrix::Constant(1, 1, 1.0);
  g.dineq = Vector::Constant(1, 10.0);
  const Matrix h = Matrix::Constant(1, 1, 2.0);
  const Vector grad = Vector::Constant(1, 2.0);
  const Vector y = Vector::Constant(1, 1.0);

  Vector dy = coordination_step(h, grad, g, y);
  CHECK(dy(0) == doctest::Approx(-1.0).epsilon(1e-8));

  GlobalConstraints lb = g;
  lb.Bineq = Matrix::Constant(1, 1, -1.0);
  lb.dineq = Vector::Constant(1, -0.5);  // y >= 0.5
  dy = coordination_step(h, grad, lb, y);
  CHECK(dy(0) == doctest::Approx(-0.5).epsilon(1e-8));

  dy = coordination_step(h, Vector::Zero(1), g, Vector::Zero(1));
  CHECK(std::abs(dy(0)) <= 1e-8);
}

TEST_CASE("coordination step rejects an indefinite hessian sum") {
  GlobalConstraints g;
  g.Aeq = Matrix(0, 1);
  g.beq = Vector(0);
  g.Bineq = Matrix(0, 1);
  g.dineq = Vector(0);
  CHECK_THROWS_AS(
      coordination_step(Matrix::Constant(1, 1, -1.0), Vector::Zero(1), g, Vector::Zero(1)),
      DefinitenessError);
}

TEST_CASE("armijo accepts the full newton step on a quadratic") {
  const Vector y = Vector::Constant(1, 3.0);
  const Vector dy = Vector::Constant(1, -3.0);
  auto psi = [](const Vector& v) { return 0.5 * v.squaredNorm(); };
  LineSearchConfig cfg;
  const auto res = armijo_search(y, dy, psi, psi(y), -9.0, cfg);
  CHECK(res.alpha == doctest::Approx(1.0));
  CHECK(res.evals == 1);
  CHECK(res.y_next(0) == doctest::Approx(0.0));
}

TEST_CASE("zero step returns immediately") {
  const Vector y = Vector::Constant(2, 1.0);
  auto psi = [](const Vector& v) { return v.squaredNorm(); };
  const auto res = armijo_search(y, Vector::Zero(2), psi, psi(y), 0.0, LineSearchConfig{});
  CHECK(res.alpha == doctest::Approx(1.0));
  CHECK(res.evals == 0);
  CHECK(res.y_next == y);
}

TEST_CASE("overshooting steps backtrack at least once") {
  const Vector y = Vector::Constant(1, 1.0);
  const Vector dy = Vector::Constant(1, -10.0);  // as if the hessian were scaled by 0.1
  auto psi = [](const Vector& v) { return 0.5 * v.squaredNorm(); };
  const auto res = armijo_search(y, dy, psi, psi(y), -10.0, LineSearchConfig{});
  CHECK(res.alpha < 1.0);
  CHECK(res.evals >= 2);
  CHECK(psi(res.y_next) < psi(y));
}

TEST_CASE("non-descent directions are refused") {
  const Vector y = Vector::Constant(1, 1.0);
  auto psi = [](const Vector& v) { return 0.5 * v.squaredNorm(); };
  CHECK_THROWS_AS(armijo_search(y, Vector::Constant(1, 1.0), psi, psi(y), 1.0, LineSearchConfig{}),
                  NumericalError);
}

TEST_CASE("backtracking budget exhaustion carries the trial history") {
  const Vector y = Vector::Constant(1, 1.0);
  auto psi = [](const Vector& v) { return v(0); };  // increases along the claimed descent step
  LineSearchConfig cfg;
  cfg.max_backtracks = 3;
  try {
    armijo_search(y, Vector::Constant(1, 1.0), psi, psi(y), -1.0, cfg);
    FAIL("expected LineSearchError");
  } catch (const LineSearchError& e) {
    CHECK(e.trial_merits.size() >= 3);
  }
}

TEST_CASE("feasible start picks zero or the minimum-norm feasible point") {
  GlobalConstraints g;
  g.Aeq = Matrix(0, 1);
  g.beq = Vector(0);
  g.Bineq = Matrix::Constant(1, 1, 1.0);
  g.dineq = Vector::Constant(1, 10.0);
  CHECK(feasible_start(g, 1)(0) == 0.0);

  g.Bineq = Matrix::Constant(1, 1, -1.0);
  g.dineq = Vector::Constant(1, -0.5);  // y >= 0.5
  CHECK(feasible_start(g, 1)(0) == doctest::Approx(0.5).epsilon(1e-6));

  g.Bineq = Matrix(2, 1);
  g.Bineq << 1.0, -1.0;
  g.dineq = Vector(2);
  g.dineq << -1.0, 0.0;  // y <= -1 and y >= 0
  CHECK_THROWS_AS(feasible_start(g, 1), InfeasibleError);
}

TEST_CASE("one master iteration solves the tiny instance from y = 1") {
  const BlockQP t1 = tiny_instance();
  MasterCoordinator master(t1, MasterCoordinator::Config{});
  master.set_y(Vector::Constant(1, 1.0));
  PenaltySetting setting;
  setting.delta = 1e-8;
  setting.rho = 1e4;
  setting.subsolve_tol = 1e-10;
  const IterationRecord rec = master.iterate(setting);
  CHECK(std::abs(master.y()(0)) <= 1e-4);
  CHECK(rec.alpha == doctest::Approx(1.0));
  CHECK(rec.step_norm == doctest::Approx(1.0).epsilon(1e-3));
  // communicated: gradient + hessian per subsystem, one trial value
  CHECK(rec.comm_floats == 1 * (1 + 1) + 1 * 1);
}

TEST_CASE("a converged master reports a zero step and no line search") {
  const BlockQP t1 = tiny_instance();
  MasterCoordinator master(t1, MasterCoordinator::Config{});
  PenaltySetting setting;
  setting.delta = 1e-8;
  setting.rho = 1e4;
  setting.subsolve_tol = 1e-10;
  const auto outcome = master.solve(setting, 50);
  CHECK(outcome.step_converged);
  const auto& last = outcome.records.back();
  CHECK(last.step_norm <= 1e-8);
  CHECK(last.line_search_evals == 0);
}

TEST_CASE("merit decreases monotonically and iterates stay feasible") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 4; ++trial) {
    const BlockQP p = random_regular_problem(rng, 3, 2);
    MasterCoordinator master(p, MasterCoordinator::Config{});
    master.set_y(feasible_start(p.global, p.n_y) + Vector::Constant(p.n_y, 0.5));
    PenaltySetting setting;
    setting.delta = 1e-6;
    setting.rho = 1e3;
    setting.subsolve_tol = 1e-10;

    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k) {
      const IterationRecord rec = master.iterate(setting);
      const double merit = master.state().merit;
      CHECK(merit <= previous + 1e-9 * (1.0 + std::abs(merit)));
      previous = merit;
      if (p.global.ni() > 0) {
        CHECK((p.global.Bineq * master.y() - p.global.dineq).maxCoeff() <= 1e-9);
      }
      if (rec.step_norm <= 1e-8) break;
    }
  }
}

TEST_CASE("master solve reaches stationarity with unit steps near the optimum") {
  std::mt19937_64 rng(73);
  const BlockQP p = random_regular_problem(rng, 2, 3);
  MasterCoordinator master(p, MasterCoordinator::Config{});
  PenaltySetting setting;
  setting.delta = 1e-4;
  setting.rho = 1e4;
  setting.subsolve_tol = 1e-10;
  const auto outcome = master.solve(setting, 100);
  CHECK(outcome.step_converged);
  REQUIRE(outcome.records.size() >= 2);
  const auto& final_step = outcome.records[outcome.records.size() - 2];
  CHECK(final_step.alpha == doctest::Approx(1.0));  // quadratic regime
}
