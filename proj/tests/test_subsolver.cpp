#include <doctest.h>

#include <random>

#include "qpdec/subsolver.hpp"
#include "test_util.hpp"

using namespace qpdec;
using namespace qpdec::testing;

namespace {

SubsolveRequest al_request(const Vector& y, double delta, double rho, double lambda0 = 0.0) {
  SubsolveRequest req;
  req.y = y;
  req.delta = delta;
  AlMode mode;
  mode.rho = rho;
  mode.lambda = Vector::Constant(y.size(), lambda0);
  req.mode = mode;
  return req;
}

SubsolveRequest l1_request(const Vector& y, double delta, double lambda_bar) {
  SubsolveRequest req;
  req.y = y;
  req.delta = delta;
  req.mode = L1Mode{lambda_bar};
  return req;
}

}  // namespace

TEST_CASE("AL subsolve on the tiny instance recovers the known optimum") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  const auto res = solver.solve(al_request(Vector::Zero(1), 1e-8, 1e3));
  CHECK(std::abs(res.point.x(0) - 1.0) <= 1e-5);
  CHECK(std::abs(res.point.z(0)) <= 1e-5);
  CHECK_FALSE(res.reused_warm_start);
  CHECK(res.kkt_residual <= 1e-10);
}

TEST_CASE("warm start converges in very few newton steps") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Zero(1), 1e-8, 1e3);
  const auto first = solver.solve(req);
  req.warm_start = first.point;
  const auto second = solver.solve(req);
  CHECK(second.reused_warm_start);
  CHECK(second.newton_iters <= 3);
}

TEST_CASE("inexact termination honours min(delta, 1/penalty)") {
  CHECK(inexact_tolerance(1e-2, 1e3) == doctest::Approx(1e-3));
  CHECK(inexact_tolerance(0.1, 1e3) == doctest::Approx(1e-3));
  CHECK(inexact_tolerance(0.1, 100.0) == doctest::Approx(1e-2));

  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Zero(1), 1e-2, 1e3);
  req.tol = inexact_tolerance(req.delta, 1e3);
  const auto res = solver.solve(req);
  CHECK(res.kkt_residual <= 1e-3);
}

TEST_CASE("reported residual equals an independent re-evaluation") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Constant(1, 0.4), 1e-6, 1e3);
  const auto res = solver.solve(req);
  const Vector r = kkt_residual(t1.subsystems[0], res.point, req);
  CHECK(std::abs(r.cwiseAbs().maxCoeff() - res.kkt_residual) <= 1e-12);
}

TEST_CASE("l1 subsolve on the tiny instance") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  const auto res = solver.solve(l1_request(Vector::Zero(1), 1e-8, 100.0));
  CHECK(std::abs(res.point.z(0)) <= 1e-4);
  // stationarity of the elastic slacks: v = delta/(lambda_bar - chi), chi ~ 0
  CHECK(res.point.v(0) == doctest::Approx(1e-10).epsilon(0.2));
  CHECK(res.point.w(0) == doctest::Approx(1e-10).epsilon(0.2));
}

TEST_CASE("undersized penalty still converges, with a coupling residual") {
  // equality row pins z = 5 while y = 0; no finite penalty can close the gap
  SubsystemBlock s;
  s.Hxx = Matrix::Identity(1, 1);
  s.Hxy = Matrix::Zero(1, 1);
  s.Hyy = Matrix::Identity(1, 1);
  s.hx = Vector::Zero(1);
  s.hy = Vector::Zero(1);
  s.Ax = Matrix::Zero(1, 1);
  s.Ay = Matrix::Identity(1, 1);
  s.b = Vector::Constant(1, 5.0);
  s.Bx = Matrix(0, 1);
  s.By = Matrix(0, 1);
  s.d = Vector(0);
  SubsystemSolver solver(s);
  const auto res = solver.solve(l1_request(Vector::Zero(1), 1e-8, 2.0));
  CHECK(res.kkt_residual <= 1e-10);
  CHECK(std::abs(res.point.z(0) - 0.0) > 0.1);  // z stays pinned away from y
}

TEST_CASE("feasible coupling is reproduced exactly by the elastic relaxation") {
  SubsystemBlock s;
  s.Hxx = Matrix::Identity(1, 1);
  s.Hxy = Matrix::Zero(1, 1);
  s.Hyy = Matrix::Identity(1, 1);
  s.hx = Vector::Zero(1);
  s.hy = Vector::Zero(1);
  s.Ax = Matrix(0, 1);
  s.Ay = Matrix(0, 1);
  s.b = Vector(0);
  s.Bx = Matrix(0, 1);
  s.By = Matrix(0, 1);
  s.d = Vector(0);
  SubsystemSolver solver(s);
  const Vector y = Vector::Constant(1, 3.0);
  const auto res = solver.solve(l1_request(y, 1e-8, 100.0));
  CHECK(std::abs(res.point.z(0) - y(0)) <= 1e-6);
}

TEST_CASE("schur and direct newton steps agree") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  AlMode mode;
  mode.rho = 1e3;
  mode.lambda = Vector::Zero(1);
  const Vector y = Vector::Constant(1, 0.3);
  SubsolveRequest req = al_request(y, 1e-4, mode.rho);
  const SubsystemPoint start = solver.cold_start(req);
  const SubsystemPoint ds = solver.newton_step_schur(start, y, 1e-4, mode);
  const SubsystemPoint dd = solver.newton_step_direct(start, y, 1e-4, mode);
  CHECK(std::abs(ds.x(0) - dd.x(0)) <= 1e-10 * std::max(1.0, std::abs(dd.x(0))));
  CHECK(std::abs(ds.z(0) - dd.z(0)) <= 1e-10 * std::max(1.0, std::abs(dd.z(0))));

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 6, 2);
    SubsystemSolver sub(blk);
    REQUIRE_FALSE(sub.uses_direct_fallback());
    AlMode m2;
    m2.rho = uniform(rng, 1.0, 1e4);
    m2.lambda = random_vector(rng, 2);
    const Vector yy = random_vector(rng, 2);
    SubsolveRequest r2;
    r2.y = yy;
    r2.delta = 1e-2;
    r2.mode = m2;
    const SubsystemPoint p0 = sub.cold_start(r2);
    const SubsystemPoint a = sub.newton_step_schur(p0, yy, r2.delta, m2);
    const SubsystemPoint b = sub.newton_step_direct(p0, yy, r2.delta, m2);
    Vector da(a.x.size() + a.z.size()), db(b.x.size() + b.z.size());
    da << a.x, a.z;
    db << b.x, b.z;
    CHECK((da - db).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, db.cwiseAbs().maxCoeff()));
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, b.mu.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("reduced l1 newton system reproduces the unreduced one") {
  std::mt19937_64 rng(137);
  for (int trial = 0; trial < 10; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 4, 2);
    SubsystemSolver solver(blk);
    const Vector y = random_vector(rng, 2);
    const L1Mode mode{50.0};
    SubsolveRequest req;
    req.y = y;
    req.delta = 0.05;
    req.mode = mode;
    const SubsystemPoint p = solver.cold_start(req);
    const SubsystemPoint d = solver.newton_step_l1(p, y, req.delta, mode);

    const Matrix j = l1_kkt_jacobian(blk, p, mode.lambda_bar);
    const Vector r = l1_kkt_residual(blk, p, y, req.delta, mode);
    const Vector full = EquilibratedSolver(j, FactorKind::SymmetricIndefinite).solve(Vector(-r));
    const Eigen::Index nx = blk.nx(), ny = blk.ny(), ni = blk.ni(), ne = blk.ne();
    Vector packed(nx + 4 * ny + 2 * ni + ne);
    packed << d.x, d.z, d.s, d.v, d.w, d.gamma, d.mu, d.chi;
    CHECK((packed - full).cwiseAbs().maxCoeff() <=
          1e-7 * std::max(1.0, full.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("singular Hxx falls back to the direct path") {
  SubsystemBlock s = tiny_instance().subsystems[0];
  s.Hxx = Matrix::Zero(1, 1);
  s.hx = Vector::Zero(1);
  s.Bx = Matrix(2, 1);
  s.Bx << 1.0, -1.0;  // box keeps the degenerate problem bounded
  s.By = Matrix::Zero(2, 1);
  s.d = Vector::Constant(2, 10.0);
  SubsystemSolver solver(s);
  CHECK(solver.uses_direct_fallback());
  const auto res = solver.solve(al_request(Vector::Zero(1), 1e-6, 1e2));
  CHECK(res.kkt_residual <= 1e-10);
  AlMode mode;
  mode.rho = 1e2;
  mode.lambda = Vector::Zero(1);
  CHECK_THROWS_AS(solver.newton_step_schur(res.point, Vector::Zero(1), 1e-6, mode),
                  NumericalError);
}

TEST_CASE("iterates stay strictly interior under the fraction-to-boundary rule") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Zero(1), 0.1, 1e3);
  int iterates = 0;
  req.on_iterate = [&](const SubsystemPoint& p) {
    ++iterates;
    CHECK(p.s.minCoeff() > 0.0);
    CHECK(p.mu.minCoeff() > 0.0);
  };
  solver.solve(req);
  CHECK(iterates >= 1);

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 4, 2);
    SubsystemSolver sub(blk);
    SubsolveRequest r;
    r.y = random_vector(rng, 2, 2.0);
    r.delta = 1e-6;
    r.mode = L1Mode{100.0};
    r.on_iterate = [&](const SubsystemPoint& p) {
      CHECK(p.s.minCoeff() > 0.0);
      CHECK(p.mu.minCoeff() > 0.0);
      CHECK(p.v.minCoeff() > 0.0);
      CHECK(p.w.minCoeff() > 0.0);
    };
    const auto res = sub.solve(r);
    CHECK(res.kkt_residual <= r.tol);
  }
}

TEST_CASE("cold and warm starts share the fixed point") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 5, 2);
    SubsystemSolver solver(blk);
    const Vector y1 = random_vector(rng, 2);
    const Vector y2 = random_vector(rng, 2);
    SubsolveRequest req = al_request(y1, 1e-8, 1e3);
    req.mode = AlMode{1e3, random_vector(rng, 2)};
    const auto at_y1 = solver.solve(req);
    req.y = y2;
    const auto cold = solver.solve(req);
    req.warm_start = at_y1.point;
    const auto warm = solver.solve(req);
    CHECK(warm.reused_warm_start);
    CHECK((cold.point.x - warm.point.x).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((cold.point.z - warm.point.z).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("invalid requests are rejected") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Zero(1), 0.0, 1e3);
  CHECK_THROWS_AS(solver.solve(req), ValidationError);
  req = al_request(Vector::Zero(1), 0.1, -1.0);
  CHECK_THROWS_AS(solver.solve(req), ValidationError);
  req = l1_request(Vector::Zero(1), 0.1, 0.0);
  CHECK_THROWS_AS(solver.solve(req), ValidationError);
}

TEST_CASE("iteration cap raises a convergence error carrying the best residual") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req = al_request(Vector::Zero(1), 1e-8, 1e3);
  req.max_newton = 0;
  try {
    solver.solve(req);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.best_residual > 0.0);
    CHECK(std::isfinite(e.best_residual));
  }
}
