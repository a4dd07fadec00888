#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "qpdec/sensitivity.hpp"
#include "test_util.hpp"

using namespace qpdec;
using namespace qpdec::testing;

namespace {

SubsolveResult tight_al(const SubsystemSolver& solver, const Vector& y, double delta,
                        const AlMode& mode) {
  SubsolveRequest req;
  req.y = y;
  req.delta = delta;
  req.mode = mode;
  // the z-stationarity row is evaluated as rho (z - y) - ..., so its roundoff
  // floor grows with rho; stay above it
  req.tol = std::max(1e-11, 1e-15 * mode.rho);
  return solver.solve(req);
}

SubsolveResult tight_l1(const SubsystemSolver& solver, const Vector& y, double delta,
                        const L1Mode& mode) {
  SubsolveRequest req;
  req.y = y;
  req.delta = delta;
  req.mode = mode;
  req.tol = 1e-11;
  return solver.solve(req);
}

double value_at_al(const SubsystemSolver& solver, const Vector& y, double delta,
                   const AlMode& mode) {
  const auto res = tight_al(solver, y, delta, mode);
  return value_al(solver.block(), res.point, y, delta, mode);
}

Vector fd_gradient_al(const SubsystemSolver& solver, const Vector& y, double delta,
                      const AlMode& mode, double h = 1e-5) {
  Vector g(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Vector yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    g(j) = (value_at_al(solver, yp, delta, mode) - value_at_al(solver, ym, delta, mode)) /
           (2.0 * h);
  }
  return g;
}

Matrix fd_hessian_al(const SubsystemSolver& solver, const Vector& y, double delta,
                     const AlMode& mode, double h = 1e-5) {
  Matrix out(y.size(), y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Vector yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    const auto rp = tight_al(solver, yp, delta, mode);
    const auto rm = tight_al(solver, ym, delta, mode);
    out.col(j) = (gradient_al(solver.block(), rp.point, yp, delta, mode) -
                  gradient_al(solver.block(), rm.point, ym, delta, mode)) /
                 (2.0 * h);
  }
  return out;
}

double value_at_l1(const SubsystemSolver& solver, const Vector& y, double delta,
                   const L1Mode& mode) {
  const auto res = tight_l1(solver, y, delta, mode);
  return value_l1(solver.block(), res.point, y, delta, mode);
}

Vector fd_gradient_l1(const SubsystemSolver& solver, const Vector& y, double delta,
                      const L1Mode& mode, double h = 1e-5) {
  Vector g(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Vector yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    g(j) = (value_at_l1(solver, yp, delta, mode) - value_at_l1(solver, ym, delta, mode)) /
           (2.0 * h);
  }
  return g;
}

Matrix fd_hessian_l1(const SubsystemSolver& solver, const Vector& y, double delta,
                     const L1Mode& mode, double h = 1e-5) {
  Matrix out(y.size(), y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Vector yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    const auto rp = tight_l1(solver, yp, delta, mode);
    const auto rm = tight_l1(solver, ym, delta, mode);
    out.col(j) = (gradient_l1(solver.block(), rp.point, yp, delta, mode) -
                  gradient_l1(solver.block(), rm.point, ym, delta, mode)) /
                 (2.0 * h);
  }
  return out;
}

double rel_err(const Matrix& got, const Matrix& ref) {
  return inf_norm(Matrix(got - ref)) / std::max(1.0, inf_norm(ref));
}

}  // namespace

TEST_CASE("AL gradient on the tiny instance matches the exact value function") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  AlMode mode{1e4, Vector::Zero(1)};

  auto at1 = tight_al(solver, Vector::Constant(1, 1.0), 1e-10, mode);
  const Vector g1 =
      gradient_al(solver.block(), at1.point, Vector::Constant(1, 1.0), 1e-10, mode);
  CHECK(std::abs(g1(0) - 2.0) <= 1e-3);  // exact value function has slope 2 y

  auto at0 = tight_al(solver, Vector::Zero(1), 1e-10, mode);
  const Vector g0 = gradient_al(solver.block(), at0.point, Vector::Zero(1), 1e-10, mode);
  CHECK(std::abs(g0(0)) <= 1e-3);
}

TEST_CASE("shifted multipliers keep the gradient consistent with finite differences") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  AlMode mode{1e3, Vector::Constant(1, 0.37)};
  const Vector y = Vector::Constant(1, 0.6);
  const auto res = tight_al(solver, y, 1e-8, mode);
  const Vector g = gradient_al(solver.block(), res.point, y, 1e-8, mode);
  const Vector g_fd = fd_gradient_al(solver, y, 1e-8, mode);
  CHECK((g - g_fd).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, g_fd.cwiseAbs().maxCoeff()));
}

TEST_CASE("AL hessian on the tiny instance") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  AlMode mode{1e4, Vector::Zero(1)};
  const Vector y = Vector::Constant(1, 1.0);
  const auto res = tight_al(solver, y, 1e-10, mode);
  const Matrix h = hessian_al(solver.block(), solver.precomputed(), res.point, y, 1e-10, mode);
  CHECK(std::abs(h(0, 0) - 2.0) <= 1e-2);
}

TEST_CASE("gradients and hessians match finite differences on random subsystems") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index nx = 2 + Eigen::Index(rng() % 7);
    const Eigen::Index ny = 1 + Eigen::Index(rng() % 4);
    const SubsystemBlock blk = random_regular_block(rng, nx, ny);
    SubsystemSolver solver(blk);
    const Vector y = random_vector(rng, ny, 0.5);

    AlMode al{uniform(rng, 10.0, 1e3), random_vector(rng, ny, 0.3)};
    const auto res = tight_al(solver, y, 1e-8, al);
    const Vector g = gradient_al(blk, res.point, y, 1e-8, al);
    CHECK(rel_err(g, fd_gradient_al(solver, y, 1e-8, al)) <= 1e-4);
    const Matrix h = hessian_al(blk, solver.precomputed(), res.point, y, 1e-8, al);
    CHECK(rel_err(h, fd_hessian_al(solver, y, 1e-8, al)) <= 1e-3);

    L1Mode l1{100.0};
    const auto res1 = tight_l1(solver, y, 1e-8, l1);
    const Vector g1 = gradient_l1(blk, res1.point, y, 1e-8, l1);
    CHECK(rel_err(g1, fd_gradient_l1(solver, y, 1e-8, l1)) <= 1e-4);
    const Matrix h1 = hessian_l1(blk, res1.point, y, 1e-8, l1).hessian;
    CHECK(rel_err(h1, fd_hessian_l1(solver, y, 1e-8, l1)) <= 1e-3);
  }
}

TEST_CASE("schur path equals the unreduced path whenever Hxx is invertible") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 6, 3);
    SubsystemSolver solver(blk);
    AlMode mode{uniform(rng, 1.0, 1e4), random_vector(rng, 3)};
    const Vector y = random_vector(rng, 3);
    const auto res = tight_al(solver, y, 1e-6, mode);
    const Matrix hs = hessian_al(blk, solver.precomputed(), res.point, y, 1e-6, mode);
    const Matrix hd = hessian_al_direct(blk, res.point, y, 1e-6, mode);
    CHECK(rel_err(hs, hd) <= 1e-8);
  }
}

TEST_CASE("AL hessians are positive definite for any positive penalty") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 5, 3);
    SubsystemSolver solver(blk);
    const Vector y = random_vector(rng, 3);
    for (double rho : {1.0, 1e3, 1e6}) {
      AlMode mode{rho, Vector::Zero(3)};
      const auto res = tight_al(solver, y, 1e-8, mode);
      const Matrix h = hessian_al(blk, solver.precomputed(), res.point, y, 1e-8, mode);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
      CHECK(eig.eigenvalues().minCoeff() > 1e-10 * h.trace());
    }
  }
}

TEST_CASE("l1 gradient is the elastic multiplier and tracks the exact slope") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  L1Mode mode{100.0};
  const Vector y = Vector::Constant(1, 1.0);
  const auto res = tight_l1(solver, y, 1e-8, mode);
  const Vector g = gradient_l1(solver.block(), res.point, y, 1e-8, mode);
  CHECK(g(0) == doctest::Approx(res.point.chi(0)));
  CHECK(std::abs(g(0) - 2.0) <= 1e-2);  // exact penalty reproduces phi locally
  const Vector g_fd = fd_gradient_l1(solver, y, 1e-8, mode);
  CHECK(std::abs(g(0) - g_fd(0)) <= 1e-4 * std::max(1.0, std::abs(g_fd(0))));
}

TEST_CASE("elastic multiplier agrees with the AL gradient under feasible coupling") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  const Vector y = Vector::Constant(1, 0.7);
  AlMode al{1e6, Vector::Zero(1)};
  const auto res_al = tight_al(solver, y, 1e-8, al);
  const Vector g_al = gradient_al(solver.block(), res_al.point, y, 1e-8, al);
  L1Mode l1{100.0};
  const auto res_l1 = tight_l1(solver, y, 1e-8, l1);
  const Vector g_l1 = gradient_l1(solver.block(), res_l1.point, y, 1e-8, l1);
  CHECK(std::abs(g_al(0) - g_l1(0)) <= 1e-3);
}

TEST_CASE("chi vanishes at the subsystem's own optimum") {
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
  const auto res = tight_l1(solver, Vector::Zero(1), 1e-8, L1Mode{100.0});
  CHECK(std::abs(res.point.chi(0)) <= 1e-6);
}

TEST_CASE("l1 hessian on the tiny instance and its contracts") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  L1Mode mode{100.0};
  const Vector y = Vector::Constant(1, 1.0);
  const auto res = tight_l1(solver, y, 1e-8, mode);
  const L1Hessian h = hessian_l1(solver.block(), res.point, y, 1e-8, mode);
  CHECK(std::abs(h.hessian(0, 0) - 2.0) <= 1e-2);
  CHECK(h.penalty_above_multipliers);
  CHECK(inf_norm(Matrix(h.hessian - h.hessian.transpose())) <= 1e-9);

  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 10; ++trial) {
    const SubsystemBlock blk = random_regular_block(rng, 4, 2);
    SubsystemSolver sub(blk);
    const Vector yy = random_vector(rng, 2);
    const auto r = tight_l1(sub, yy, 1e-8, L1Mode{1e3});
    const L1Hessian hh = hessian_l1(blk, r.point, yy, 1e-8, L1Mode{1e3});
    if (hh.penalty_above_multipliers) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(hh.hessian);
      CHECK(eig.eigenvalues().minCoeff() > 1e-10 * hh.hessian.trace());
    }
  }
}

TEST_CASE("penalty margin flag trips when chi presses against lambda_bar") {
  SubsystemBlock s;  // equality z = 5 makes the consensus multiplier saturate
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
  L1Mode mode{2.0};
  const auto res = tight_l1(solver, Vector::Zero(1), 1e-8, mode);
  const L1Hessian h = hessian_l1(s, res.point, Vector::Zero(1), 1e-8, mode);
  CHECK_FALSE(h.penalty_above_multipliers);
}

TEST_CASE("value evaluations") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  AlMode mode{1e3, Vector::Zero(1)};
  const auto res = tight_al(solver, Vector::Zero(1), 1e-10, mode);
  CHECK(std::abs(value_al(solver.block(), res.point, Vector::Zero(1), 1e-10, mode) + 1.0) <=
        1e-4);

  const double at_big_delta = value_at_al(solver, Vector::Zero(1), 0.1, mode);
  const double at_small_delta = value_at_al(solver, Vector::Zero(1), 1e-6, mode);
  CHECK(at_big_delta != at_small_delta);
  CHECK(std::isfinite(at_big_delta));
  CHECK(std::isfinite(at_small_delta));

  const double v1 = value_at_al(solver, Vector::Constant(1, 1.0), 1e-8, mode);
  const double v05 = value_at_al(solver, Vector::Constant(1, 0.5), 1e-8, mode);
  const double v0 = value_at_al(solver, Vector::Zero(1), 1e-8, mode);
  CHECK(v1 > v05);
  CHECK(v05 > v0);

  SubsystemPoint broken = res.point;
  broken.s(0) = -1.0;
  CHECK_THROWS_AS(value_al(solver.block(), broken, Vector::Zero(1), 1e-10, mode),
                  ValidationError);
}

TEST_CASE("loose points are rejected as stale") {
  const BlockQP t1 = tiny_instance();
  SubsystemSolver solver(t1.subsystems[0]);
  SubsolveRequest req;
  req.y = Vector::Zero(1);
  req.delta = 1e-2;
  req.mode = AlMode{1e3, Vector::Zero(1)};
  req.tol = 1e-3;  // deliberately loose
  const auto res = solver.solve(req);
  if (res.kkt_residual > 1e-8) {
    CHECK_THROWS_AS(
        gradient_al(solver.block(), res.point, req.y, req.delta, std::get<AlMode>(req.mode)),
        StalePointError);
  }
  // the looser threshold used by inexact outer iterations accepts the point
  const Vector g = gradient_al(solver.block(), res.point, req.y, req.delta,
                               std::get<AlMode>(req.mode), req.tol + 1e-12);
  CHECK(g.size() == 1);
}
