#include "qpdec/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpdec {

namespace {

double step_to_boundary(const Vector& v, const Vector& dv, double tau) {
  double alpha = 1.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (dv(j) < 0.0) alpha = std::min(alpha, -tau * v(j) / dv(j));
  }
  return alpha;
}

// Equality-only (or unconstrained) QP: one KKT solve.
QpSolution solve_equality_qp(const DenseQP& qp, const QpSettings& settings) {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index me = qp.Aeq.rows();
  Matrix kkt = Matrix::Zero(n + me, n + me);
  kkt.topLeftCorner(n, n) = qp.H;
  if (me > 0) {
    kkt.topRightCorner(n, me) = qp.Aeq.transpose();
    kkt.bottomLeftCorner(me, n) = qp.Aeq;
  }
  Vector rhs(n + me);
  rhs.head(n) = -qp.h;
  if (me > 0) rhs.tail(me) = qp.beq;
  Vector sol;
  try {
    sol = EquilibratedSolver(kkt, FactorKind::SymmetricIndefinite).solve(rhs);
  } catch (const SingularityError&) {
    throw NumericalError("qp: singular KKT system (problem unbounded or equality rows dependent)");
  }
  QpSolution out;
  out.x = sol.head(n);
  out.eq_duals = sol.tail(me);
  out.ineq_duals = Vector(0);
  out.slacks = Vector(0);
  out.objective = qp.objective(out.x);
  Vector rd = qp.H * out.x + qp.h;
  if (me > 0) rd += qp.Aeq.transpose() * out.eq_duals;
  out.kkt_residual = rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0;
  if (me > 0) {
    out.kkt_residual =
        std::max(out.kkt_residual, (qp.Aeq * out.x - qp.beq).cwiseAbs().maxCoeff());
  }
  out.complementarity = 0.0;
  out.iterations = 1;
  if (out.kkt_residual > std::max(settings.tol, 1e-8 * (1.0 + inf_norm(kkt)))) {
    throw NumericalError("qp: equality KKT solve did not reach requested accuracy");
  }
  return out;
}

}  // namespace

QpSolution solve_dense_qp(const DenseQP& qp, const QpSettings& settings) {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index me = qp.Aeq.rows();
  const Eigen::Index mi = qp.Bineq.rows();
  if (qp.H.rows() != n || qp.H.cols() != n) throw DimensionError("qp: H/h dimensions disagree");
  if (me != qp.beq.size() || (me > 0 && qp.Aeq.cols() != n)) throw DimensionError("qp: Aeq/beq");
  if (mi != qp.dineq.size() || (mi > 0 && qp.Bineq.cols() != n)) throw DimensionError("qp: Bineq/dineq");

  if (mi == 0) return solve_equality_qp(qp, settings);

  Vector x = Vector::Zero(n);
  Vector gamma = Vector::Zero(me);
  Vector s = (qp.dineq - qp.Bineq * x).cwiseMax(1.0);
  Vector mu = Vector::Ones(mi);

  const double tau = settings.fraction_to_boundary;
  double best_residual = std::numeric_limits<double>::infinity();
  int tiny_steps = 0;
  // staged barrier path: hold delta until the delta-system is nearly solved
  double delta = std::max(1.0, s.dot(mu) / double(mi));
  const double delta_floor = 0.01 * settings.tol;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    Vector rd = qp.H * x + qp.h + qp.Bineq.transpose() * mu;
    if (me > 0) rd += qp.Aeq.transpose() * gamma;
    Vector re = me > 0 ? Vector(qp.Aeq * x - qp.beq) : Vector(0);
    Vector ri = qp.Bineq * x + s - qp.dineq;
    const double comp = (s.array() * mu.array()).abs().maxCoeff();
    double kkt = rd.cwiseAbs().maxCoeff();
    if (me > 0) kkt = std::max(kkt, re.cwiseAbs().maxCoeff());
    kkt = std::max(kkt, ri.cwiseAbs().maxCoeff());
    best_residual = std::min(best_residual, std::max(kkt, comp));

    double tol_scale = 1.0;
    if (settings.relative_termination) {
      tol_scale += x.cwiseAbs().maxCoeff() + s.maxCoeff() + mu.maxCoeff();
      if (me > 0) tol_scale += gamma.cwiseAbs().maxCoeff();
    }
    if (kkt <= settings.tol * tol_scale && comp <= settings.tol * tol_scale) {
      QpSolution out;
      out.x = x;
      out.eq_duals = gamma;
      out.ineq_duals = mu;
      out.slacks = s;
      out.objective = qp.objective(x);
      out.kkt_residual = kkt;
      out.complementarity = comp;
      out.iterations = iter;
      return out;
    }

    const double centering = (s.array() * mu.array() - delta).abs().maxCoeff();
    if (std::max(kkt, centering) <= std::max(0.1 * delta, 0.9 * settings.tol)) {
      delta = std::max(0.1 * delta, delta_floor);
    }
    Vector rc = (s.array() * mu.array() - delta).matrix();

    // condensed system in (x, gamma); s and mu recovered afterwards
    Vector sigma = (mu.array() / s.array()).matrix();
    Matrix kktm = Matrix::Zero(n + me, n + me);
    kktm.topLeftCorner(n, n) = qp.H;
    kktm.topLeftCorner(n, n).noalias() +=
        qp.Bineq.transpose() * sigma.asDiagonal() * qp.Bineq;
    if (me > 0) {
      kktm.topRightCorner(n, me) = qp.Aeq.transpose();
      kktm.bottomLeftCorner(me, n) = qp.Aeq;
    }
    Vector rhs(n + me);
    rhs.head(n) = -rd + qp.Bineq.transpose() *
                            ((rc.array() / s.array()) - (mu.array() * ri.array() / s.array()))
                                .matrix();
    if (me > 0) rhs.tail(me) = -re;

    Vector step;
    double reg = 0.0;
    for (;;) {
      try {
        Matrix m = kktm;
        if (reg > 0.0) {
          m.topLeftCorner(n, n).diagonal().array() += reg;
          m.bottomRightCorner(me, me).diagonal().array() -= reg;
        }
        step = EquilibratedSolver(m, FactorKind::SymmetricIndefinite).solve(rhs);
        break;
      } catch (const SingularityError&) {
        reg = reg == 0.0 ? 1e-12 * std::max(1.0, inf_norm(kktm)) : reg * 100.0;
        if (reg > 1e-4 * std::max(1.0, inf_norm(kktm))) {
          throw NumericalError("qp: KKT system persistently singular");
        }
      }
    }

    Vector dx = step.head(n);
    Vector dgamma = me > 0 ? Vector(step.tail(me)) : Vector(0);
    Vector ds = -ri - qp.Bineq * dx;
    Vector dmu =
        ((-rc.array() - mu.array() * ds.array()) / s.array()).matrix();

    double alpha = std::min(step_to_boundary(s, ds, tau), step_to_boundary(mu, dmu, tau));
    x += alpha * dx;
    if (me > 0) gamma += alpha * dgamma;
    s += alpha * ds;
    mu += alpha * dmu;

    if (alpha < 1e-12) {
      if (++tiny_steps > 8) {
        throw ConvergenceError("qp: step size collapsed (problem may be infeasible)",
                               best_residual);
      }
    } else {
      tiny_steps = 0;
    }
  }
  throw ConvergenceError("qp: iteration cap exceeded", best_residual);
}

}  // namespace qpdec
