#include "qpdec/oracle.hpp"

#include <cmath>
#include <sstream>

namespace qpdec {

namespace {

constexpr Eigen::Index kEnumerationCap = 12;  // 4096 subsets keeps brute force tractable

DenseQP densify(const MonolithicQP& qp) {
  DenseQP d;
  d.H = Matrix(qp.H);
  d.h = qp.h;
  d.Aeq = Matrix(qp.Aeq);
  d.beq = qp.beq;
  d.Bineq = Matrix(qp.Aineq);
  d.dineq = qp.dineq;
  return d;
}

struct EnumerationResult {
  bool found = false;
  Vector x;
  double objective = 0.0;
};

// Solves the equality-constrained KKT system for every subset of active
// inequality rows and keeps the feasible, dual-feasible candidate.
EnumerationResult enumerate_active_sets(const DenseQP& qp) {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index me = qp.Aeq.rows();
  const Eigen::Index mi = qp.Bineq.rows();
  EnumerationResult best;
  for (unsigned subset = 0; subset < (1u << mi); ++subset) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < mi; ++j) {
      if (subset & (1u << j)) active.push_back(j);
    }
    const Eigen::Index ma = Eigen::Index(active.size());
    Matrix kkt = Matrix::Zero(n + me + ma, n + me + ma);
    kkt.topLeftCorner(n, n) = qp.H;
    if (me > 0) {
      kkt.block(0, n, n, me) = qp.Aeq.transpose();
      kkt.block(n, 0, me, n) = qp.Aeq;
    }
    for (Eigen::Index a = 0; a < ma; ++a) {
      kkt.block(0, n + me + a, n, 1) = qp.Bineq.row(active[size_t(a)]).transpose();
      kkt.block(n + me + a, 0, 1, n) = qp.Bineq.row(active[size_t(a)]);
    }
    Vector rhs(n + me + ma);
    rhs.head(n) = -qp.h;
    if (me > 0) rhs.segment(n, me) = qp.beq;
    for (Eigen::Index a = 0; a < ma; ++a) rhs(n + me + a) = qp.dineq(active[size_t(a)]);

    Vector sol;
    try {
      sol = EquilibratedSolver(kkt, FactorKind::SymmetricIndefinite).solve(rhs);
    } catch (const Error&) {
      continue;  // singular working set
    }
    const Vector x = sol.head(n);
    const Vector mu_active = sol.tail(ma);
    if (mu_active.size() > 0 && mu_active.minCoeff() < -1e-9) continue;
    if (mi > 0) {
      const Vector slack = qp.dineq - qp.Bineq * x;
      if (slack.minCoeff() < -1e-9) continue;
    }
    const double f = qp.objective(x);
    if (!best.found || f < best.objective) {
      best.found = true;
      best.x = x;
      best.objective = f;
    }
  }
  return best;
}

}  // namespace

OracleSolution solve_monolithic(const MonolithicQP& qp) {
  const DenseQP dense = densify(qp);
  QpSettings settings;
  settings.tol = 1e-10;
  QpSolution sol;
  try {
    sol = solve_dense_qp(dense, settings);
  } catch (const ConvergenceError& e) {
    const FeasibilityReport feas = feasibility_check(qp);
    if (!feas.feasible) {
      std::ostringstream os;
      os << "oracle: problem infeasible (max row violation " << feas.violation << ")";
      throw InfeasibleError(os.str());
    }
    throw NumericalError(std::string("oracle: interior point failed on a feasible problem: ") +
                         e.what());
  }

  OracleSolution out;
  out.x_full = sol.x;
  out.eq_duals = sol.eq_duals;
  out.ineq_duals = sol.ineq_duals;
  out.objective = sol.objective;
  out.kkt_residual = sol.kkt_residual;
  out.complementarity = sol.complementarity;
  for (Eigen::Index j = 0; j < sol.slacks.size(); ++j) {
    if (sol.slacks(j) < 1e-6 * (1.0 + std::abs(dense.dineq(j)))) out.active_set.push_back(j);
  }

  if (dense.Bineq.rows() <= kEnumerationCap) {
    const EnumerationResult enumerated = enumerate_active_sets(dense);
    if (!enumerated.found) {
      throw NumericalError("oracle: enumeration found no feasible working set");
    }
    const double obj_tol = 1e-9 * std::max(1.0, std::abs(enumerated.objective));
    const double x_tol = 1e-8 * (1.0 + enumerated.x.cwiseAbs().maxCoeff());
    if (std::abs(enumerated.objective - out.objective) > obj_tol ||
        (enumerated.x - out.x_full).cwiseAbs().maxCoeff() > x_tol) {
      std::ostringstream os;
      os << "oracle: interior point and active-set enumeration disagree (objectives "
         << out.objective << " vs " << enumerated.objective << ")";
      throw NumericalError(os.str());
    }
    out.cross_validated = true;
  }
  return out;
}

FeasibilityReport feasibility_check(const MonolithicQP& qp) {
  const DenseQP dense = densify(qp);
  const Eigen::Index n = dense.num_vars();
  const Eigen::Index me = dense.Aeq.rows();
  const Eigen::Index mi = dense.Bineq.rows();

  // elastic program over [x, t+, t-, u]: minimize 1^T(t+ + t- + u). The small
  // quadratic on every variable picks one witness among the violation
  // minimizers and keeps the optimum nondegenerate for the barrier solve.
  const Eigen::Index m = n + 2 * me + mi;
  DenseQP elastic;
  elastic.H = 1e-4 * Matrix::Identity(m, m);
  elastic.h = Vector::Zero(m);
  elastic.h.tail(2 * me + mi).setOnes();
  elastic.Aeq = Matrix::Zero(me, m);
  if (me > 0) {
    elastic.Aeq.leftCols(n) = dense.Aeq;
    elastic.Aeq.block(0, n, me, me) = -Matrix::Identity(me, me);
    elastic.Aeq.block(0, n + me, me, me) = Matrix::Identity(me, me);
  }
  elastic.beq = dense.beq;
  elastic.Bineq = Matrix::Zero(mi + 2 * me + mi, m);
  elastic.dineq = Vector::Zero(mi + 2 * me + mi);
  if (mi > 0) {
    elastic.Bineq.topLeftCorner(mi, n) = dense.Bineq;
    elastic.Bineq.block(0, n + 2 * me, mi, mi) = -Matrix::Identity(mi, mi);
    elastic.dineq.head(mi) = dense.dineq;
  }
  elastic.Bineq.block(mi, n, 2 * me + mi, 2 * me + mi) =
      -Matrix::Identity(2 * me + mi, 2 * me + mi);

  QpSettings settings;
  settings.tol = 1e-10;
  settings.max_iterations = 500;
  const QpSolution sol = solve_dense_qp(elastic, settings);

  FeasibilityReport out;
  out.witness = sol.x.head(n);
  double violation = 0.0;
  if (me > 0) violation = (dense.Aeq * out.witness - dense.beq).cwiseAbs().maxCoeff();
  if (mi > 0) {
    violation = std::max(violation, (dense.Bineq * out.witness - dense.dineq).maxCoeff());
  }
  out.violation = std::max(violation, 0.0);
  out.feasible = out.violation <= 1e-9;
  return out;
}

}  // namespace qpdec
