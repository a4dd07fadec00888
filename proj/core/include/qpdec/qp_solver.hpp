#pragma once

#include "qpdec/linalg.hpp"

namespace qpdec {

/// Generic dense convex QP:
///   min 1/2 x^T H x + h^T x   s.t.  Aeq x = beq,  Bineq x <= dineq.
/// H must be symmetric positive semidefinite (definite on the feasible
/// directions); zero-row constraint blocks are fine.
struct DenseQP {
  Matrix H;
  Vector h;
  Matrix Aeq;
  Vector beq;
  Matrix Bineq;
  Vector dineq;

  Eigen::Index num_vars() const { return h.size(); }
  double objective(const Vector& x) const { return 0.5 * x.dot(H * x) + h.dot(x); }
};

struct QpSettings {
  double tol = 1e-10;        // target for stationarity, primal residuals and complementarity
  int max_iterations = 300;
  double fraction_to_boundary = 0.995;
  /// Scale the termination test by the iterate magnitudes. Callers whose
  /// solutions can be many orders of magnitude large (the coordination step
  /// on nearly flat value functions) need this; the reference oracle keeps
  /// absolute tolerances.
  bool relative_termination = false;
};

struct QpSolution {
  Vector x;
  Vector eq_duals;
  Vector ineq_duals;
  Vector slacks;
  double objective = 0.0;
  double kkt_residual = 0.0;    // max of stationarity and primal residuals
  double complementarity = 0.0; // max_j s_j * mu_j
  int iterations = 0;
};

/// Infeasible-start primal-dual barrier method; throws ConvergenceError when
/// the iteration cap is hit (which also covers infeasible/unbounded inputs).
QpSolution solve_dense_qp(const DenseQP& qp, const QpSettings& settings = {});

}  // namespace qpdec
