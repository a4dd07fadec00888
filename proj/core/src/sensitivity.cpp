#include "qpdec/sensitivity.hpp"

#include <cmath>
#include <sstream>

namespace qpdec {

namespace {

void require_tight(double residual, double stale_tol, const char* op) {
  if (residual > stale_tol) {
    std::ostringstream os;
    os << op << ": stale point, ||T||_inf = " << residual << " exceeds " << stale_tol;
    throw StalePointError(os.str(), residual, stale_tol);
  }
}

double residual_norm(const Vector& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

double barrier_sum(const Vector& v, const char* what) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!(v(j) > 0.0)) {
      std::ostringstream os;
      os << "value: nonpositive " << what << " component " << j;
      throw ValidationError(os.str());
    }
    sum += std::log(v(j));
  }
  return sum;
}

}  // namespace

double value_al(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                double delta, const AlMode& mode) {
  const Vector lambda = mode.lambda.size() ? mode.lambda : Vector(Vector::Zero(block.ny()));
  double f = 0.5 * point.x.dot(block.Hxx * point.x) + point.x.dot(block.Hxy * y) +
             0.5 * y.dot(block.Hyy * y) + 0.5 * mode.rho * (y - point.z).squaredNorm() +
             block.hx.dot(point.x) + (block.hy + lambda).dot(y) - lambda.dot(point.z);
  f -= delta * barrier_sum(point.s, "slack");
  return f;
}

double value_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                double delta, const L1Mode& mode) {
  (void)y;  // the l1 objective depends on y only through the elastic constraint
  double f = 0.5 * point.x.dot(block.Hxx * point.x) + point.x.dot(block.Hxy * point.z) +
             0.5 * point.z.dot(block.Hyy * point.z) + block.hx.dot(point.x) +
             block.hy.dot(point.z) + mode.lambda_bar * (point.v.sum() + point.w.sum());
  f -= delta * (barrier_sum(point.s, "slack") + barrier_sum(point.v, "elastic slack v") +
                barrier_sum(point.w, "elastic slack w"));
  return f;
}

Vector gradient_al(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                   double delta, const AlMode& mode, double stale_tol) {
  require_tight(residual_norm(al_kkt_residual(block, point, y, delta, mode)), stale_tol,
                "gradient_al");
  const Vector lambda = mode.lambda.size() ? mode.lambda : Vector(Vector::Zero(block.ny()));
  // rho (y - z) grouped: y and z agree to O(1/rho), the difference carries it
  return block.Hyy * y + block.Hxy.transpose() * point.x + block.hy + lambda +
         mode.rho * (y - point.z);
}

Vector gradient_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                   double delta, const L1Mode& mode, double stale_tol) {
  require_tight(residual_norm(l1_kkt_residual(block, point, y, delta, mode)), stale_tol,
                "gradient_l1");
  return point.chi;
}

Matrix hessian_al(const SubsystemBlock& block, const PrecomputedBlocks& pre,
                  const SubsystemPoint& point, const Vector& y, double delta, const AlMode& mode,
                  double stale_tol) {
  if (!pre.hxx_invertible) {
    return hessian_al_direct(block, point, y, delta, mode, stale_tol);
  }
  require_tight(residual_norm(al_kkt_residual(block, point, y, delta, mode)), stale_tol,
                "hessian_al");
  const Eigen::Index nx = block.nx(), ny = block.ny(), ne = block.ne(), ni = block.ni();

  // (K P^-1 K^T + W) [dgamma; dmu] = R, all n_y right-hand sides at once
  Matrix schur = pre.kp1 + pre.kp2 / mode.rho;
  if (ni > 0) schur.diagonal().tail(ni) += (point.s.array() / point.mu.array()).matrix();
  Matrix dgm;
  try {
    dgm = EquilibratedSolver(schur, FactorKind::Cholesky).solve(pre.R);
  } catch (const DefinitenessError& e) {
    std::ostringstream os;
    os << "hessian_al: schur system not positive definite (" << e.what() << ")";
    throw NumericalError(os.str());
  }

  // back-substitute dx = Hxx^-1 (-Hxy - K_x^T [dgamma; dmu]); the z block is
  // not needed: by the z-row of the system, rho I - rho dz equals
  // Ay^T dgamma + By^T dmu, so the Hessian assembles without the rho-scale
  // cancellation that would otherwise wreck accuracy at large rho.
  Matrix tx = -block.Hxy;
  Matrix h = block.Hyy;
  if (ne > 0) {
    tx -= block.Ax.transpose() * dgm.topRows(ne);
    h += block.Ay.transpose() * dgm.topRows(ne);
  }
  if (ni > 0) {
    tx -= block.Bx.transpose() * dgm.bottomRows(ni);
    h += block.By.transpose() * dgm.bottomRows(ni);
  }
  const Matrix dx = nx > 0 ? Matrix(pre.hxx->solve(tx)) : Matrix(0, ny);
  h += block.Hxy.transpose() * dx;
  return 0.5 * (h + h.transpose());
}

Matrix hessian_al_direct(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                         double delta, const AlMode& mode, double stale_tol) {
  require_tight(residual_norm(al_kkt_residual(block, point, y, delta, mode)), stale_tol,
                "hessian_al");
  const Eigen::Index nx = block.nx(), ny = block.ny(), ne = block.ne(), ni = block.ni();
  const Eigen::Index m = nx + ny + ni + ne + ni;
  const Matrix j = al_kkt_jacobian(block, point, mode.rho);
  Matrix rhs = Matrix::Zero(m, ny);
  rhs.topRows(nx) = -block.Hxy;
  rhs.middleRows(nx, ny) = mode.rho * Matrix::Identity(ny, ny);
  const Matrix dq = EquilibratedSolver(j, FactorKind::SymmetricIndefinite).solve(rhs);
  // rho I - rho dz rewritten through the z-row of the system (see the reduced
  // path); dual sensitivities live at curvature scale, not rho scale
  Matrix h = block.Hyy + block.Hxy.transpose() * dq.topRows(nx);
  if (ne > 0) h += block.Ay.transpose() * dq.middleRows(nx + ny + ni, ne);
  if (ni > 0) h += block.By.transpose() * dq.middleRows(nx + ny + ni + ne, ni);
  return 0.5 * (h + h.transpose());
}

L1Hessian hessian_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                     double delta, const L1Mode& mode, double stale_tol) {
  require_tight(residual_norm(l1_kkt_residual(block, point, y, delta, mode)), stale_tol,
                "hessian_l1");
  const Eigen::Index ny = block.ny();
  const Matrix j = l1_reduced_kkt_matrix(block, point, mode.lambda_bar);
  // grad_y of the KKT map hits only the elastic rows, with identity sign;
  // after the slack elimination that right-hand side lands on the chi block
  Matrix rhs = Matrix::Zero(j.rows(), ny);
  rhs.bottomRows(ny) = -Matrix::Identity(ny, ny);
  const Matrix du = solve_symmetric_extended(j, rhs);
  Matrix h = du.bottomRows(ny);  // the chi rows
  L1Hessian out;
  out.hessian = 0.5 * (h + h.transpose());
  // interior chi always sits strictly inside (-lambda_bar, lambda_bar); flag
  // only a meaningful margin, not the vacuous strict inequality
  out.penalty_above_multipliers =
      point.chi.size() == 0 ||
      mode.lambda_bar - point.chi.cwiseAbs().maxCoeff() > 1e-8 * mode.lambda_bar;
  return out;
}

Sensitivity evaluate_al(const SubsystemBlock& block, const PrecomputedBlocks& pre,
                        const SubsystemPoint& point, const Vector& y, double delta,
                        const AlMode& mode, double stale_tol) {
  Sensitivity s;
  s.value = value_al(block, point, y, delta, mode);
  s.gradient = gradient_al(block, point, y, delta, mode, stale_tol);
  s.hessian = hessian_al(block, pre, point, y, delta, mode, stale_tol);
  return s;
}

Sensitivity evaluate_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                        double delta, const L1Mode& mode, double stale_tol) {
  Sensitivity s;
  s.value = value_l1(block, point, y, delta, mode);
  s.gradient = gradient_l1(block, point, y, delta, mode, stale_tol);
  s.hessian = hessian_l1(block, point, y, delta, mode, stale_tol).hessian;
  return s;
}

}  // namespace qpdec
