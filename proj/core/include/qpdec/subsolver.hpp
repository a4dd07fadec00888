#pragma once

#include <functional>
#include <optional>
#include <variant>

#include "qpdec/model.hpp"

namespace qpdec {

/// Primal-dual state of one subsystem's relaxed barrier subproblem.
/// s and mu stay strictly positive at all times; v, w, chi are used by the
/// elastic-l1 relaxation only (empty in augmented-Lagrangian mode).
struct SubsystemPoint {
  Vector x;      // local variables
  Vector z;      // local copy of the coupling variables
  Vector s;      // inequality slacks, > 0
  Vector v, w;   // elastic slacks (l1 mode), > 0
  Vector gamma;  // equality multipliers
  Vector mu;     // inequality multipliers, > 0
  Vector chi;    // elastic-row multipliers (l1 mode)
};

/// Consensus relaxed by multiplier + quadratic penalty: rho/2 ||y - z||^2 + lambda^T (y - z).
struct AlMode {
  double rho = 0.0;
  Vector lambda;
};

/// Consensus relaxed by penalized elastic slacks: y - z = v - w, cost lambda_bar 1^T (v + w).
struct L1Mode {
  double lambda_bar = 0.0;
};

struct SubsolveRequest {
  Vector y;
  double delta = 0.0;  // barrier parameter, fixed for the whole subsolve
  std::variant<AlMode, L1Mode> mode;
  std::optional<SubsystemPoint> warm_start;
  double tol = 1e-10;  // target ||T||_inf
  int max_newton = 200;
  /// Test hook: invoked on every accepted iterate (including the start point).
  std::function<void(const SubsystemPoint&)> on_iterate;
};

struct SubsolveResult {
  SubsystemPoint point;
  double kkt_residual = 0.0;
  int newton_iters = 0;
  bool reused_warm_start = false;
  /// Set when the iteration stalled at its numerical floor above the request
  /// tolerance (within 10x, and below 1e-4) and returned its best point instead of failing;
  /// kkt_residual then reports the achieved value, not the requested one.
  bool hit_numerical_floor = false;
};

/// Subsolve tolerance rule for inexact outer iterations: min(delta, 1/penalty).
inline double inexact_tolerance(double delta, double penalty) {
  return std::min(delta, 1.0 / penalty);
}

/// Constraint-side blocks shared by the Newton solver and the Hessian
/// backsolves. K stacks [Ax Ay; Bx By] over (x, z); R is the penalty-free part
/// of the reduced right-hand side; kp1/kp2 split K P^-1 K^T into its
/// Hxx^-1 part and its 1/rho part.
struct PrecomputedBlocks {
  Matrix K;
  Matrix R;            // [-Ax Hxx^-1 Hxy + Ay; -Bx Hxx^-1 Hxy + By]
  Matrix hxx_inv_hxy;  // Hxx^-1 Hxy
  Matrix kp1;          // [Ax;Bx] Hxx^-1 [Ax;Bx]^T
  Matrix kp2;          // [Ay;By] [Ay;By]^T
  std::optional<Factorization> hxx;
  bool hxx_invertible = false;
};

/// Full KKT residual of the AL-relaxed subproblem at (point, y); row order
/// (x-stationarity, z-stationarity, slack centering, equality, inequality).
Vector al_kkt_residual(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                       double delta, const AlMode& mode);

/// Full KKT residual of the l1-relaxed subproblem; row order
/// (x, z, s, v, w, equality, inequality, elastic).
Vector l1_kkt_residual(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                       double delta, const L1Mode& mode);

Vector kkt_residual(const SubsystemBlock& block, const SubsystemPoint& point,
                    const SubsolveRequest& request);

/// Jacobian of the AL KKT map in the unknowns (x, z, s, gamma, mu); symmetric.
Matrix al_kkt_jacobian(const SubsystemBlock& block, const SubsystemPoint& point, double rho);

/// Jacobian of the l1 KKT map in (x, z, s, v, w, gamma, mu, chi); symmetric.
Matrix l1_kkt_jacobian(const SubsystemBlock& block, const SubsystemPoint& point,
                       double lambda_bar);

/// The same system after exact elimination of the diagonal s/v/w rows:
/// unknowns (x, z, gamma, mu, chi). Entries stay within a few orders of
/// magnitude of the data, unlike the unreduced form whose barrier diagonals
/// blow up as delta shrinks.
Matrix l1_reduced_kkt_matrix(const SubsystemBlock& block, const SubsystemPoint& point,
                             double lambda_bar);

/// Damped-Newton interior-point solver for one subsystem at fixed
/// (y, delta, penalties). Instances hold per-subsystem precomputation and may
/// be used concurrently from different threads (const calls only).
class SubsystemSolver {
 public:
  explicit SubsystemSolver(const SubsystemBlock& block);

  const SubsystemBlock& block() const { return block_; }
  const PrecomputedBlocks& precomputed() const { return pre_; }

  /// True when Hxx was not factorizable and Newton steps fall back to the
  /// direct full-KKT solve.
  bool uses_direct_fallback() const { return !pre_.hxx_invertible; }

  SubsolveResult solve(const SubsolveRequest& request) const;

  SubsystemPoint cold_start(const SubsolveRequest& request) const;

  /// One AL Newton direction via the reduced positive definite system in the
  /// constraint multipliers; equals the direct solve whenever Hxx is invertible.
  SubsystemPoint newton_step_schur(const SubsystemPoint& point, const Vector& y, double delta,
                                   const AlMode& mode) const;
  /// Same direction from an LDL^T factorization of the unreduced KKT matrix.
  SubsystemPoint newton_step_direct(const SubsystemPoint& point, const Vector& y, double delta,
                                    const AlMode& mode) const;

  /// l1 Newton direction from the reduced (x, z, gamma, mu, chi) system.
  SubsystemPoint newton_step_l1(const SubsystemPoint& point, const Vector& y, double delta,
                                const L1Mode& mode) const;

 private:
  SubsolveResult run_newton(const SubsolveRequest& request, SubsystemPoint point,
                            bool warm) const;

  SubsystemBlock block_;
  PrecomputedBlocks pre_;
};

}  // namespace qpdec
