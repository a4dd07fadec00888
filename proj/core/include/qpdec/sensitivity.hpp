#pragma once

#include "qpdec/subsolver.hpp"

namespace qpdec {

/// Value, gradient and Hessian of one subsystem's smoothed value function.
struct Sensitivity {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

constexpr double kDefaultStaleTol = 1e-8;

/// Objective of the AL-relaxed subproblem at the point, barrier terms included.
double value_al(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                double delta, const AlMode& mode);

/// Objective of the l1-relaxed subproblem, barrier and elastic penalty included.
double value_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                double delta, const L1Mode& mode);

/// d/dy of the AL value function:
///   (Hyy + rho I) y + Hxy^T x* + hy + lambda - rho z*.
/// Throws StalePointError when ||T||_inf at the point exceeds stale_tol.
Vector gradient_al(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                   double delta, const AlMode& mode, double stale_tol = kDefaultStaleTol);

/// d/dy of the l1 value function: the elastic-row multiplier chi.
Vector gradient_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                   double delta, const L1Mode& mode, double stale_tol = kDefaultStaleTol);

/// Second derivative of the AL value function through the implicit-function
/// system, reduced to the constraint multipliers via the Schur complement
/// of blkdiag(Hxx, rho I). Falls back to the unreduced solve when Hxx is not
/// factorizable. Output symmetrized.
Matrix hessian_al(const SubsystemBlock& block, const PrecomputedBlocks& pre,
                  const SubsystemPoint& point, const Vector& y, double delta, const AlMode& mode,
                  double stale_tol = kDefaultStaleTol);

/// Same quantity from an LDL^T solve of the unreduced KKT Jacobian (test oracle
/// and Hxx-singular fallback).
Matrix hessian_al_direct(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                         double delta, const AlMode& mode, double stale_tol = kDefaultStaleTol);

struct L1Hessian {
  Matrix hessian;
  /// Lemma-level positive definiteness needs lambda_bar > max_j |chi_j|; when
  /// this is false the Hessian is still returned best-effort.
  bool penalty_above_multipliers = true;
};

/// d(chi*)/dy extracted from the l1 KKT Jacobian system. Output symmetrized.
L1Hessian hessian_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                     double delta, const L1Mode& mode, double stale_tol = kDefaultStaleTol);

/// Bundled solve for the master loop: value + gradient + Hessian in one call.
Sensitivity evaluate_al(const SubsystemBlock& block, const PrecomputedBlocks& pre,
                        const SubsystemPoint& point, const Vector& y, double delta,
                        const AlMode& mode, double stale_tol = kDefaultStaleTol);
Sensitivity evaluate_l1(const SubsystemBlock& block, const SubsystemPoint& point, const Vector& y,
                        double delta, const L1Mode& mode, double stale_tol = kDefaultStaleTol);

}  // namespace qpdec
