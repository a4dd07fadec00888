#pragma once

#include "qpdec/model.hpp"
#include "qpdec/outer_loop.hpp"
#include "qpdec/report.hpp"

namespace qpdec {

/// Consensus-ADMM iterate: local blocks, coupling copies, coupling iterate,
/// and per-subsystem multipliers.
struct AdmmState {
  std::vector<Vector> x_list;
  std::vector<Vector> z_list;
  Vector y;
  std::vector<Vector> lambda_list;
  double rho = 0.0;
  int iter = 0;
};

/// Minimizes the augmented Lagrangian over one subsystem's (x, z) at fixed
/// (y, lambda): a QP with Hessian [Hxx Hxy; Hxy^T Hyy + rho I] and linear term
/// [hx; hy - lambda - rho y] under the block's own constraint rows.
std::pair<Vector, Vector> admm_local_step(const SubsystemBlock& block, const Vector& y,
                                          const Vector& lambda, double rho, double tol = 1e-8);

/// Minimizes over y: sum_i rho/2 y^T y + (lambda_i - rho z_i)^T y under the
/// coupling constraints.
Vector admm_global_step(const std::vector<Vector>& z_list, const std::vector<Vector>& lambda_list,
                        double rho, const GlobalConstraints& global, Eigen::Index n_y,
                        double tol = 1e-10);

/// lambda_i += rho (y - z_i) for every subsystem.
void admm_multiplier_step(AdmmState& state);

struct AdmmConfig {
  int max_iterations = 100;
  int threads = 1;
  std::optional<double> reference_objective;
};

/// Plain consensus ADMM (no over-relaxation, no rho adaptation), run for a
/// fixed iteration budget; metrics recorded every iteration.
SolveReport run_admm(const BlockQP& problem, double rho, const AdmmConfig& config = {});

}  // namespace qpdec
