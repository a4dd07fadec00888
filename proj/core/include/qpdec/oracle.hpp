#pragma once

#include "qpdec/model.hpp"
#include "qpdec/qp_solver.hpp"

namespace qpdec {

struct OracleSolution {
  Vector x_full;
  Vector eq_duals;
  Vector ineq_duals;
  double objective = 0.0;
  std::vector<Eigen::Index> active_set;  // indices of tight inequality rows
  double kkt_residual = 0.0;
  double complementarity = 0.0;
  bool cross_validated = false;  // active-set enumeration ran and agreed
};

/// Ground-truth solve of the stacked QP at tight tolerance (1e-10); instances
/// with at most 12 inequality rows are additionally cross-checked against
/// exhaustive active-set enumeration.
OracleSolution solve_monolithic(const MonolithicQP& qp);

struct FeasibilityReport {
  bool feasible = false;
  double violation = 0.0;  // max row violation at the witness
  Vector witness;
};

/// Elastic phase-1 solve minimizing the total constraint violation; feasible
/// iff the witness violates no row by more than 1e-9.
FeasibilityReport feasibility_check(const MonolithicQP& qp);

}  // namespace qpdec
