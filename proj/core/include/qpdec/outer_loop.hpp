#pragma once

#include "qpdec/master.hpp"

namespace qpdec {

/// Barrier/penalty schedule state shared by both decomposition variants.
/// Phase 1 ramps (delta down, rho/lambda_bar up) for `phase_switch` outer
/// iterations; phase 2 freezes them (AL then runs multiplier updates).
struct PenaltyState {
  double delta = 0.1;
  double rho = 1e3;
  double lambda_bar = 100.0;
  std::vector<Vector> lambda;  // AL multipliers, one per subsystem
  int phase = 1;
  int outer_iter = 0;
  int phase_switch = 8;
};

PenaltyState initial_penalty_state(Eigen::Index subsystems, Eigen::Index n_y,
                                   int phase_switch = 8, double delta0 = 0.1, double rho0 = 1e3,
                                   double lambda_bar0 = 100.0);

/// Phase-1 update: delta *= 0.2, rho *= 3, lambda_bar *= 2; flips to phase 2
/// (and freezes) once outer_iter reaches phase_switch. Phase-1 only.
PenaltyState schedule_update(const PenaltyState& state);

/// First-order multiplier update lambda_i += rho (y - z_i). Phase-2 only.
void al_multiplier_update(PenaltyState& state, const Vector& y, const std::vector<Vector>& z_list);

/// Constraint-violation and cost metrics on the original problem.
struct Metrics {
  double eq_infeas = 0.0;    // max over stacked subsystem equality rows
  double ineq_infeas = 0.0;  // max positive part over subsystem + coupling rows
  double cost = 0.0;
};

Metrics termination_check(const BlockQP& problem, const Vector& y,
                          const std::vector<Vector>& x_list);

struct SolverConfig {
  int max_outer = 60;
  int phase1_master_iterations = 5;
  int phase2_master_iterations = 200;
  double dy_tol = 1e-8;
  double coupling_tol = 1e-6;
  int phase_switch = 8;
  int threads = 1;
  double delta0 = 0.1;
  double rho0 = 1e3;
  double lambda_bar0 = 100.0;
  LineSearchConfig line_search;
  std::optional<double> reference_objective;  // fills rel_gap when set
};

/// Two-phase augmented-Lagrangian primal decomposition.
SolveReport run_al(const BlockQP& problem, const SolverConfig& config = {});

/// l1 elastic-penalty primal decomposition (fixed lambda_bar after phase 1).
SolveReport run_l1(const BlockQP& problem, const SolverConfig& config = {});

}  // namespace qpdec
