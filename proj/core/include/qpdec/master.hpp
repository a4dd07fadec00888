#pragma once

#include <functional>

#include "qpdec/model.hpp"
#include "qpdec/report.hpp"
#include "qpdec/sensitivity.hpp"

namespace qpdec {

struct LineSearchConfig {
  double sigma = 1e-4;      // Armijo constant, (0, 0.5]
  double zeta = 0.5;        // backtracking factor, (0, 1)
  double alpha_min = 1e-10;
  int max_backtracks = 40;
};

/// Master iterate plus the diagnostics of the step that produced it.
struct MasterState {
  Vector y;
  double merit = 0.0;
  double last_step_norm = 0.0;
  double last_alpha = 0.0;
};

/// Penalty configuration a master solve runs under (one outer iteration).
struct PenaltySetting {
  double delta = 0.1;
  double subsolve_tol = 1e-10;
  bool l1 = false;
  double rho = 1e3;                   // AL
  std::vector<Vector> lambda;         // AL, one per subsystem (empty -> zeros)
  double lambda_bar = 100.0;          // l1
};

struct ArmijoResult {
  double alpha = 1.0;
  Vector y_next;
  int evals = 0;  // merit evaluations performed (>= 1 unless dy = 0)
};

/// Backtracking line search: largest alpha in {1, zeta, zeta^2, ...} with
///   psi(y) - psi(y + alpha dy) >= -sigma alpha slope.
/// `slope` is grad psi^T dy (must be < 0 unless dy = 0).
ArmijoResult armijo_search(const Vector& y, const Vector& dy,
                           const std::function<double(const Vector&)>& merit_of, double merit_at_y,
                           double slope, const LineSearchConfig& config);

/// Feasible starting point for the coupling constraints: 0 when feasible,
/// otherwise the minimum-norm feasible point.
Vector feasible_start(const GlobalConstraints& global, Eigen::Index n_y);

/// Search direction from the coordination problem
///   min 1/2 dy^T Hsum dy + gsum^T dy  s.t. Aeq (y+dy) = beq, Bineq (y+dy) <= dineq.
Vector coordination_step(const Matrix& hessian_sum, const Vector& gradient_sum,
                         const GlobalConstraints& global, const Vector& y);

struct MasterSolveOutcome {
  std::vector<IterationRecord> records;  // one per SQP iteration
  bool step_converged = false;           // ||dy||_inf <= dy_tol at the last iteration
};

/// Runs the fan-out / coordinate / line-search loop on the relaxed value
/// functions at fixed penalties. Owns y and the per-subsystem warm starts so
/// consecutive calls (with updated penalties) reuse them.
class MasterCoordinator {
 public:
  struct Config {
    LineSearchConfig line_search;
    double dy_tol = 1e-8;
    int threads = 1;
    double stale_tol_floor = kDefaultStaleTol;
  };

  MasterCoordinator(const BlockQP& problem, Config config);

  const Vector& y() const { return state_.y; }
  void set_y(Vector y);
  const MasterState& state() const { return state_; }
  const std::vector<SubsystemPoint>& points() const { return points_; }
  std::vector<Vector> local_solutions() const;
  std::vector<Vector> coupling_copies() const;
  long long comm_floats() const { return comm_floats_; }
  TimingInfo& timing() { return timing_; }

  /// One SQP iteration; returns its record (comm_floats cumulated).
  IterationRecord iterate(const PenaltySetting& setting);

  /// True when the last iterate() certified stationarity: either ||dy||_inf
  /// fell below dy_tol or the predicted decrease sank to evaluation noise
  /// (inexact subsolves bound how small a merit difference is meaningful).
  bool last_step_stationary() const { return last_step_stationary_; }

  /// Iterates until ||dy||_inf <= dy_tol or max_iterations.
  MasterSolveOutcome solve(const PenaltySetting& setting, int max_iterations);

 private:
  SubsolveRequest make_request(const PenaltySetting& setting, size_t i, const Vector& y) const;
  double evaluate_merit(const PenaltySetting& setting, const Vector& y,
                        std::vector<SubsystemPoint>& points_out);

  const BlockQP& problem_;
  Config config_;
  std::vector<SubsystemSolver> solvers_;
  std::vector<SubsystemPoint> points_;
  std::vector<bool> has_point_;
  MasterState state_;
  bool last_step_stationary_ = false;
  long long comm_floats_ = 0;
  TimingInfo timing_;
};

}  // namespace qpdec
