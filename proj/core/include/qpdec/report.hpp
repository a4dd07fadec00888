#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qpdec/linalg.hpp"

namespace qpdec {

/// Per-iteration metrics logged by every solve pipeline.
struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double eq_infeas = 0.0;
  double ineq_infeas = 0.0;
  std::optional<double> rel_gap;    // only when a reference objective is known
  double alpha = 0.0;               // accepted step size (1 for ADMM/oracle rows)
  double step_norm = 0.0;           // ||dy||_inf of the last step
  long long comm_floats = 0;        // cumulative floats communicated
  double wall_ms = 0.0;             // cumulative wall time
  int line_search_evals = 0;        // merit evaluations this iteration
  int sqp_iters = 0;                // master iterations folded into this record
};

enum class SolveStatus { Converged, IterationCap, PenaltyTooSmall, ComponentFailure };

const char* to_string(SolveStatus status);

/// Accumulated wall time per pipeline stage, milliseconds.
struct TimingInfo {
  double sensitivity_ms = 0.0;
  double local_solve_ms = 0.0;
  double coordination_ms = 0.0;
  double line_search_ms = 0.0;
  double total_wall_ms = 0.0;
};

/// Percentage breakdown; the five categories sum to 100.
struct TimingBreakdown {
  double sensitivity_pct = 0.0;
  double local_solve_pct = 0.0;
  double coordination_pct = 0.0;
  double line_search_pct = 0.0;
  double other_pct = 0.0;
};

TimingBreakdown timing_breakdown(const TimingInfo& timing);

struct SolveReport {
  Vector y;
  std::vector<Vector> x;  // per-subsystem locals
  std::vector<Vector> z;  // per-subsystem coupling copies
  std::vector<IterationRecord> iterations;
  SolveStatus status = SolveStatus::IterationCap;
  std::string message;
  TimingInfo timing;
  long long comm_floats_total = 0;
  double objective = 0.0;
  double eq_infeas = 0.0;
  double ineq_infeas = 0.0;
};

}  // namespace qpdec
