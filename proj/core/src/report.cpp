#include "qpdec/report.hpp"

#include <algorithm>

namespace qpdec {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationCap: return "iteration-cap";
    case SolveStatus::PenaltyTooSmall: return "penalty-too-small";
    case SolveStatus::ComponentFailure: return "component-failure";
  }
  return "unknown";
}

TimingBreakdown timing_breakdown(const TimingInfo& timing) {
  TimingBreakdown out;
  const double cats = timing.sensitivity_ms + timing.local_solve_ms + timing.coordination_ms +
                      timing.line_search_ms;
  const double other = std::max(0.0, timing.total_wall_ms - cats);
  const double total = cats + other;
  if (total <= 0.0) {
    out.other_pct = 100.0;
    return out;
  }
  out.sensitivity_pct = 100.0 * timing.sensitivity_ms / total;
  out.local_solve_pct = 100.0 * timing.local_solve_ms / total;
  out.coordination_pct = 100.0 * timing.coordination_ms / total;
  out.line_search_pct = 100.0 * timing.line_search_ms / total;
  out.other_pct = 100.0 * other / total;
  return out;
}

}  // namespace qpdec
