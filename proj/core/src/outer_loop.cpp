#include "qpdec/outer_loop.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace qpdec {

namespace {

using Clock = std::chrono::steady_clock;

double coupling_gap(const Vector& y, const std::vector<Vector>& z_list) {
  double gap = 0.0;
  for (const auto& z : z_list) gap = std::max(gap, (y - z).cwiseAbs().maxCoeff());
  return gap;
}

std::optional<double> relative_gap(const std::optional<double>& reference, double cost) {
  if (!reference) return std::nullopt;
  const double denom = std::max(std::abs(*reference), 1e-12);
  return std::abs(cost - *reference) / denom;
}

struct OuterDriver {
  const BlockQP& problem;
  const SolverConfig& config;
  bool l1;

  SolveReport run() {
    const auto violations = validate(problem);
    if (!violations.empty()) {
      std::ostringstream os;
      os << "solver: invalid problem (" << violations.size() << " violations, first: "
         << violations.front().invariant << ")";
      throw ValidationError(os.str());
    }

    MasterCoordinator::Config mc;
    mc.line_search = config.line_search;
    mc.dy_tol = config.dy_tol;
    mc.threads = config.threads;
    MasterCoordinator master(problem, mc);
    PenaltyState state =
        initial_penalty_state(problem.num_subsystems(), problem.n_y, config.phase_switch,
                              config.delta0, config.rho0, config.lambda_bar0);

    SolveReport report;
    report.status = SolveStatus::IterationCap;
    const auto t0 = Clock::now();

    for (int outer = 0; outer < config.max_outer; ++outer) {
      PenaltySetting setting;
      setting.delta = state.delta;
      setting.l1 = l1;
      setting.rho = state.rho;
      setting.lambda = state.lambda;
      setting.lambda_bar = state.lambda_bar;
      setting.subsolve_tol = inexact_tolerance(state.delta, l1 ? state.lambda_bar : state.rho);

      MasterSolveOutcome outcome;
      try {
        outcome = master.solve(setting, state.phase == 1 ? config.phase1_master_iterations
                                                         : config.phase2_master_iterations);
      } catch (const Error& e) {
        std::ostringstream os;
        os << "outer iteration " << outer << " (phase " << state.phase << "): " << e.what();
        report.status = SolveStatus::ComponentFailure;
        report.message = os.str();
        break;
      }

      const std::vector<Vector> x_list = master.local_solutions();
      const std::vector<Vector> z_list = master.coupling_copies();
      const Metrics metrics = termination_check(problem, master.y(), x_list);

      IterationRecord rec;
      rec.iter = outer;
      rec.cost = metrics.cost;
      rec.eq_infeas = metrics.eq_infeas;
      rec.ineq_infeas = metrics.ineq_infeas;
      rec.rel_gap = relative_gap(config.reference_objective, metrics.cost);
      rec.comm_floats = master.comm_floats();
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      if (!outcome.records.empty()) {
        rec.alpha = outcome.records.back().alpha;
        rec.step_norm = outcome.records.back().step_norm;
        for (const auto& r : outcome.records) {
          rec.line_search_evals += r.line_search_evals;
          rec.sqp_iters += r.sqp_iters;
        }
      }
      report.iterations.push_back(rec);

      const double gap = coupling_gap(master.y(), z_list);
      if (state.phase == 2 && outcome.step_converged && gap <= config.coupling_tol) {
        report.status = SolveStatus::Converged;
        break;
      }
      if (l1 && state.phase == 2 && outcome.step_converged && gap > config.coupling_tol) {
        // frozen penalty cannot close the remaining consensus gap
        report.status = SolveStatus::PenaltyTooSmall;
        std::ostringstream os;
        os << "coupling gap " << gap << " stuck above " << config.coupling_tol
           << " with lambda_bar = " << state.lambda_bar;
        report.message = os.str();
        break;
      }

      if (state.phase == 1) {
        state = schedule_update(state);
      } else if (!l1) {
        al_multiplier_update(state, master.y(), z_list);
      }
    }

    report.y = master.y();
    report.x = master.local_solutions();
    report.z = master.coupling_copies();
    report.comm_floats_total = master.comm_floats();
    report.timing = master.timing();
    report.timing.total_wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    bool points_valid = report.x.size() == problem.subsystems.size();
    for (size_t i = 0; points_valid && i < report.x.size(); ++i) {
      points_valid = report.x[i].size() == problem.subsystems[i].nx();
    }
    if (points_valid) {
      const Metrics final_metrics = termination_check(problem, report.y, report.x);
      report.objective = final_metrics.cost;
      report.eq_infeas = final_metrics.eq_infeas;
      report.ineq_infeas = final_metrics.ineq_infeas;
    }
    return report;
  }
};

}  // namespace

PenaltyState initial_penalty_state(Eigen::Index subsystems, Eigen::Index n_y, int phase_switch,
                                   double delta0, double rho0, double lambda_bar0) {
  PenaltyState s;
  s.delta = delta0;
  s.rho = rho0;
  s.lambda_bar = lambda_bar0;
  s.lambda.assign(size_t(subsystems), Vector::Zero(n_y));
  s.phase_switch = phase_switch;
  return s;
}

PenaltyState schedule_update(const PenaltyState& state) {
  if (state.phase != 1) throw ValidationError("schedule_update: only defined in phase 1");
  PenaltyState next = state;
  next.outer_iter = state.outer_iter + 1;
  next.delta = 0.2 * state.delta;
  next.rho = 3.0 * state.rho;
  next.lambda_bar = 2.0 * state.lambda_bar;
  if (next.outer_iter >= state.phase_switch) next.phase = 2;
  return next;
}

void al_multiplier_update(PenaltyState& state, const Vector& y,
                          const std::vector<Vector>& z_list) {
  if (state.phase != 2) throw ValidationError("al_multiplier_update: only defined in phase 2");
  if (z_list.size() != state.lambda.size()) {
    throw DimensionError("al_multiplier_update: z_list size mismatch");
  }
  for (size_t i = 0; i < z_list.size(); ++i) {
    state.lambda[i] += state.rho * (y - z_list[i]);
  }
  state.outer_iter += 1;
}

Metrics termination_check(const BlockQP& problem, const Vector& y,
                          const std::vector<Vector>& x_list) {
  Metrics m;
  if (x_list.size() != problem.subsystems.size()) {
    throw DimensionError("termination_check: x_list size mismatch");
  }
  for (size_t i = 0; i < problem.subsystems.size(); ++i) {
    const auto& s = problem.subsystems[i];
    const Vector& x = x_list[i];
    if (s.ne() > 0) {
      const Vector r = s.Ax * x + s.Ay * y - s.b;
      m.eq_infeas = std::max(m.eq_infeas, r.cwiseAbs().maxCoeff());
    }
    if (s.ni() > 0) {
      const Vector r = s.Bx * x + s.By * y - s.d;
      m.ineq_infeas = std::max(m.ineq_infeas, r.maxCoeff());
    }
    m.cost += 0.5 * x.dot(s.Hxx * x) + x.dot(s.Hxy * y) + 0.5 * y.dot(s.Hyy * y) +
              s.hx.dot(x) + s.hy.dot(y);
  }
  if (problem.global.ni() > 0) {
    const Vector r = problem.global.Bineq * y - problem.global.dineq;
    m.ineq_infeas = std::max(m.ineq_infeas, r.maxCoeff());
  }
  m.ineq_infeas = std::max(m.ineq_infeas, 0.0);
  return m;
}

SolveReport run_al(const BlockQP& problem, const SolverConfig& config) {
  OuterDriver driver{problem, config, false};
  return driver.run();
}

SolveReport run_l1(const BlockQP& problem, const SolverConfig& config) {
  OuterDriver driver{problem, config, true};
  return driver.run();
}

}  // namespace qpdec
