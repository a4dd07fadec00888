#include "qpdec/admm.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "qpdec/parallel.hpp"
#include "qpdec/qp_solver.hpp"

namespace qpdec {

namespace {
using Clock = std::chrono::steady_clock;
}

std::pair<Vector, Vector> admm_local_step(const SubsystemBlock& block, const Vector& y,
                                          const Vector& lambda, double rho, double tol) {
  const Eigen::Index nx = block.nx(), ny = block.ny();
  DenseQP qp;
  qp.H = Matrix::Zero(nx + ny, nx + ny);
  qp.H.topLeftCorner(nx, nx) = block.Hxx;
  qp.H.topRightCorner(nx, ny) = block.Hxy;
  qp.H.bottomLeftCorner(ny, nx) = block.Hxy.transpose();
  qp.H.bottomRightCorner(ny, ny) = block.Hyy + rho * Matrix::Identity(ny, ny);
  qp.h = Vector(nx + ny);
  qp.h.head(nx) = block.hx;
  qp.h.tail(ny) = block.hy - lambda - rho * y;
  qp.Aeq = Matrix(block.ne(), nx + ny);
  if (block.ne() > 0) qp.Aeq << block.Ax, block.Ay;
  qp.beq = block.b;
  qp.Bineq = Matrix(block.ni(), nx + ny);
  if (block.ni() > 0) qp.Bineq << block.Bx, block.By;
  qp.dineq = block.d;
  QpSettings settings;
  settings.tol = tol;
  const QpSolution sol = solve_dense_qp(qp, settings);
  return {sol.x.head(nx), sol.x.tail(ny)};
}

Vector admm_global_step(const std::vector<Vector>& z_list, const std::vector<Vector>& lambda_list,
                        double rho, const GlobalConstraints& global, Eigen::Index n_y,
                        double tol) {
  if (z_list.size() != lambda_list.size()) {
    throw DimensionError("admm_global_step: z/lambda list size mismatch");
  }
  DenseQP qp;
  qp.H = double(z_list.size()) * rho * Matrix::Identity(n_y, n_y);
  qp.h = Vector::Zero(n_y);
  for (size_t i = 0; i < z_list.size(); ++i) qp.h += lambda_list[i] - rho * z_list[i];
  qp.Aeq = global.Aeq;
  qp.beq = global.beq;
  qp.Bineq = global.Bineq;
  qp.dineq = global.dineq;
  QpSettings settings;
  settings.tol = tol;
  return solve_dense_qp(qp, settings).x;
}

void admm_multiplier_step(AdmmState& state) {
  for (size_t i = 0; i < state.z_list.size(); ++i) {
    state.lambda_list[i] += state.rho * (state.y - state.z_list[i]);
  }
  state.iter += 1;
}

SolveReport run_admm(const BlockQP& problem, double rho, const AdmmConfig& config) {
  if (!(rho > 0.0)) throw ValidationError("run_admm: rho must be positive");
  const auto violations = validate(problem);
  if (!violations.empty()) {
    throw ValidationError("run_admm: invalid problem: " + violations.front().invariant);
  }

  const size_t s_count = problem.subsystems.size();
  AdmmState state;
  state.rho = rho;
  state.y = feasible_start(problem.global, problem.n_y);
  state.x_list.resize(s_count);
  state.z_list.resize(s_count);
  state.lambda_list.assign(s_count, Vector::Zero(problem.n_y));

  SolveReport report;
  const auto t0 = Clock::now();
  long long comm = 0;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Vector y_prev = state.y;
    parallel_for(s_count, config.threads, [&](size_t i) {
      auto [x, z] = admm_local_step(problem.subsystems[i], state.y, state.lambda_list[i], rho);
      state.x_list[i] = std::move(x);
      state.z_list[i] = std::move(z);
    });
    state.y = admm_global_step(state.z_list, state.lambda_list, rho, problem.global, problem.n_y);
    admm_multiplier_step(state);
    comm += (long long)s_count * 2 * problem.n_y;  // z up, y down; multipliers stay local

    const Metrics metrics = termination_check(problem, state.y, state.x_list);
    IterationRecord rec;
    rec.iter = iter;
    rec.cost = metrics.cost;
    rec.eq_infeas = metrics.eq_infeas;
    rec.ineq_infeas = metrics.ineq_infeas;
    if (config.reference_objective) {
      const double denom = std::max(std::abs(*config.reference_objective), 1e-12);
      rec.rel_gap = std::abs(metrics.cost - *config.reference_objective) / denom;
    }
    rec.alpha = 1.0;
    rec.step_norm = (state.y - y_prev).cwiseAbs().maxCoeff();
    rec.comm_floats = comm;
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    report.iterations.push_back(rec);
  }

  report.y = state.y;
  report.x = state.x_list;
  report.z = state.z_list;
  report.status = SolveStatus::IterationCap;  // fixed-budget method
  report.comm_floats_total = comm;
  report.timing.total_wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  const Metrics final_metrics = termination_check(problem, report.y, report.x);
  report.objective = final_metrics.cost;
  report.eq_infeas = final_metrics.eq_infeas;
  report.ineq_infeas = final_metrics.ineq_infeas;
  return report;
}

}  // namespace qpdec
