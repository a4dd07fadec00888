#include "qpdec/master.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "qpdec/parallel.hpp"
#include "qpdec/qp_solver.hpp"

namespace qpdec {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

ArmijoResult armijo_search(const Vector& y, const Vector& dy,
                           const std::function<double(const Vector&)>& merit_of, double merit_at_y,
                           double slope, const LineSearchConfig& config) {
  ArmijoResult out;
  if (dy.size() == 0 || dy.cwiseAbs().maxCoeff() == 0.0) {
    out.alpha = 1.0;
    out.y_next = y;
    out.evals = 0;
    return out;
  }
  if (!(slope < 0.0)) {
    std::ostringstream os;
    os << "armijo_search: not a descent direction (slope = " << slope << ")";
    throw NumericalError(os.str());
  }
  double alpha = 1.0;
  std::vector<double> trial_merits;
  while (alpha >= config.alpha_min && int(trial_merits.size()) <= config.max_backtracks) {
    const Vector trial = y + alpha * dy;
    const double merit_trial = merit_of(trial);
    trial_merits.push_back(merit_trial);
    if (merit_at_y - merit_trial >= -config.sigma * alpha * slope) {
      out.alpha = alpha;
      out.y_next = trial;
      out.evals = int(trial_merits.size());
      return out;
    }
    alpha *= config.zeta;
  }
  throw LineSearchError("armijo_search: backtracking budget exhausted", trial_merits);
}

Vector feasible_start(const GlobalConstraints& global, Eigen::Index n_y) {
  const Vector zero = Vector::Zero(n_y);
  const bool eq_ok = global.ne() == 0 || (global.Aeq * zero - global.beq).cwiseAbs().maxCoeff() <= 1e-12;
  const bool ineq_ok =
      global.ni() == 0 || (global.Bineq * zero - global.dineq).maxCoeff() <= 1e-12;
  if (eq_ok && ineq_ok) return zero;
  DenseQP qp;
  qp.H = Matrix::Identity(n_y, n_y);
  qp.h = Vector::Zero(n_y);
  qp.Aeq = global.Aeq;
  qp.beq = global.beq;
  qp.Bineq = global.Bineq;
  qp.dineq = global.dineq;
  try {
    return solve_dense_qp(qp).x;
  } catch (const ConvergenceError&) {
    throw InfeasibleError("feasible_start: coupling constraints appear infeasible");
  }
}

Vector coordination_step(const Matrix& hessian_sum, const Vector& gradient_sum,
                         const GlobalConstraints& global, const Vector& y) {
  Matrix h = 0.5 * (hessian_sum + hessian_sum.transpose());
  try {
    factorize(h, FactorKind::Cholesky);
  } catch (const DefinitenessError& e) {
    // communicated Hessians carry subsolve noise; repair round-off level
    // indefiniteness, reject anything structural
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    const double min_eig = eig.eigenvalues().minCoeff();
    const double scale = std::max(1.0, inf_norm(h));
    if (min_eig < -1e-8 * scale) {
      std::ostringstream os;
      os << "coordination_step: summed Hessian not positive definite (" << e.what() << ")";
      throw DefinitenessError(os.str(), e.pivot);
    }
    h.diagonal().array() += std::abs(min_eig) + 1e-12 * scale;
  }
  DenseQP qp;
  qp.H = h;
  qp.h = gradient_sum;
  qp.Aeq = global.Aeq;
  qp.beq = global.ne() > 0 ? Vector(global.beq - global.Aeq * y) : Vector(0);
  qp.Bineq = global.Bineq;
  qp.dineq = global.ni() > 0 ? Vector(global.dineq - global.Bineq * y) : Vector(0);
  QpSettings settings;
  settings.tol = 1e-10;
  settings.relative_termination = true;  // flat value functions inflate |dy|
  return solve_dense_qp(qp, settings).x;
}

MasterCoordinator::MasterCoordinator(const BlockQP& problem, Config config)
    : problem_(problem), config_(config) {
  solvers_.reserve(problem.subsystems.size());
  for (const auto& s : problem.subsystems) solvers_.emplace_back(s);
  points_.resize(problem.subsystems.size());
  has_point_.assign(problem.subsystems.size(), false);
  state_.y = feasible_start(problem.global, problem.n_y);
}

void MasterCoordinator::set_y(Vector y) {
  state_.y = std::move(y);
  has_point_.assign(problem_.subsystems.size(), false);
}

std::vector<Vector> MasterCoordinator::local_solutions() const {
  std::vector<Vector> out;
  for (const auto& p : points_) out.push_back(p.x);
  return out;
}

std::vector<Vector> MasterCoordinator::coupling_copies() const {
  std::vector<Vector> out;
  for (const auto& p : points_) out.push_back(p.z);
  return out;
}

SubsolveRequest MasterCoordinator::make_request(const PenaltySetting& setting, size_t i,
                                                const Vector& y) const {
  SubsolveRequest req;
  req.y = y;
  req.delta = setting.delta;
  req.tol = setting.subsolve_tol;
  if (setting.l1) {
    req.mode = L1Mode{setting.lambda_bar};
  } else {
    AlMode mode;
    mode.rho = setting.rho;
    mode.lambda = i < setting.lambda.size() ? setting.lambda[i] : Vector(Vector::Zero(problem_.n_y));
    req.mode = mode;
  }
  if (has_point_[i]) req.warm_start = points_[i];
  return req;
}

double MasterCoordinator::evaluate_merit(const PenaltySetting& setting, const Vector& y,
                                         std::vector<SubsystemPoint>& points_out) {
  const size_t s_count = solvers_.size();
  points_out.resize(s_count);
  std::vector<double> values(s_count, 0.0);
  parallel_for(s_count, config_.threads, [&](size_t i) {
    SubsolveRequest req = make_request(setting, i, y);
    SubsolveResult res = solvers_[i].solve(req);
    if (setting.l1) {
      values[i] = value_l1(solvers_[i].block(), res.point, y, setting.delta,
                           std::get<L1Mode>(req.mode));
    } else {
      values[i] =
          value_al(solvers_[i].block(), res.point, y, setting.delta, std::get<AlMode>(req.mode));
    }
    points_out[i] = std::move(res.point);
  });
  double merit = 0.0;
  for (double v : values) merit += v;  // serial reduction keeps runs bit-reproducible
  return merit;
}

IterationRecord MasterCoordinator::iterate(const PenaltySetting& setting) {
  const auto t_iter = Clock::now();
  const size_t s_count = solvers_.size();
  const Eigen::Index ny = problem_.n_y;
  const double stale_tol = std::max(config_.stale_tol_floor, setting.subsolve_tol);

  std::vector<Sensitivity> sens(s_count);
  std::vector<double> solve_ms(s_count, 0.0), sens_ms(s_count, 0.0);
  const auto t_fanout = Clock::now();
  parallel_for(s_count, config_.threads, [&](size_t i) {
    const auto t0 = Clock::now();
    SubsolveRequest req = make_request(setting, i, state_.y);
    SubsolveResult res = solvers_[i].solve(req);
    points_[i] = std::move(res.point);
    has_point_[i] = true;
    solve_ms[i] = ms_since(t0);
    const auto t1 = Clock::now();
    // a floored subsolve is as tight as this subsystem gets; accept its point
    const double tol_i =
        res.hit_numerical_floor ? std::max(stale_tol, 1.01 * res.kkt_residual) : stale_tol;
    if (setting.l1) {
      sens[i] = evaluate_l1(solvers_[i].block(), points_[i], state_.y, setting.delta,
                            std::get<L1Mode>(req.mode), tol_i);
    } else {
      sens[i] = evaluate_al(solvers_[i].block(), solvers_[i].precomputed(), points_[i], state_.y,
                            setting.delta, std::get<AlMode>(req.mode), tol_i);
    }
    sens_ms[i] = ms_since(t1);
  });
  for (size_t i = 0; i < s_count; ++i) {
    timing_.local_solve_ms += solve_ms[i];
    timing_.sensitivity_ms += sens_ms[i];
  }

  double merit = 0.0;
  Vector gradient_sum = Vector::Zero(ny);
  Matrix hessian_sum = Matrix::Zero(ny, ny);
  for (const auto& s : sens) {
    merit += s.value;
    gradient_sum += s.gradient;
    hessian_sum += s.hessian;
  }
  state_.merit = merit;

  const auto t_coord = Clock::now();
  const Vector dy = coordination_step(hessian_sum, gradient_sum, problem_.global, state_.y);
  timing_.coordination_ms += ms_since(t_coord);
  comm_floats_ += (long long)(s_count) * (long long)(ny + ny * ny);

  IterationRecord record;
  record.step_norm = dy.size() ? dy.cwiseAbs().maxCoeff() : 0.0;
  record.sqp_iters = 1;
  last_step_stationary_ = record.step_norm <= config_.dy_tol;

  const double slope = record.step_norm > 0.0 ? gradient_sum.dot(dy) : 0.0;
  // a predicted decrease below the merit's evaluation noise cannot be
  // certified by the line search; the iterate is stationary to working
  // precision
  if (!last_step_stationary_ && slope >= -1e-13 * (1.0 + std::abs(merit))) {
    last_step_stationary_ = true;
  }

  if (last_step_stationary_) {
    state_.last_step_norm = record.step_norm;
    state_.last_alpha = 1.0;
    record.alpha = 1.0;
    record.comm_floats = comm_floats_;
    record.wall_ms = ms_since(t_iter);
    timing_.total_wall_ms += record.wall_ms;
    return record;
  }
  const auto t_ls = Clock::now();
  std::vector<SubsystemPoint> trial_points;
  double trial_merit = merit;
  ArmijoResult ls;
  try {
    ls = armijo_search(
        state_.y, dy,
        [&](const Vector& trial) {
          trial_merit = evaluate_merit(setting, trial, trial_points);
          return trial_merit;
        },
        merit, slope, config_.line_search);
  } catch (const LineSearchError& e) {
    timing_.line_search_ms += ms_since(t_ls);
    comm_floats_ += (long long)e.trial_merits.size() * (long long)s_count;
    const double best_trial =
        *std::min_element(e.trial_merits.begin(), e.trial_merits.end());
    if (merit - best_trial <= 1e-8 * (1.0 + std::abs(merit))) {
      // the merit is flat along the ray to within evaluation noise; the
      // exhausted search is a stationarity certificate, not a failure
      last_step_stationary_ = true;
      state_.last_step_norm = record.step_norm;
      state_.last_alpha = 0.0;
      record.alpha = 0.0;
      record.line_search_evals = int(e.trial_merits.size());
      record.comm_floats = comm_floats_;
      record.wall_ms = ms_since(t_iter);
      timing_.total_wall_ms += record.wall_ms;
      return record;
    }
    throw;
  }
  timing_.line_search_ms += ms_since(t_ls);
  comm_floats_ += (long long)ls.evals * (long long)s_count;

  state_.y = ls.y_next;
  points_ = std::move(trial_points);  // subsolves at the accepted trial
  state_.merit = trial_merit;
  state_.last_alpha = ls.alpha;
  state_.last_step_norm = record.step_norm;

  record.alpha = ls.alpha;
  record.line_search_evals = ls.evals;
  record.comm_floats = comm_floats_;
  record.wall_ms = ms_since(t_iter);
  timing_.total_wall_ms += record.wall_ms;
  return record;
}

MasterSolveOutcome MasterCoordinator::solve(const PenaltySetting& setting, int max_iterations) {
  MasterSolveOutcome out;
  for (int k = 0; k < max_iterations; ++k) {
    IterationRecord rec = iterate(setting);
    out.records.push_back(rec);
    if (last_step_stationary_) {
      out.step_converged = true;
      break;
    }
  }
  return out;
}

}  // namespace qpdec
