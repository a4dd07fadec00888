#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "qpdec/linalg.hpp"

namespace qpdec {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// One subsystem's objective and constraint blocks.
///
/// Objective contribution:  1/2 [x;y]^T [Hxx Hxy; Hxy^T Hyy] [x;y] + [hx;hy]^T [x;y]
/// subject to  Ax x + Ay y = b  and  Bx x + By y <= d.
struct SubsystemBlock {
  Matrix Hxx, Hxy, Hyy;
  Vector hx, hy;
  Matrix Ax, Ay;
  Vector b;
  Matrix Bx, By;
  Vector d;

  Eigen::Index nx() const { return Hxx.rows(); }
  Eigen::Index ny() const { return Hyy.rows(); }
  Eigen::Index ne() const { return Ax.rows(); }
  Eigen::Index ni() const { return Bx.rows(); }
};

/// Constraints on the coupling variables alone: Aeq y = beq, Bineq y <= dineq.
struct GlobalConstraints {
  Matrix Aeq;
  Vector beq;
  Matrix Bineq;
  Vector dineq;

  Eigen::Index ne() const { return Aeq.rows(); }
  Eigen::Index ni() const { return Bineq.rows(); }
};

/// An invariant violation found by validate(); violations are data, not failures.
struct Violation {
  int subsystem;  // -1 for global/problem-level findings
  std::string invariant;
  double measured;
};

/// Block-structured QP over subsystems 0..S-1 sharing coupling variables y.
/// Immutable after construction; safe for concurrent reads.
struct BlockQP {
  std::vector<SubsystemBlock> subsystems;
  GlobalConstraints global;
  Eigen::Index n_y = 0;

  Eigen::Index num_subsystems() const { return Eigen::Index(subsystems.size()); }
  Eigen::Index total_nx() const;
};

/// Stacked single-QP view over [x_1, ..., x_S, y] used by the reference solver.
struct MonolithicQP {
  SparseMatrix H;
  Vector h;
  SparseMatrix Aeq;
  Vector beq;
  SparseMatrix Aineq;
  Vector dineq;

  Eigen::Index num_vars() const { return H.rows(); }
  double objective(const Vector& point) const;
};

/// Checks all structural invariants plus positive definiteness of the Hessian
/// on the nullspace of the stacked equality rows. Empty result means valid.
std::vector<Violation> validate(const BlockQP& problem);

/// Stacks the blocks into one QP; rejects invalid problems.
MonolithicQP assemble_monolithic(const BlockQP& problem);

/// Splits a stacked point into per-subsystem locals and the coupling tail.
std::vector<Vector> split_locals(const BlockQP& problem, const Vector& stacked);
Vector coupling_part(const BlockQP& problem, const Vector& stacked);
Vector stack_point(const BlockQP& problem, const std::vector<Vector>& x_list, const Vector& y);

/// JSON problem file round-trip (see README for the schema).
BlockQP load_problem(const std::string& path);
void save_problem(const std::string& path, const BlockQP& problem);
BlockQP problem_from_json_text(const std::string& text);
std::string problem_to_json_text(const BlockQP& problem);

/// Canonical single-subsystem instance with a hand-solvable optimum:
/// x* = 1, y* = 0, f* = -1, value function phi(y) = -1 + y^2.
BlockQP tiny_instance();

}  // namespace qpdec
