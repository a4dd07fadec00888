#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qpdec/errors.hpp"

namespace qpdec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Max row sum for matrices, max abs entry for vectors.
double inf_norm(const Matrix& a);

enum class FactorKind {
  Cholesky,             // SPD, L*L^T
  SymmetricIndefinite,  // Bunch-Kaufman LDL^T with 1x1/2x2 pivoting
  PartialPivLU,         // row-pivoted LU
};

/// Dense factorization with multi-right-hand-side solves.
///
/// Relative pivot tolerance: a pivot below 1e-14 * ||A||_inf is reported as
/// singular. Cholesky additionally reports the index of the first
/// non-positive pivot. Factors use column-major storage internally.
class Factorization {
 public:
  static Factorization compute(const Matrix& a, FactorKind kind);

  FactorKind kind() const { return kind_; }
  Eigen::Index dim() const { return lu_.rows(); }

  /// Solves A X = B for as many right-hand sides as B has columns.
  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;

  /// Multiplies the stored factors back together (test hook).
  Matrix rebuild() const;

 private:
  Factorization() = default;

  void factor_cholesky(const Matrix& a);
  void factor_bunch_kaufman(const Matrix& a);
  void factor_lu(const Matrix& a);

  FactorKind kind_ = FactorKind::Cholesky;
  Matrix lu_;               // packed factors
  std::vector<int> ipiv_;   // pivot bookkeeping (LU rows / Bunch-Kaufman interchanges)
  double pivot_tol_ = 0.0;  // absolute threshold derived from the input norm
};

inline Factorization factorize(const Matrix& a, FactorKind kind) {
  return Factorization::compute(a, kind);
}

/// Factorizes D A D with D = diag(1/sqrt(max|row|)) and maps solves back.
/// KKT matrices from barrier methods mix scales across many orders of
/// magnitude; equilibration keeps the pivot tests and the solves meaningful.
class EquilibratedSolver {
 public:
  EquilibratedSolver(const Matrix& a, FactorKind kind);

  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;

 private:
  Vector scale_;
  Matrix scaled_;
  Factorization factor_;
};

/// One symmetric-indefinite solve carried out in extended precision, with
/// equilibration and a refinement pass. Reserved for KKT systems whose
/// condition sits at the edge of double precision (the elastic relaxation at
/// frozen late-phase penalties produces such systems).
Matrix solve_symmetric_extended(const Matrix& a, const Matrix& b);

}  // namespace qpdec
