#include "qpdec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace qpdec {

namespace {

// Pivot threshold used in the growth test of the 1x1/2x2 pivot selection.
const double kBunchKaufmanAlpha = (1.0 + std::sqrt(17.0)) / 8.0;

std::string pivot_message(const char* what, int index) {
  std::ostringstream os;
  os << what << " at pivot " << index;
  return os.str();
}

// Bunch-Kaufman LDL^T with 1x1 and 2x2 pivots, lower storage (dsytf2 scheme),
// templated so the same kernel can run in extended precision.
// ipiv[k] >= 0: 1x1 pivot, rows/cols k and ipiv[k] were interchanged.
// ipiv[k] == ipiv[k+1] == -(p+1): 2x2 pivot, rows/cols k+1 and p interchanged.
template <typename Scalar>
void bk_factor(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& lu, std::vector<int>& ipiv,
               double pivot_tol) {
  using std::abs;
  const Eigen::Index n = lu.rows();
  ipiv.assign(size_t(n), 0);
  Eigen::Index k = 0;
  while (k < n) {
    int kstep = 1;
    Eigen::Index kp = k;
    const Scalar absakk = abs(lu(k, k));
    Eigen::Index imax = k;
    Scalar colmax = 0.0;
    if (k + 1 < n) {
      lu.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&imax);
      imax += k + 1;
      colmax = abs(lu(imax, k));
    }
    if (std::max(absakk, colmax) < Scalar(pivot_tol) || std::max(absakk, colmax) == Scalar(0)) {
      throw SingularityError(pivot_message("ldlt: singular to working precision", int(k)), int(k));
    }
    if (absakk >= Scalar(kBunchKaufmanAlpha) * colmax) {
      kp = k;  // 1x1 pivot, no interchange
    } else {
      // largest off-diagonal magnitude in row imax of the trailing block
      Scalar rowmax = 0.0;
      for (Eigen::Index j = k; j < imax; ++j) rowmax = std::max(rowmax, Scalar(abs(lu(imax, j))));
      if (imax + 1 < n) {
        rowmax = std::max(rowmax, Scalar(lu.col(imax).tail(n - imax - 1).cwiseAbs().maxCoeff()));
      }
      if (absakk >= Scalar(kBunchKaufmanAlpha) * colmax * (colmax / rowmax)) {
        kp = k;
      } else if (abs(lu(imax, imax)) >= Scalar(kBunchKaufmanAlpha) * rowmax) {
        kp = imax;  // 1x1 pivot with interchange
      } else {
        kp = imax;  // 2x2 pivot with interchange
        kstep = 2;
      }
    }
    const Eigen::Index kk = k + kstep - 1;
    if (kp != kk) {
      // symmetric interchange of rows/cols kk and kp in the trailing submatrix
      if (kp + 1 < n) lu.col(kk).tail(n - kp - 1).swap(lu.col(kp).tail(n - kp - 1));
      for (Eigen::Index j = kk + 1; j < kp; ++j) std::swap(lu(j, kk), lu(kp, j));
      std::swap(lu(kk, kk), lu(kp, kp));
      if (kstep == 2) std::swap(lu(k + 1, k), lu(kp, k));
    }
    if (kstep == 1) {
      const Scalar d = lu(k, k);
      if (abs(d) < Scalar(pivot_tol)) {
        throw SingularityError(pivot_message("ldlt: singular to working precision", int(k)), int(k));
      }
      if (k + 1 < n) {
        auto col = lu.col(k).tail(n - k - 1);
        lu.bottomRightCorner(n - k - 1, n - k - 1).template triangularView<Eigen::Lower>() -=
            (col / d) * col.transpose();
        col /= d;
      }
      ipiv[size_t(k)] = int(kp);
    } else {
      // 2x2 pivot block [a11 a21; a21 a22] taken from (k, k+1)
      const Scalar a21 = lu(k + 1, k);
      const Scalar det = lu(k, k) * lu(k + 1, k + 1) - a21 * a21;
      const Scalar blockmax =
          std::max({Scalar(abs(lu(k, k))), Scalar(abs(lu(k + 1, k + 1))), Scalar(abs(a21))});
      if (abs(det) < Scalar(pivot_tol) * std::max(blockmax, Scalar(1e-300))) {
        throw SingularityError(pivot_message("ldlt: singular to working precision", int(k)), int(k));
      }
      if (k + 2 < n) {
        const Scalar d11 = lu(k + 1, k + 1) / a21;
        const Scalar d22 = lu(k, k) / a21;
        const Scalar t = Scalar(1) / (d11 * d22 - Scalar(1));
        const Scalar d21 = t / a21;
        for (Eigen::Index j = k + 2; j < n; ++j) {
          const Scalar wk = d21 * (d11 * lu(j, k) - lu(j, k + 1));
          const Scalar wkp1 = d21 * (d22 * lu(j, k + 1) - lu(j, k));
          for (Eigen::Index i = j; i < n; ++i) {
            lu(i, j) -= lu(i, k) * wk + lu(i, k + 1) * wkp1;
          }
          lu(j, k) = wk;
          lu(j, k + 1) = wkp1;
        }
      }
      ipiv[size_t(k)] = -int(kp) - 1;
      ipiv[size_t(k + 1)] = -int(kp) - 1;
    }
    k += kstep;
  }
}

// dsytrs scheme: x <- P^T L^-T D^-1 L^-1 P x, pairwise per pivot block.
template <typename Scalar>
void bk_solve_in_place(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& lu,
                       const std::vector<int>& ipiv,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x) {
  const Eigen::Index n = lu.rows();
  Eigen::Index k = 0;
  while (k < n) {
    if (ipiv[size_t(k)] >= 0) {
      const Eigen::Index kp = ipiv[size_t(k)];
      if (kp != k) x.row(k).swap(x.row(kp));
      if (k + 1 < n) x.bottomRows(n - k - 1).noalias() -= lu.col(k).tail(n - k - 1) * x.row(k);
      x.row(k) /= lu(k, k);
      ++k;
    } else {
      const Eigen::Index kp = -ipiv[size_t(k)] - 1;
      if (kp != k + 1) x.row(k + 1).swap(x.row(kp));
      if (k + 2 < n) {
        x.bottomRows(n - k - 2).noalias() -= lu.col(k).tail(n - k - 2) * x.row(k);
        x.bottomRows(n - k - 2).noalias() -= lu.col(k + 1).tail(n - k - 2) * x.row(k + 1);
      }
      const Scalar akm1k = lu(k + 1, k);
      const Scalar akm1 = lu(k, k) / akm1k;
      const Scalar ak = lu(k + 1, k + 1) / akm1k;
      const Scalar denom = akm1 * ak - Scalar(1);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Scalar bkm1 = x(k, j) / akm1k;
        const Scalar bk = x(k + 1, j) / akm1k;
        x(k, j) = (ak * bkm1 - bk) / denom;
        x(k + 1, j) = (akm1 * bk - bkm1) / denom;
      }
      k += 2;
    }
  }
  k = n - 1;
  while (k >= 0) {
    if (ipiv[size_t(k)] >= 0) {
      if (k + 1 < n) {
        x.row(k).noalias() -= lu.col(k).tail(n - k - 1).transpose() * x.bottomRows(n - k - 1);
      }
      const Eigen::Index kp = ipiv[size_t(k)];
      if (kp != k) x.row(k).swap(x.row(kp));
      --k;
    } else {
      if (k + 1 < n) {
        x.row(k).noalias() -= lu.col(k).tail(n - k - 1).transpose() * x.bottomRows(n - k - 1);
        x.row(k - 1).noalias() -= lu.col(k - 1).tail(n - k - 1).transpose() * x.bottomRows(n - k - 1);
      }
      const Eigen::Index kp = -ipiv[size_t(k)] - 1;
      if (kp != k) x.row(k).swap(x.row(kp));
      k -= 2;
    }
  }
}

}  // namespace

double inf_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.cols() == 1) return a.cwiseAbs().maxCoeff();
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

Factorization Factorization::compute(const Matrix& a, FactorKind kind) {
  if (a.rows() != a.cols()) {
    throw DimensionError("factorize: matrix must be square");
  }
  if (a.size() > 0 && !a.allFinite()) {
    throw ValidationError("factorize: non-finite entry");
  }
  Factorization f;
  f.kind_ = kind;
  f.pivot_tol_ = 1e-14 * inf_norm(a);
  switch (kind) {
    case FactorKind::Cholesky: f.factor_cholesky(a); break;
    case FactorKind::SymmetricIndefinite: f.factor_bunch_kaufman(a); break;
    case FactorKind::PartialPivLU: f.factor_lu(a); break;
  }
  return f;
}

void Factorization::factor_cholesky(const Matrix& a) {
  const Eigen::Index n = a.rows();
  lu_ = a.triangularView<Eigen::Lower>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = lu_(j, j) - lu_.row(j).head(j).squaredNorm();
    if (d <= 0.0) throw DefinitenessError(pivot_message("cholesky: matrix not positive definite", int(j)), int(j));
    if (d < pivot_tol_) throw SingularityError(pivot_message("cholesky: singular to working precision", int(j)), int(j));
    lu_(j, j) = std::sqrt(d);
    if (j + 1 < n) {
      lu_.col(j).tail(n - j - 1).noalias() -=
          lu_.block(j + 1, 0, n - j - 1, j) * lu_.row(j).head(j).transpose();
      lu_.col(j).tail(n - j - 1) /= lu_(j, j);
    }
  }
  // zero the unused upper triangle so rebuild() can use the full matrix
  lu_.triangularView<Eigen::StrictlyUpper>().setZero();
}

void Factorization::factor_bunch_kaufman(const Matrix& a) {
  if (inf_norm(Matrix(a - a.transpose())) > 1e-10 * std::max(1.0, inf_norm(a))) {
    throw ValidationError("ldlt: matrix is not symmetric");
  }
  lu_ = a;
  bk_factor<double>(lu_, ipiv_, pivot_tol_);
}

void Factorization::factor_lu(const Matrix& a) {
  const Eigen::Index n = a.rows();
  lu_ = a;
  ipiv_.assign(size_t(n), 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    lu_.col(k).tail(n - k).cwiseAbs().maxCoeff(&p);
    p += k;
    if (std::abs(lu_(p, k)) < pivot_tol_ || lu_(p, k) == 0.0) {
      throw SingularityError(pivot_message("lu: singular to working precision", int(k)), int(k));
    }
    if (p != k) lu_.row(k).swap(lu_.row(p));
    ipiv_[size_t(k)] = int(p);
    if (k + 1 < n) {
      lu_.col(k).tail(n - k - 1) /= lu_(k, k);
      lu_.bottomRightCorner(n - k - 1, n - k - 1).noalias() -=
          lu_.col(k).tail(n - k - 1) * lu_.row(k).tail(n - k - 1);
    }
  }
}

Matrix Factorization::solve(const Matrix& b) const {
  const Eigen::Index n = dim();
  if (b.rows() != n) throw DimensionError("solve: right-hand side rows do not match factor dimension");
  Matrix x = b;
  switch (kind_) {
    case FactorKind::Cholesky: {
      lu_.triangularView<Eigen::Lower>().solveInPlace(x);
      lu_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
      break;
    }
    case FactorKind::PartialPivLU: {
      for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index p = ipiv_[size_t(k)];
        if (p != k) x.row(k).swap(x.row(p));
      }
      lu_.triangularView<Eigen::UnitLower>().solveInPlace(x);
      lu_.triangularView<Eigen::Upper>().solveInPlace(x);
      break;
    }
    case FactorKind::SymmetricIndefinite: {
      bk_solve_in_place<double>(lu_, ipiv_, x);
      break;
    }
  }
  return x;
}

Vector Factorization::solve(const Vector& b) const {
  return Vector(solve(Matrix(b)));
}

Matrix Factorization::rebuild() const {
  const Eigen::Index n = dim();
  switch (kind_) {
    case FactorKind::Cholesky: {
      Matrix l = lu_.triangularView<Eigen::Lower>();
      return l * l.transpose();
    }
    case FactorKind::PartialPivLU: {
      Matrix l = lu_.triangularView<Eigen::UnitLower>();
      Matrix u = lu_.triangularView<Eigen::Upper>();
      Matrix m = l * u;
      for (Eigen::Index k = n - 1; k >= 0; --k) {
        const Eigen::Index p = ipiv_[size_t(k)];
        if (p != k) m.row(k).swap(m.row(p));
      }
      return m;
    }
    case FactorKind::SymmetricIndefinite: {
      // replay A = S_1 L_1 ( ... blkdiag(D, ...) ... ) L_1^T S_1 from the inside out
      Matrix m = Matrix::Zero(n, n);
      Eigen::Index k = 0;
      std::vector<std::pair<Eigen::Index, int>> steps;  // (k, kstep)
      while (k < n) {
        const int kstep = ipiv_[size_t(k)] >= 0 ? 1 : 2;
        if (kstep == 1) {
          m(k, k) = lu_(k, k);
        } else {
          m(k, k) = lu_(k, k);
          m(k + 1, k + 1) = lu_(k + 1, k + 1);
          m(k + 1, k) = m(k, k + 1) = lu_(k + 1, k);
        }
        steps.emplace_back(k, kstep);
        k += kstep;
      }
      for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const Eigen::Index kk = it->first;
        const int kstep = it->second;
        const Eigen::Index tail = n - kk - kstep;
        if (tail > 0) {
          const Matrix mult = lu_.block(kk + kstep, kk, tail, kstep);
          m.bottomRows(tail).noalias() += mult * m.middleRows(kk, kstep);
          m.rightCols(tail).noalias() += m.middleCols(kk, kstep) * mult.transpose();
        }
        Eigen::Index swapped = kk + kstep - 1;
        Eigen::Index kp = ipiv_[size_t(kk)] >= 0 ? ipiv_[size_t(kk)] : -ipiv_[size_t(kk)] - 1;
        if (kp != swapped) {
          m.row(swapped).swap(m.row(kp));
          m.col(swapped).swap(m.col(kp));
        }
      }
      return m;
    }
  }
  return Matrix();
}

namespace {

Vector equilibration_scale(const Matrix& a) {
  Vector s = Vector::Ones(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double row_max = a.cols() > 0 ? a.row(i).cwiseAbs().maxCoeff() : 0.0;
    if (row_max > 0.0) s(i) = 1.0 / std::sqrt(row_max);
  }
  return s;
}

}  // namespace

EquilibratedSolver::EquilibratedSolver(const Matrix& a, FactorKind kind)
    : scale_(equilibration_scale(a)),
      scaled_(scale_.asDiagonal() * a * scale_.asDiagonal()),
      factor_(Factorization::compute(scaled_, kind)) {}

Matrix EquilibratedSolver::solve(const Matrix& b) const {
  const Matrix scaled_rhs = scale_.asDiagonal() * b;
  Matrix x = factor_.solve(scaled_rhs);
  // refine while it still pays; barrier systems are ill-conditioned enough
  // that the raw backsolve can lose half the digits
  double previous = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 4; ++pass) {
    const Matrix residual = scaled_rhs - scaled_ * x;
    const double rnorm = inf_norm(residual);
    if (!(rnorm < 0.5 * previous)) break;
    previous = rnorm;
    x += factor_.solve(residual);
  }
  return scale_.asDiagonal() * x;
}

Vector EquilibratedSolver::solve(const Vector& b) const {
  return Vector(solve(Matrix(b)));
}

Matrix solve_symmetric_extended(const Matrix& a, const Matrix& b) {
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw DimensionError("solve_symmetric_extended: dimension mismatch");
  }
  const Vector scale = equilibration_scale(a);
  MatrixL lu = (scale.asDiagonal() * a * scale.asDiagonal()).cast<long double>();
  const MatrixL scaled = lu;
  std::vector<int> ipiv;
  bk_factor<long double>(lu, ipiv, 1e-17 * inf_norm(Matrix(scale.asDiagonal() * a * scale.asDiagonal())));
  MatrixL rhs = (scale.asDiagonal() * b).cast<long double>();
  MatrixL x = rhs;
  bk_solve_in_place<long double>(lu, ipiv, x);
  MatrixL residual = rhs - scaled * x;
  bk_solve_in_place<long double>(lu, ipiv, residual);
  x += residual;
  return scale.asDiagonal() * x.cast<double>();
}

}  // namespace qpdec
