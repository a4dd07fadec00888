#include "qpdec/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <sstream>

namespace qpdec {

namespace {

void check_dims(const BlockQP& p, std::vector<Violation>& out) {
  if (p.subsystems.empty()) {
    out.push_back({-1, "problem must contain at least one subsystem", 0.0});
  }
  if (p.n_y < 0) out.push_back({-1, "dimension mismatch: n_y negative", double(p.n_y)});
  for (int i = 0; i < int(p.subsystems.size()); ++i) {
    const auto& s = p.subsystems[size_t(i)];
    const Eigen::Index nx = s.hx.size();
    auto expect = [&](const char* field, Eigen::Index rows, Eigen::Index cols,
                      Eigen::Index want_rows, Eigen::Index want_cols) {
      if (rows != want_rows || cols != want_cols) {
        std::ostringstream os;
        os << "dimension mismatch: " << field << " is " << rows << "x" << cols << ", expected "
           << want_rows << "x" << want_cols;
        out.push_back({i, os.str(), double(rows)});
      }
    };
    expect("Hxx", s.Hxx.rows(), s.Hxx.cols(), nx, nx);
    expect("Hxy", s.Hxy.rows(), s.Hxy.cols(), nx, p.n_y);
    expect("Hyy", s.Hyy.rows(), s.Hyy.cols(), p.n_y, p.n_y);
    expect("hy", s.hy.size(), 1, p.n_y, 1);
    // each constraint block reported as one finding: rows must agree with the
    // right-hand side and columns with (nx, n_y)
    if (s.Ax.rows() != s.b.size() || s.Ay.rows() != s.b.size() || s.Ax.cols() != nx ||
        s.Ay.cols() != p.n_y) {
      std::ostringstream os;
      os << "dimension mismatch: equality block Ax " << s.Ax.rows() << "x" << s.Ax.cols()
         << ", Ay " << s.Ay.rows() << "x" << s.Ay.cols() << ", b " << s.b.size();
      out.push_back({i, os.str(), double(s.b.size())});
    }
    if (s.Bx.rows() != s.d.size() || s.By.rows() != s.d.size() || s.Bx.cols() != nx ||
        s.By.cols() != p.n_y) {
      std::ostringstream os;
      os << "dimension mismatch: inequality block Bx " << s.Bx.rows() << "x" << s.Bx.cols()
         << ", By " << s.By.rows() << "x" << s.By.cols() << ", d " << s.d.size();
      out.push_back({i, os.str(), double(s.d.size())});
    }
  }
  const auto& g = p.global;
  if (g.Aeq.rows() != g.beq.size() || (g.Aeq.rows() > 0 && g.Aeq.cols() != p.n_y)) {
    out.push_back({-1, "dimension mismatch: Aeq/beq", double(g.Aeq.rows())});
  }
  if (g.Bineq.rows() != g.dineq.size() || (g.Bineq.rows() > 0 && g.Bineq.cols() != p.n_y)) {
    out.push_back({-1, "dimension mismatch: Bineq/dineq", double(g.Bineq.rows())});
  }
}

bool all_finite(const BlockQP& p) {
  auto ok = [](const Matrix& m) { return m.size() == 0 || m.allFinite(); };
  for (const auto& s : p.subsystems) {
    if (!(ok(s.Hxx) && ok(s.Hxy) && ok(s.Hyy) && ok(s.hx) && ok(s.hy) && ok(s.Ax) && ok(s.Ay) &&
          ok(s.b) && ok(s.Bx) && ok(s.By) && ok(s.d))) {
      return false;
    }
  }
  return ok(p.global.Aeq) && ok(p.global.beq) && ok(p.global.Bineq) && ok(p.global.dineq);
}

Eigen::Index rank_of(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

// Dense equality matrix over the stacked variables [x_1,...,x_S, y].
Matrix stacked_equalities(const BlockQP& p) {
  Eigen::Index rows = p.global.ne();
  for (const auto& s : p.subsystems) rows += s.ne();
  const Eigen::Index n = p.total_nx() + p.n_y;
  Matrix e = Matrix::Zero(rows, n);
  Eigen::Index r = 0, xoff = 0;
  const Eigen::Index yoff = p.total_nx();
  for (const auto& s : p.subsystems) {
    if (s.ne() > 0) {
      e.block(r, xoff, s.ne(), s.nx()) = s.Ax;
      e.block(r, yoff, s.ne(), p.n_y) = s.Ay;
    }
    r += s.ne();
    xoff += s.nx();
  }
  if (p.global.ne() > 0) e.block(r, yoff, p.global.ne(), p.n_y) = p.global.Aeq;
  return e;
}

Matrix dense_hessian(const BlockQP& p) {
  const Eigen::Index n = p.total_nx() + p.n_y;
  const Eigen::Index yoff = p.total_nx();
  Matrix h = Matrix::Zero(n, n);
  Eigen::Index xoff = 0;
  for (const auto& s : p.subsystems) {
    h.block(xoff, xoff, s.nx(), s.nx()) = s.Hxx;
    h.block(xoff, yoff, s.nx(), p.n_y) = s.Hxy;
    h.block(yoff, xoff, p.n_y, s.nx()) = s.Hxy.transpose();
    h.block(yoff, yoff, p.n_y, p.n_y) += s.Hyy;
    xoff += s.nx();
  }
  return h;
}

}  // namespace

Eigen::Index BlockQP::total_nx() const {
  Eigen::Index n = 0;
  for (const auto& s : subsystems) n += s.nx();
  return n;
}

std::vector<Violation> validate(const BlockQP& problem) {
  std::vector<Violation> out;
  if (!all_finite(problem)) {
    out.push_back({-1, "non-finite entry", 0.0});
    return out;
  }
  check_dims(problem, out);
  if (!out.empty()) return out;  // shape errors make the remaining checks meaningless

  for (int i = 0; i < int(problem.subsystems.size()); ++i) {
    const auto& s = problem.subsystems[size_t(i)];
    const double asym_xx = s.Hxx.size() ? inf_norm(Matrix(s.Hxx - s.Hxx.transpose())) : 0.0;
    if (asym_xx > 1e-12) out.push_back({i, "Hxx not symmetric", asym_xx});
    const double asym_yy = s.Hyy.size() ? inf_norm(Matrix(s.Hyy - s.Hyy.transpose())) : 0.0;
    if (asym_yy > 1e-12) out.push_back({i, "Hyy not symmetric", asym_yy});

    // Equality rows must be independent outright. Inequality rows are allowed
    // to appear as +r/-r pairs (two-sided bounds), so the stacked rank check
    // runs on sign-canonicalized, deduplicated rows.
    if (s.ne() > 0) {
      Matrix ke(s.ne(), s.nx() + problem.n_y);
      ke << s.Ax, s.Ay;
      const Eigen::Index r = rank_of(ke);
      if (r < s.ne()) {
        out.push_back({i, "constraint rows not full row rank", double(r)});
        continue;
      }
    }
    auto canonical = [](Vector row) {
      for (Eigen::Index c = 0; c < row.size(); ++c) {
        if (row(c) != 0.0) {
          if (row(c) < 0.0) row = -row;
          break;
        }
      }
      return row;
    };
    std::vector<Vector> eq_rows;
    for (Eigen::Index j = 0; j < s.ne(); ++j) {
      Vector row(s.nx() + problem.n_y);
      row << s.Ax.row(j).transpose(), s.Ay.row(j).transpose();
      eq_rows.push_back(canonical(std::move(row)));
    }
    std::vector<Vector> ineq_rows;
    for (Eigen::Index j = 0; j < s.ni(); ++j) {
      Vector row(s.nx() + problem.n_y);
      row << s.Bx.row(j).transpose(), s.By.row(j).transpose();
      row = canonical(std::move(row));
      bool duplicate = false;
      for (const auto& seen : eq_rows) duplicate = duplicate || seen == row;
      for (const auto& seen : ineq_rows) duplicate = duplicate || seen == row;
      if (!duplicate) ineq_rows.push_back(row);
    }
    const Eigen::Index rows = s.ne() + Eigen::Index(ineq_rows.size());
    if (rows > 0) {
      Matrix k(rows, s.nx() + problem.n_y);
      if (s.ne() > 0) {
        k.topRows(s.ne()) << s.Ax, s.Ay;
      }
      for (size_t j = 0; j < ineq_rows.size(); ++j) {
        k.row(s.ne() + Eigen::Index(j)) = ineq_rows[j].transpose();
      }
      const Eigen::Index r = rank_of(k);
      if (r < rows) out.push_back({i, "constraint rows not full row rank", double(r)});
    }
  }

  if (problem.global.ne() > 0) {
    const Eigen::Index r = rank_of(problem.global.Aeq);
    if (r < problem.global.ne()) out.push_back({-1, "global Aeq not full row rank", double(r)});
  }
  if (!out.empty()) return out;

  // Positive definiteness of the Hessian restricted to the nullspace of the
  // stacked equality rows (orthonormal basis via column-pivoted QR kernel).
  const Matrix h = dense_hessian(problem);
  const Matrix e = stacked_equalities(problem);
  Matrix z;
  if (e.rows() == 0) {
    z = Matrix::Identity(h.rows(), h.cols());
  } else {
    Eigen::FullPivLU<Matrix> lu(e);
    lu.setThreshold(1e-10);
    Matrix kernel = lu.kernel();
    if (kernel.cols() == 1 && kernel.isZero(0.0) && lu.rank() == e.cols()) {
      return out;  // equality rows pin every variable; nothing left to check
    }
    Eigen::HouseholderQR<Matrix> qr(kernel);
    z = qr.householderQ() * Matrix::Identity(kernel.rows(), kernel.cols());
  }
  const Matrix reduced = z.transpose() * h * z;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (reduced + reduced.transpose()));
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig > 1e-10)) out.push_back({-1, "reduced Hessian not PD", min_eig});
  return out;
}

MonolithicQP assemble_monolithic(const BlockQP& problem) {
  const auto violations = validate(problem);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "assemble_monolithic: invalid problem:";
    for (const auto& v : violations) os << " [subsystem " << v.subsystem << "] " << v.invariant << ";";
    throw ValidationError(os.str());
  }

  const Eigen::Index n = problem.total_nx() + problem.n_y;
  const Eigen::Index yoff = problem.total_nx();
  MonolithicQP m;
  std::vector<Eigen::Triplet<double>> ht, at, bt;
  Eigen::Index ne = problem.global.ne(), ni = problem.global.ni();
  for (const auto& s : problem.subsystems) {
    ne += s.ne();
    ni += s.ni();
  }
  m.h = Vector::Zero(n);
  m.beq = Vector::Zero(ne);
  m.dineq = Vector::Zero(ni);

  auto push_block = [](std::vector<Eigen::Triplet<double>>& t, const Matrix& blk, Eigen::Index r0,
                       Eigen::Index c0) {
    for (Eigen::Index c = 0; c < blk.cols(); ++c) {
      for (Eigen::Index r = 0; r < blk.rows(); ++r) {
        if (blk(r, c) != 0.0) t.emplace_back(int(r0 + r), int(c0 + c), blk(r, c));
      }
    }
  };

  Eigen::Index xoff = 0, re = 0, ri = 0;
  Matrix hyy_sum = Matrix::Zero(problem.n_y, problem.n_y);
  for (const auto& s : problem.subsystems) {
    push_block(ht, s.Hxx, xoff, xoff);
    push_block(ht, s.Hxy, xoff, yoff);
    push_block(ht, Matrix(s.Hxy.transpose()), yoff, xoff);
    hyy_sum += s.Hyy;
    m.h.segment(xoff, s.nx()) = s.hx;
    m.h.segment(yoff, problem.n_y) += s.hy;

    push_block(at, s.Ax, re, xoff);
    push_block(at, s.Ay, re, yoff);
    m.beq.segment(re, s.ne()) = s.b;
    re += s.ne();

    push_block(bt, s.Bx, ri, xoff);
    push_block(bt, s.By, ri, yoff);
    m.dineq.segment(ri, s.ni()) = s.d;
    ri += s.ni();

    xoff += s.nx();
  }
  push_block(ht, hyy_sum, yoff, yoff);
  if (problem.global.ne() > 0) {
    push_block(at, problem.global.Aeq, re, yoff);
    m.beq.segment(re, problem.global.ne()) = problem.global.beq;
  }
  if (problem.global.ni() > 0) {
    push_block(bt, problem.global.Bineq, ri, yoff);
    m.dineq.segment(ri, problem.global.ni()) = problem.global.dineq;
  }

  m.H.resize(int(n), int(n));
  m.H.setFromTriplets(ht.begin(), ht.end());
  m.Aeq.resize(int(ne), int(n));
  m.Aeq.setFromTriplets(at.begin(), at.end());
  m.Aineq.resize(int(ni), int(n));
  m.Aineq.setFromTriplets(bt.begin(), bt.end());
  return m;
}

double MonolithicQP::objective(const Vector& point) const {
  return 0.5 * point.dot(H * point) + h.dot(point);
}

std::vector<Vector> split_locals(const BlockQP& problem, const Vector& stacked) {
  std::vector<Vector> out;
  Eigen::Index off = 0;
  for (const auto& s : problem.subsystems) {
    out.push_back(stacked.segment(off, s.nx()));
    off += s.nx();
  }
  return out;
}

Vector coupling_part(const BlockQP& problem, const Vector& stacked) {
  return stacked.segment(problem.total_nx(), problem.n_y);
}

Vector stack_point(const BlockQP& problem, const std::vector<Vector>& x_list, const Vector& y) {
  Vector out(problem.total_nx() + problem.n_y);
  Eigen::Index off = 0;
  for (size_t i = 0; i < x_list.size(); ++i) {
    out.segment(off, x_list[i].size()) = x_list[i];
    off += x_list[i].size();
  }
  out.tail(problem.n_y) = y;
  return out;
}

BlockQP tiny_instance() {
  BlockQP p;
  p.n_y = 1;
  SubsystemBlock s;
  s.Hxx = Matrix::Constant(1, 1, 2.0);
  s.Hxy = Matrix::Zero(1, 1);
  s.Hyy = Matrix::Constant(1, 1, 2.0);
  s.hx = Vector::Constant(1, -2.0);
  s.hy = Vector::Zero(1);
  s.Ax = Matrix(0, 1);
  s.Ay = Matrix(0, 1);
  s.b = Vector(0);
  s.Bx = Matrix::Constant(1, 1, 1.0);
  s.By = Matrix::Zero(1, 1);
  s.d = Vector::Constant(1, 10.0);
  p.subsystems.push_back(std::move(s));
  p.global.Aeq = Matrix(0, 1);
  p.global.beq = Vector(0);
  p.global.Bineq = Matrix::Constant(1, 1, 1.0);
  p.global.dineq = Vector::Constant(1, 10.0);
  return p;
}

}  // namespace qpdec
