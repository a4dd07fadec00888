#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "qpdec/linalg.hpp"
#include "test_util.hpp"

using namespace qpdec;
using namespace qpdec::testing;

namespace {

double solve_residual(const Matrix& a, const Matrix& x, const Matrix& b) {
  return inf_norm(Matrix(a * x - b));
}

}  // namespace

TEST_CASE("cholesky identity and scalar") {
  const Matrix eye = Matrix::Identity(3, 3);
  auto f = factorize(eye, FactorKind::Cholesky);
  CHECK(inf_norm(Matrix(f.rebuild() - eye)) == doctest::Approx(0.0));
  const Matrix b = Matrix::Ones(3, 2);
  CHECK(solve_residual(eye, f.solve(b), b) < 1e-14);

  Matrix a(1, 1);
  a << 2.0;
  auto f2 = factorize(a, FactorKind::Cholesky);
  CHECK(f2.rebuild()(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f2.solve(Vector(Vector::Ones(1)))(0) == doctest::Approx(0.5));
}

TEST_CASE("cholesky rejects indefinite input at the failing pivot") {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  try {
    factorize(a, FactorKind::Cholesky);
    FAIL("expected DefinitenessError");
  } catch (const DefinitenessError& e) {
    CHECK(e.pivot == 0);
  }

  Matrix b(2, 2);
  b << 1, 0, 0, -3;
  try {
    factorize(b, FactorKind::Cholesky);
    FAIL("expected DefinitenessError");
  } catch (const DefinitenessError& e) {
    CHECK(e.pivot == 1);
  }
}

TEST_CASE("diagonal solve") {
  Matrix a = Vector((Vector(2) << 2.0, 4.0).finished()).asDiagonal();
  auto f = factorize(a, FactorKind::Cholesky);
  const Matrix x = f.solve(Matrix(Matrix::Identity(2, 2)));
  CHECK(x(0, 0) == doctest::Approx(0.5));
  CHECK(x(1, 1) == doctest::Approx(0.25));
}

TEST_CASE("reconstruction invariant on random matrices up to n = 200") {
  std::mt19937_64 rng(7);
  for (Eigen::Index n : {1, 2, 3, 5, 8, 13, 40, 200}) {
    const Matrix spd = random_spd(rng, n);
    auto fc = factorize(spd, FactorKind::Cholesky);
    CHECK(inf_norm(Matrix(spd - fc.rebuild())) <= 1e-10 * inf_norm(spd));

    const Matrix sym = random_symmetric(rng, n);
    auto fs = factorize(sym, FactorKind::SymmetricIndefinite);
    CHECK(inf_norm(Matrix(sym - fs.rebuild())) <= 1e-10 * inf_norm(sym));

    const Matrix gen = random_matrix(rng, n, n);
    auto fl = factorize(gen, FactorKind::PartialPivLU);
    CHECK(inf_norm(Matrix(gen - fl.rebuild())) <= 1e-10 * inf_norm(gen));
  }
}

TEST_CASE("multi right-hand-side residual bound") {
  std::mt19937_64 rng(11);
  const Matrix a = random_spd(rng, 50);
  const Matrix b = random_matrix(rng, 50, 7);
  for (auto kind :
       {FactorKind::Cholesky, FactorKind::SymmetricIndefinite, FactorKind::PartialPivLU}) {
    const Matrix x = factorize(a, kind).solve(b);
    CHECK(solve_residual(a, x, b) <= 1e-9 * (inf_norm(a) * inf_norm(x) + inf_norm(b)));
  }
}

TEST_CASE("solve recovers known solutions on well-conditioned matrices") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 30);
    const Matrix a = conditioned_spd(rng, n, 1e6);
    const Matrix x0 = random_matrix(rng, n, 3);
    const Matrix b = a * x0;
    for (auto kind :
         {FactorKind::Cholesky, FactorKind::SymmetricIndefinite, FactorKind::PartialPivLU}) {
      const Matrix x = factorize(a, kind).solve(b);
      CHECK(inf_norm(Matrix(x - x0)) <= 1e-8 * std::max(1.0, inf_norm(x0)));
    }
  }
}

TEST_CASE("cholesky succeeds exactly when the matrix is positive definite") {
  std::mt19937_64 rng(17);
  int definite = 0, indefinite = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 1 + Eigen::Index(rng() % 50);
    Matrix a = (trial % 2 == 0) ? random_spd(rng, n, uniform(rng, 0.01, 1.0))
                                : random_symmetric(rng, n);
    a.diagonal().array() += uniform(rng, -0.5, 0.5);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (std::abs(min_eig) < 1e-8) continue;  // too close to the boundary to classify
    bool ok = true;
    try {
      factorize(a, FactorKind::Cholesky);
    } catch (const Error&) {
      ok = false;
    }
    CHECK(ok == (min_eig > 0.0));
    (min_eig > 0 ? definite : indefinite) += 1;
  }
  CHECK(definite > 5);
  CHECK(indefinite > 5);
}

TEST_CASE("symmetric indefinite factorization handles saddle-point structure") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 12);
    const Eigen::Index m = 1 + Eigen::Index(rng() % n);
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = random_spd(rng, n);
    const Matrix a = random_matrix(rng, m, n);
    kkt.topRightCorner(n, m) = a.transpose();
    kkt.bottomLeftCorner(m, n) = a;
    const Vector x0 = random_vector(rng, n + m);
    const Vector b = kkt * x0;
    const Vector x = factorize(kkt, FactorKind::SymmetricIndefinite).solve(b);
    const Vector x_ref = Eigen::FullPivLU<Matrix>(kkt).solve(b);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() <= 1e-7 * std::max(1.0, x_ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("bunch-kaufman matches full-pivot LU on random symmetric systems") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 1 + Eigen::Index(rng() % 40);
    const Matrix a = random_symmetric(rng, n, 2.0);
    Eigen::FullPivLU<Matrix> ref(a);
    if (ref.rank() < n) continue;
    const Vector b = random_vector(rng, n);
    const Vector x = factorize(a, FactorKind::SymmetricIndefinite).solve(b);
    const Vector x_ref = ref.solve(b);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, x_ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("singular inputs raise singularity errors") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;  // third row/col identically zero
  CHECK_THROWS_AS(factorize(a, FactorKind::PartialPivLU), SingularityError);
  CHECK_THROWS_AS(factorize(a, FactorKind::SymmetricIndefinite), SingularityError);

  Matrix ones = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(factorize(ones, FactorKind::PartialPivLU), SingularityError);
}

TEST_CASE("dimension errors") {
  const Matrix a = Matrix::Identity(3, 3);
  auto f = factorize(a, FactorKind::Cholesky);
  CHECK_THROWS_AS(f.solve(Matrix(Matrix::Ones(2, 2))), DimensionError);
  CHECK_THROWS_AS(factorize(Matrix(Matrix::Ones(2, 3)), FactorKind::PartialPivLU), DimensionError);
}
