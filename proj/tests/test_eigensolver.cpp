#include "mpsring/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <doctest.h>

using namespace mpsring;

namespace {

MatC random_hermitian(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatC A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.cgaussian();
  return 0.5 * (A + A.adjoint());
}

MatC random_spd(int n, std::uint64_t seed, double lmin = 0.1) {
  Rng rng(seed);
  MatC A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.cgaussian();
  return MatC(A * A.adjoint() / n) + lmin * MatC::Identity(n, n);
}

VecC random_vec(int n, std::uint64_t seed) {
  Rng rng(seed);
  VecC x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.cgaussian();
  return x;
}

}  // namespace

TEST_CASE("diagonal pencil") {
  MatC H = MatC::Zero(4, 4);
  H(0, 0) = 1;
  H(1, 1) = 2;
  H(2, 2) = 3;
  H(3, 3) = 4;
  EffectiveProblem prob = EffectiveProblem::from_dense(H, MatC::Identity(4, 4), 1);
  EigSolveReport rep = min_generalized_eig(prob, 1e-11);
  CHECK(rep.converged);
  CHECK(rep.lambda == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(rep.x(0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("random dense pencils match the dense oracle at dim 64") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    MatC H = random_hermitian(64, 1000 + seed);
    MatC M = random_spd(16, 2000 + seed);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 4);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(prob.dense_H(), prob.dense_N());
    EigSolveReport rep = min_generalized_eig(prob, 1e-11, std::nullopt, 3000);
    CHECK(rep.converged);
    CHECK(std::abs(rep.lambda - es.eigenvalues().minCoeff()) <
          1e-9 * std::max(1.0, std::abs(es.eigenvalues().minCoeff())));
  }
}

TEST_CASE("regularized singular pencil recovers the deflated minimum") {
  MatC Q = Eigen::HouseholderQR<MatC>(random_hermitian(4, 31)).householderQ();
  VecR hv(4), nv(4);
  hv << 0.8, -0.5, 1.7, 0.0;
  nv << 1.0, 0.6, 0.9, 0.0;
  MatC H = Q * hv.asDiagonal() * Q.adjoint();
  MatC M = Q * nv.asDiagonal() * Q.adjoint();
  const double deflated = -0.5 / 0.6;
  EffectiveProblem prob = regularize(EffectiveProblem::from_dense(H, M, 1), 1e-12);
  EigSolveReport rep = min_generalized_eig(prob, 1e-9, std::nullopt, 2000);
  CHECK(rep.converged);
  CHECK(std::abs(rep.lambda - deflated) < 1e-5);
}

TEST_CASE("rayleigh-quotient optimality at the solution") {
  MatC H = random_hermitian(32, 77);
  MatC M = random_spd(32, 78);
  EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 1);
  EigSolveReport rep = min_generalized_eig(prob, 1e-11, std::nullopt, 3000);
  REQUIRE(rep.converged);
  for (int t = 0; t < 100; ++t) {
    VecC v = random_vec(32, 900 + t);
    const double rq = (v.adjoint() * prob.apply_H(v))(0).real() /
                      (v.adjoint() * prob.apply_N(v))(0).real();
    CHECK(rep.lambda <= rq + 1e-10 * std::abs(rq));
  }
}

TEST_CASE("residual contract and warm-start consistency") {
  MatC H = random_hermitian(24, 55);
  MatC M = random_spd(24, 56);
  EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 1);
  EigSolveReport rep = min_generalized_eig(prob, 1e-10, std::nullopt, 3000);
  REQUIRE(rep.converged);
  VecC Hx = prob.apply_H(rep.x);
  VecC Nx = prob.apply_N(rep.x);
  CHECK((Hx - rep.lambda * Nx).norm() / Nx.norm() <= 1e-10);

  EigSolveReport again = min_generalized_eig(prob, 1e-10, rep.x, 3000);
  CHECK(again.converged);
  CHECK(again.iterations <= 5);
  CHECK(std::abs(again.lambda - rep.lambda) < 1e-9 * std::max(1.0, std::abs(rep.lambda)));
}

TEST_CASE("non-convergence reports best pair with the flag down") {
  MatC H = random_hermitian(48, 91);
  MatC M = random_spd(48, 92);
  EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 1);
  EigSolveReport rep = min_generalized_eig(prob, 1e-14, std::nullopt, 2);
  CHECK(!rep.converged);
  CHECK(rep.x.size() == 48);
  CHECK(std::isfinite(rep.lambda));
  CHECK(rep.residual > 0);
}

TEST_CASE("ungauge_solution") {
  SUBCASE("identity gauge is a no-op reshape") {
    GaugePair g;
    g.X = g.Y = g.Xinv = g.Yinv = MatC::Identity(3, 3);
    VecC x = random_vec(2 * 9, 7);
    auto As = ungauge_solution(x, g, 2);
    auto direct = split_site_vector(x, 2, 3);
    for (int i = 0; i < 2; ++i) CHECK((As[i] - direct[i]).norm() == 0.0);
  }

  SUBCASE("gauge then ungauge is the identity") {
    const int m = 3, d = 2;
    MatC H = random_hermitian(d * m * m, 21);
    MatC M = random_spd(m * m, 22);
    auto [prob, g] = stabilize_gauge(EffectiveProblem::from_dense(H, M, d), m * m, 3);
    VecC x = random_vec(d * m * m, 13);
    // forward: x' = ([X^dag]^-1 (x) [Y^dag]^-1) x
    VecC xp(x.size());
    using RowMatC = Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (int i = 0; i < d; ++i) {
      Eigen::Map<const RowMatC> Am(x.data() + i * m * m, m, m);
      Eigen::Map<RowMatC>(xp.data() + i * m * m, m, m) =
          g.Xinv.adjoint() * Am * g.Yinv.conjugate();
    }
    auto As = ungauge_solution(xp, g, d);
    VecC back = join_site_matrices(As);
    CHECK((back - x).norm() < 1e-10 * x.norm());
  }

  SUBCASE("singular gauge rejected") {
    GaugePair g;
    g.X = MatC::Zero(2, 2);
    g.Y = g.Xinv = g.Yinv = MatC::Identity(2, 2);
    CHECK_THROWS(ungauge_solution(random_vec(8, 3), g, 2));
  }
}
