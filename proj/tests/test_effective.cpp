#include "mpsring/effective.hpp"
#include "mpsring/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <doctest.h>

using namespace mpsring;

namespace {

MatC random_unitary(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatC A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.cgaussian();
  return Eigen::HouseholderQR<MatC>(A).householderQ();
}

MatC random_spd(int n, std::uint64_t seed, double lmin = 0.1) {
  Rng rng(seed);
  MatC A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.cgaussian();
  MatC S = A * A.adjoint() / n;
  return S + lmin * MatC::Identity(n, n);
}

// environment split: right chain [k+1 .. k+rlen], left chain the rest
EffectiveProblem problem_at(const MpsState& st, const HamiltonianSpec& spec, int k,
                            int p, std::uint64_t seed) {
  const int N = st.N;
  const int rlen = (N - 1) / 2 + 1;
  const int llen = N - 1 - rlen;
  SectorCache right = build_sector_cache(st, spec, (k + 1) % N, rlen, p, seed);
  SectorCache left = build_sector_cache(st, spec, (k + 1 + rlen) % N, llen, p, seed + 1);
  return assemble(left, right, spec, k);
}

VecC random_vec(int n, std::uint64_t seed) {
  Rng rng(seed);
  VecC x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.cgaussian();
  return x;
}

double min_gen_eig_dense(const MatC& H, const MatC& N) {
  Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(H, N);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("pencil identity against the dense oracle") {
  const int N = 6, m = 2, k = 2;
  MpsState st = random_mps(N, 2, m, 17);
  auto spec = build_xxz(N, 1.0, 0.6, Boundary::twisted(0.25));
  EffectiveProblem prob = problem_at(st, spec, k, m * m, 5);
  const double scale = std::exp(prob.norm_log_scale());
  MatC Hd = MatC(oracle::dense_hamiltonian(spec));

  for (int trial = 0; trial < 50; ++trial) {
    VecC x = random_vec(prob.dim(), 1000 + trial);
    VecC y = random_vec(prob.dim(), 2000 + trial);

    MpsState sx = st, sy = st;
    sx.tensors[k] = split_site_vector(x, 2, m);
    sy.tensors[k] = split_site_vector(y, 2, m);
    VecC ax = oracle::expand_mps(sx).amplitudes;
    VecC ay = oracle::expand_mps(sy).amplitudes;

    const cxd n_want = (ay.adjoint() * ax)(0);
    const cxd n_got = (y.adjoint() * prob.apply_N(x))(0) * scale;
    CHECK(std::abs(n_got - n_want) < 1e-9 * std::max(1.0, std::abs(n_want)));

    const cxd h_want = (ay.adjoint() * Hd * ax)(0);
    const cxd h_got = (y.adjoint() * prob.apply_H(x))(0) * scale;
    CHECK(std::abs(h_got - h_want) < 1e-9 * std::max(1.0, std::abs(h_want)));
  }
}

TEST_CASE("norm operator keeps the M (x) I block structure") {
  MpsState st = random_mps(6, 2, 2, 19);
  auto spec = build_xxz(6, 1.0, 1.0, Boundary::periodic());
  EffectiveProblem prob = problem_at(st, spec, 1, 4, 7);
  MatC Nd = prob.dense_N();
  const int n = 4;
  MatC blk = Nd.topLeftCorner(n, n);
  // d identical diagonal blocks, zero off-diagonal blocks
  CHECK((Nd.block(n, n, n, n) - blk).norm() < 1e-12 * std::max(1.0, blk.norm()));
  CHECK(Nd.block(0, n, n, n).norm() < 1e-12 * std::max(1.0, blk.norm()));
  CHECK(Nd.block(n, 0, n, n).norm() < 1e-12 * std::max(1.0, blk.norm()));

  SUBCASE("PSD before regularization, floored after") {
    Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (Nd + Nd.adjoint()));
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * Nd.norm());
    EffectiveProblem reg = regularize(prob, 1e-8);
    Eigen::SelfAdjointEigenSolver<MatC> es2(reg.dense_N());
    CHECK(es2.eigenvalues().minCoeff() >= 1e-8 * (1.0 - 1e-6) +
                                              std::min(0.0, es.eigenvalues().minCoeff()));
  }
}

TEST_CASE("m=1 problem reduces to a d x d pencil with scalar norm") {
  MpsState st = random_mps(6, 2, 1, 23);
  auto spec = build_xxz(6, 1.0, 1.0, Boundary::periodic());
  EffectiveProblem prob = problem_at(st, spec, 3, 1, 9);
  CHECK(prob.dim() == 2);
  MatC Nd = prob.dense_N();
  CHECK(std::abs(Nd(0, 0) - Nd(1, 1)) < 1e-12 * std::abs(Nd(0, 0)));
  CHECK(std::abs(Nd(0, 1)) < 1e-12 * std::abs(Nd(0, 0)));
}

TEST_CASE("regularize") {
  SUBCASE("eps = 0 is the identity transformation") {
    MatC H = random_spd(8, 31);
    MatC M = random_spd(4, 32);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 2);
    EffectiveProblem reg = regularize(prob, 0.0);
    VecC x = random_vec(8, 3);
    CHECK((reg.apply_H(x) - prob.apply_H(x)).norm() == 0.0);
    CHECK((reg.apply_N(x) - prob.apply_N(x)).norm() == 0.0);
  }

  SUBCASE("singular pencil with a common kernel splits into two families") {
    // d=1, m=2: 4-dim pencil sharing a 1-dim kernel
    MatC Q = random_unitary(4, 55);
    VecR hv(4), nv(4);
    hv << 0.8, -0.5, 1.7, 0.0;
    nv << 1.0, 0.6, 0.9, 0.0;
    MatC H = Q * hv.asDiagonal() * Q.adjoint();
    MatC M = Q * nv.asDiagonal() * Q.adjoint();
    // deflated exact minimum over the non-kernel block
    double deflated = std::min({0.8 / 1.0, -0.5 / 0.6, 1.7 / 0.9});

    EffectiveProblem prob = regularize(EffectiveProblem::from_dense(H, M, 1), 1e-12);
    MatC Hr = prob.dense_H();
    MatC Nr = prob.dense_N();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(0.5 * (Hr + Hr.adjoint()),
                                                      0.5 * (Nr + Nr.adjoint()));
    CHECK(std::abs(es.eigenvalues().minCoeff() - deflated) < 1e-5);
    CHECK(es.eigenvalues().maxCoeff() >= 1e5);
  }

  SUBCASE("shift on a strictly positive pencil moves the minimum by <= sqrt(eps)") {
    MatC H = random_spd(8, 61) - 0.8 * MatC::Identity(8, 8);
    H = 0.5 * (H + H.adjoint()).eval();
    MatC M = random_spd(4, 62, /*lmin=*/1.0);  // O(1)-conditioned norm
    EffectiveProblem base = EffectiveProblem::from_dense(H, M, 2);
    const double l0 = min_gen_eig_dense(base.dense_H(), base.dense_N());
    EffectiveProblem reg = regularize(base, 1e-12);
    const double l1 = min_gen_eig_dense(reg.dense_H(), reg.dense_N());
    CHECK(std::abs(l1 - l0) <= 2e-6 * std::max(1.0, std::abs(l0)));
  }
}

TEST_CASE("stabilize_gauge") {
  SUBCASE("identity norm block gives an identity gauge") {
    MatC H = random_spd(8, 71);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, MatC::Identity(4, 4), 2);
    auto [gp, g] = stabilize_gauge(prob, 4, 3);
    CHECK((g.X - MatC::Identity(2, 2)).norm() < 1e-10);
    CHECK((g.Y - MatC::Identity(2, 2)).norm() < 1e-10);
    VecC x = random_vec(8, 5);
    CHECK((gp.apply_H(x) - prob.apply_H(x)).norm() < 1e-10 * prob.apply_H(x).norm());
  }

  SUBCASE("exact tensor-product norm becomes the identity") {
    const int m = 3;
    MatC P = random_spd(m, 81);
    MatC Qm = random_spd(m, 82);
    MatC M(m * m, m * m);
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c)
        for (int b = 0; b < m; ++b)
          for (int dd = 0; dd < m; ++dd)
            M(a * m + c, b * m + dd) = P(a, b) * Qm(c, dd);
    MatC H = random_spd(m * m, 83);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 1);
    auto [gp, g] = stabilize_gauge(prob, 1, 9);
    MatC Np = gp.dense_N();
    CHECK((Np - MatC::Identity(m * m, m * m)).norm() < 1e-8);
    // gauge invariants
    MatC N1 = std::sqrt((P.norm() * Qm.norm())) * P / P.norm();
    CHECK((g.X * N1 * g.X.adjoint() - MatC::Identity(m, m)).norm() < 1e-8);
  }

  SUBCASE("congruence leaves the generalized spectrum invariant") {
    const int d = 2, m = 2;
    MatC H = random_spd(d * m * m, 91) - 0.5 * MatC::Identity(d * m * m, d * m * m);
    MatC M = random_spd(m * m, 92);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, M, d);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> e0(prob.dense_H(), prob.dense_N());
    auto [gp, g] = stabilize_gauge(prob, 4, 11);
    MatC Hg = gp.dense_H();
    MatC Ng = gp.dense_N();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> e1(0.5 * (Hg + Hg.adjoint()),
                                                      0.5 * (Ng + Ng.adjoint()));
    for (int i = 0; i < e0.eigenvalues().size(); ++i)
      CHECK(std::abs(e0.eigenvalues()(i) - e1.eigenvalues()(i)) <
            1e-9 * std::max(1.0, std::abs(e0.eigenvalues()(i))));
  }

  SUBCASE("degenerate norm raises") {
    EffectiveProblem prob =
        EffectiveProblem::from_dense(MatC::Identity(4, 4), 1e-16 * MatC::Identity(4, 4), 1);
    CHECK_THROWS_AS((void)stabilize_gauge(prob, 2, 1), degenerate_norm_error);
  }
}

TEST_CASE("truncate_hamiltonian") {
  SUBCASE("s >= dim leaves the applier untouched") {
    MatC H = random_spd(8, 101) - 0.3 * MatC::Identity(8, 8);
    EffectiveProblem prob = EffectiveProblem::from_dense(H, random_spd(4, 102), 2);
    EffectiveProblem tr = truncate_hamiltonian(prob, 8, 3);
    for (int t = 0; t < 100; ++t) {
      VecC x = random_vec(8, 300 + t);
      CHECK((tr.apply_H(x) - prob.apply_H(x)).norm() <= 1e-9 * prob.apply_H(x).norm());
    }
  }

  SUBCASE("2^-j spectrum truncated at s=10 keeps the minimum to 1e-3") {
    const int n = 16;
    MatC Q = random_unitary(n, 111);
    VecR ev(n);
    for (int j = 0; j < n; ++j) ev(j) = std::pow(2.0, -j);
    ev(n - 1) = -std::pow(2.0, -(n - 1));  // smallest eigenvalue, tiny magnitude
    MatC H = Q * ev.asDiagonal() * Q.adjoint();
    EffectiveProblem prob = EffectiveProblem::from_dense(H, MatC::Identity(16, 16), 1);
    EffectiveProblem tr = truncate_hamiltonian(prob, 10, 5);
    Eigen::SelfAdjointEigenSolver<MatC> es(tr.dense_H());
    CHECK(std::abs(es.eigenvalues().minCoeff() - ev.minCoeff()) <= 1e-3 * H.norm());
  }

  SUBCASE("surrogate applier is hermitian by construction") {
    Rng rng(121);
    MatC H(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) H(i, j) = rng.cgaussian();  // deliberately non-hermitian
    EffectiveProblem prob = EffectiveProblem::from_dense(H, random_spd(4, 122), 2);
    EffectiveProblem tr = truncate_hamiltonian(prob, 5, 7);
    for (int t = 0; t < 20; ++t) {
      VecC x = random_vec(8, 400 + t), y = random_vec(8, 500 + t);
      const cxd a = (tr.apply_H(x).adjoint() * y)(0);
      const cxd b = (x.adjoint() * tr.apply_H(y))(0);
      CHECK(std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("apply_H and apply_N special cases") {
  SUBCASE("kernel of N maps into the kernel of H") {
    // H and M built from the same rank-deficient frame: exact common kernel
    Rng rng(131);
    MatC A(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = rng.cgaussian();
    MatC G = random_spd(3, 132);
    MatC M = A * A.adjoint();                 // PSD, 1-dim kernel
    MatC H = A * G * A.adjoint() - 0.4 * M;   // same kernel
    EffectiveProblem prob = EffectiveProblem::from_dense(H, M, 1);
    Eigen::SelfAdjointEigenSolver<MatC> es(prob.dense_N());
    const double hnorm = prob.dense_H().norm();
    for (int i = 0; i < 4; ++i) {
      if (es.eigenvalues()(i) < 1e-10 * es.eigenvalues().maxCoeff()) {
        VecC null_dir = es.eigenvectors().col(i);
        CHECK(prob.apply_H(null_dir).norm() < 1e-8 * hnorm);
      }
    }
  }

  SUBCASE("pure-shift problem applies sqrt(eps)") {
    EffectiveProblem prob =
        EffectiveProblem::from_dense(MatC::Zero(4, 4), MatC::Identity(4, 4), 1);
    EffectiveProblem reg = regularize(prob, 1e-12);
    VecC x = random_vec(4, 9);
    CHECK((reg.apply_H(x) - std::sqrt(1e-12) * x).norm() < 1e-20);
    CHECK((reg.apply_N(x) - (1.0 + 1e-12) * x).norm() < 1e-15);
  }
}

TEST_CASE("assemble validates cache ranges") {
  MpsState st = random_mps(6, 2, 2, 141);
  auto spec = build_xxz(6, 1.0, 1.0, Boundary::periodic());
  SectorCache right = build_sector_cache(st, spec, 3, 3, 4, 1);
  SectorCache left = build_sector_cache(st, spec, 0, 2, 4, 2);
  CHECK_NOTHROW(assemble(left, right, spec, 2));
  CHECK_THROWS(assemble(left, right, spec, 3));   // wrong site
  CHECK_THROWS(assemble(right, left, spec, 2));   // swapped chains
}
