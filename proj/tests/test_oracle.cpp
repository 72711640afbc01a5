#include "mpsring/oracle.hpp"

#include <doctest.h>

using namespace mpsring;

TEST_CASE("exact ground energies of small chains") {
  CHECK(oracle::exact_ground(build_xxz(2, 1.0, 1.0, Boundary::open())).first ==
        doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(oracle::exact_ground(build_xxz(4, 1.0, 1.0, Boundary::periodic())).first ==
        doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("oracle size caps enforced") {
  CHECK_THROWS(oracle::exact_ground(build_xxz(15, 1.0, 1.0, Boundary::periodic())));
}

TEST_CASE("the two oracle paths agree at N=12") {
  auto spec = build_xxz(12, 1.0, 1.0, Boundary::periodic());
  const double e1 = oracle::exact_ground(spec).first;
  const double e2 = oracle::exact_ground_power(spec);
  CHECK(std::abs(e1 - e2) < 1e-10);
}

TEST_CASE("expand_mps") {
  SUBCASE("m=1 product state is the tensor product of local vectors") {
    MpsState st = random_mps(4, 2, 1, 3);
    auto dense = oracle::expand_mps(st);
    for (long idx = 0; idx < 16; ++idx) {
      cxd want(1.0, 0.0);
      long rest = idx;
      for (int k = 3; k >= 0; --k) {
        want *= st.tensors[static_cast<size_t>(k)][static_cast<size_t>(rest % 2)](0, 0);
        rest /= 2;
      }
      CHECK(std::abs(dense.amplitudes(idx) - want) < 1e-14);
    }
  }

  SUBCASE("norm matches expectation on a random state") {
    MpsState st = random_mps(6, 2, 2, 5);
    auto dense = oracle::expand_mps(st);
    auto ex = expectation(st, build_xxz(6, 1.0, 1.0, Boundary::periodic()));
    CHECK(dense.amplitudes.squaredNorm() == doctest::Approx(ex.norm).epsilon(1e-10));
  }
}

TEST_CASE("finite-difference stiffness") {
  SUBCASE("open boundary gives exactly zero") {
    CHECK(std::abs(oracle::exact_stiffness_fd(0.5, 8, 0.01, BoundaryKind::Open)) < 1e-9);
    CHECK(std::abs(oracle::exact_stiffness_fd(0.0, 10, 0.01, BoundaryKind::Open)) < 1e-9);
  }

  SUBCASE("free-fermion point approaches 1/pi from finite size") {
    const double inv_pi = 0.31830988618379067;
    const double r8 = oracle::exact_stiffness_fd(0.0, 8, 0.01);
    const double r10 = oracle::exact_stiffness_fd(0.0, 10, 0.01);
    const double r12 = oracle::exact_stiffness_fd(0.0, 12, 0.01);
    CHECK(std::abs(r12 - inv_pi) < std::abs(r10 - inv_pi));
    CHECK(std::abs(r10 - inv_pi) < std::abs(r8 - inv_pi));
    const bool monotone = (r8 < r10 && r10 < r12) || (r8 > r10 && r10 > r12);
    CHECK(monotone);
  }

  SUBCASE("second-order accuracy in the step") {
    const double a = oracle::exact_stiffness_fd(0.5, 8, 0.04);
    const double b = oracle::exact_stiffness_fd(0.5, 8, 0.02);
    const double c = oracle::exact_stiffness_fd(0.5, 8, 0.01);
    const double e1 = std::abs(a - b);
    const double e2 = std::abs(b - c);
    CHECK(e2 < e1);                 // shrinking
    CHECK(e1 / std::max(e2, 1e-300) > 2.0);  // about 4x per halving
    CHECK_THROWS(oracle::exact_stiffness_fd(0.5, 8, 0.5));
  }

  SUBCASE("exact energy increases with twist in the critical phase") {
    const double e0 = oracle::exact_ground(build_xxz(8, 1.0, 0.5, Boundary::periodic())).first;
    double prev = e0;
    for (double phi : {0.1, 0.2, 0.3}) {
      const double e = oracle::exact_ground(build_xxz(8, 1.0, 0.5, Boundary::twisted(phi))).first;
      CHECK(e > prev);
      prev = e;
    }
  }
}
