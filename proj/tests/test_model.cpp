#include "mpsring/model.hpp"
#include "mpsring/oracle.hpp"

#include <doctest.h>

using namespace mpsring;

TEST_CASE("xxz two-site open chain has the singlet ground energy") {
  auto spec = build_xxz(2, 1.0, 1.0, Boundary::open());
  auto [e0, st] = oracle::exact_ground(spec);
  CHECK(e0 == doctest::Approx(-0.75).epsilon(1e-12));
}

TEST_CASE("xxz four-site periodic ring ground energy is -2") {
  auto spec = build_xxz(4, 1.0, 1.0, Boundary::periodic());
  auto [e0, st] = oracle::exact_ground(spec);
  CHECK(e0 == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("twisted(0) equals periodic term by term") {
  auto a = build_xxz(6, 1.0, 0.7, Boundary::periodic());
  auto b = build_xxz(6, 1.0, 0.7, Boundary::twisted(0.0));
  for (int k = 0; k < 6; ++k) {
    const auto& ta = a.bond_terms(k);
    const auto& tb = b.bond_terms(k);
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) {
      CHECK(ta[i].strength == tb[i].strength);  // bit-identical
      CHECK((ta[i].left_op - tb[i].left_op).norm() == 0.0);
      CHECK((ta[i].right_op - tb[i].right_op).norm() == 0.0);
    }
  }
}

TEST_CASE("bond_terms layout") {
  SUBCASE("interior bonds carry the three xxz couplings") {
    auto spec = build_xxz(8, 1.0, 0.3, Boundary::periodic());
    for (int k = 0; k < 8; ++k) CHECK(spec.bond_terms(k).size() == 3);
  }
  SUBCASE("open boundary drops the ring-closure bond") {
    auto spec = build_xxz(8, 1.0, 0.3, Boundary::open());
    CHECK(spec.bond_terms(7).empty());
    CHECK(spec.bond_terms(6).size() == 3);
  }
  SUBCASE("twist phases sit on the closure bond only") {
    const double phi = 0.37;
    auto spec = build_xxz(8, 2.0, 0.3, Boundary::twisted(phi));
    const auto& t = spec.bond_terms(7);
    REQUIRE(t.size() == 3);
    // S+S- carries e^{-i phi}, the partner the conjugate, SzSz untouched
    CHECK(std::abs(t[0].strength - 1.0 * std::exp(cxd(0, -phi))) < 1e-15);
    CHECK(std::abs(t[1].strength - 1.0 * std::exp(cxd(0, +phi))) < 1e-15);
    CHECK(std::abs(t[2].strength - cxd(0.6, 0.0)) < 1e-15);
    for (int k = 0; k < 7; ++k)
      for (const auto& tt : spec.bond_terms(k))
        CHECK(std::abs(tt.strength.imag()) == 0.0);
  }
  SUBCASE("out-of-range bond rejected") {
    auto spec = build_xxz(4, 1.0, 1.0, Boundary::periodic());
    CHECK_THROWS(spec.bond_terms(-1));
    CHECK_THROWS(spec.bond_terms(4));
  }
}

TEST_CASE("assembled hamiltonians are hermitian") {
  for (double phi : {0.0, 0.3, -1.1}) {
    for (int N : {4, 6}) {
      auto spec = build_xxz(N, 1.0, 0.5, Boundary::twisted(phi));
      MatC H = MatC(oracle::dense_hamiltonian(spec));
      CHECK((H - H.adjoint()).norm() < 1e-12 * std::max(1.0, H.norm()));
    }
  }
}

TEST_CASE("twist evenness of the exact ground energy") {
  for (int N : {6, 8}) {
    for (double phi : {0.1, 0.25}) {
      const double ep = oracle::exact_ground(build_xxz(N, 1.0, 0.5, Boundary::twisted(phi))).first;
      const double em = oracle::exact_ground(build_xxz(N, 1.0, 0.5, Boundary::twisted(-phi))).first;
      CHECK(std::abs(ep - em) < 1e-10);
    }
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS(build_xxz(1, 1.0, 1.0, Boundary::periodic()));
  CHECK_THROWS(build_xxz(4, std::nan(""), 1.0, Boundary::periodic()));
  CHECK_THROWS(build_xxz(4, 1.0, std::nan(""), Boundary::periodic()));
  CHECK_THROWS(build_xxz(4, 1.0, 1.0, Boundary::twisted(std::nan(""))));
}
