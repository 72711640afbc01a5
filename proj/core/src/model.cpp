#include "mpsring/model.hpp"

#include <cmath>

namespace mpsring {

HamiltonianSpec::HamiltonianSpec(int N, int d, std::vector<CouplingTerm> terms,
                                 Boundary boundary)
    : N_(N), d_(d), boundary_(boundary), by_bond_(static_cast<size_t>(std::max(N, 0))) {
  require(N >= 2, "HamiltonianSpec: N must be >= 2");
  require(d >= 1, "HamiltonianSpec: d must be >= 1");
  if (boundary.kind == BoundaryKind::Twisted)
    require(std::isfinite(boundary.phi), "HamiltonianSpec: twist angle must be finite");
  for (auto& t : terms) {
    require(t.bond >= 0 && t.bond < N, "HamiltonianSpec: bond index out of range");
    require(t.left_op.rows() == d && t.left_op.cols() == d &&
                t.right_op.rows() == d && t.right_op.cols() == d,
            "HamiltonianSpec: operator dimension must match lattice d");
    require(t.left_op.allFinite() && t.right_op.allFinite() &&
                std::isfinite(t.strength.real()) && std::isfinite(t.strength.imag()),
            "HamiltonianSpec: non-finite coupling");
    if (boundary.kind == BoundaryKind::Open && t.bond == N - 1)
      continue;  // sigma_{N+1} = 0
    by_bond_[static_cast<size_t>(t.bond)].push_back(std::move(t));
  }
}

const std::vector<CouplingTerm>& HamiltonianSpec::bond_terms(int k) const {
  require(k >= 0 && k < N_, "bond_terms: bond index out of range");
  return by_bond_[static_cast<size_t>(k)];
}

SiteOperator spin_plus() {
  SiteOperator s = SiteOperator::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

SiteOperator spin_minus() {
  SiteOperator s = SiteOperator::Zero(2, 2);
  s(1, 0) = 1.0;
  return s;
}

SiteOperator spin_z() {
  SiteOperator s = SiteOperator::Zero(2, 2);
  s(0, 0) = 0.5;
  s(1, 1) = -0.5;
  return s;
}

SiteOperator spin_identity() { return SiteOperator::Identity(2, 2); }

HamiltonianSpec build_xxz(int N, double J, double delta, Boundary boundary) {
  require(N >= 2, "build_xxz: N must be >= 2");
  require(std::isfinite(J) && std::isfinite(delta), "build_xxz: non-finite J or Delta");
  if (boundary.kind == BoundaryKind::Twisted)
    require(std::isfinite(boundary.phi), "build_xxz: non-finite twist");

  const SiteOperator sp = spin_plus();
  const SiteOperator sm = spin_minus();
  const SiteOperator sz = spin_z();

  std::vector<CouplingTerm> terms;
  terms.reserve(static_cast<size_t>(3 * N));
  for (int k = 0; k < N; ++k) {
    cxd phase_pm(1.0, 0.0), phase_mp(1.0, 0.0);
    if (k == N - 1 && boundary.kind == BoundaryKind::Twisted) {
      // S+_{N} S-_{N+1} -> e^{-i phi} S+_{N} S-_{1}, and the conjugate partner
      phase_pm = std::exp(cxd(0.0, -boundary.phi));
      phase_mp = std::exp(cxd(0.0, +boundary.phi));
    }
    terms.push_back({k, sp, sm, 0.5 * J * phase_pm});
    terms.push_back({k, sm, sp, 0.5 * J * phase_mp});
    terms.push_back({k, sz, sz, cxd(J * delta, 0.0)});
  }
  return HamiltonianSpec(N, 2, std::move(terms), boundary);
}

}  // namespace mpsring
