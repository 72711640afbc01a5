#pragma once

#include "mpsring/common.hpp"

#include <vector>

namespace mpsring {

// A local operator acting on one site (d x d, complex).
using SiteOperator = MatC;

enum class BoundaryKind { Open, Periodic, Twisted };

struct Boundary {
  BoundaryKind kind = BoundaryKind::Periodic;
  double phi = 0.0;  // twist angle, only meaningful for Twisted

  static Boundary open() { return {BoundaryKind::Open, 0.0}; }
  static Boundary periodic() { return {BoundaryKind::Periodic, 0.0}; }
  static Boundary twisted(double phi) { return {BoundaryKind::Twisted, phi}; }
};

// One nearest-neighbor coupling: strength * left_op(site k) * right_op(site k+1).
struct CouplingTerm {
  int bond = 0;  // couples sites (bond, bond+1 mod N)
  SiteOperator left_op;
  SiteOperator right_op;
  cxd strength{0.0, 0.0};
};

// Nearest-neighbor Hamiltonian on a chain/ring of N sites with uniform local
// dimension d. Open boundaries drop every term on bond N-1; the twist is
// attached entirely to the bond-(N-1) couplings so that sites 0..N-2 stay
// twist-independent.
class HamiltonianSpec {
 public:
  HamiltonianSpec(int N, int d, std::vector<CouplingTerm> terms, Boundary boundary);

  int sites() const { return N_; }
  int phys_dim() const { return d_; }
  const Boundary& boundary() const { return boundary_; }

  // All coupling terms on bond k (0-based). Empty on bond N-1 for Open.
  const std::vector<CouplingTerm>& bond_terms(int k) const;

  bool immutable_marker() const { return true; }  // value type, safe to share

 private:
  int N_ = 0;
  int d_ = 0;
  Boundary boundary_;
  std::vector<std::vector<CouplingTerm>> by_bond_;
};

// Spin-1/2 operators in the basis {|up>, |down>} with Sz|up> = +1/2 |up>.
SiteOperator spin_plus();
SiteOperator spin_minus();
SiteOperator spin_z();
SiteOperator spin_identity();

// XXZ chain: sum_k J [ (S+_k S-_{k+1} + S-_k S+_{k+1})/2 + Delta Sz_k Sz_{k+1} ].
// Under Twisted(phi) the bond-(N-1) raising/lowering terms pick up e^{-+ i phi}.
HamiltonianSpec build_xxz(int N, double J, double delta, Boundary boundary);

}  // namespace mpsring
