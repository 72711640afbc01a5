#pragma once

#include "mpsring/model.hpp"
#include "mpsring/mps.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace mpsring {

// Rank-p factorization of a linear map on an n-dimensional space:
//   M ~= exp(log_scale) * U * diag(sigma) * V
// with U (n x r) orthonormal columns, V (r x n) orthonormal rows, sigma
// non-increasing and normalized so sigma(0) = 1 whenever r > 0. The explicit
// log scale keeps long transfer-matrix chains inside double range.
struct TruncatedFactorization {
  MatC U;       // n x r
  VecR sigma;   // r
  MatC V;       // r x n
  double log_scale = 0.0;
  bool rank_warning = false;

  int rank() const { return static_cast<int>(sigma.size()); }
  int dim() const { return static_cast<int>(U.rows()); }
  MatC dense() const;
  cxd trace() const;
  void normalize();

  static TruncatedFactorization zero(int n);
};

// Square linear map accessible only through products.
struct LinearMap {
  int n = 0;
  std::function<MatC(const MatC&)> apply;          // M  * X
  std::function<MatC(const MatC&)> apply_adjoint;  // M^dag * X
};

LinearMap map_from_dense(const MatC& M);
LinearMap map_from_fact(const TruncatedFactorization& f);

// Randomized one-pass truncated SVD:
//   x random (p x n) -> y = x M -> Gram-Schmidt rows (twice) -> z = M y'^dag
//   -> small SVD z = U D V' -> V = V' y'.
// Returns p singular triples (the tail is ~0 when rank(M) < p). Row collapses
// during Gram-Schmidt are replaced by fresh random rows (bounded retries) and
// flagged in rank_warning.
TruncatedFactorization truncated_svd(const LinearMap& M, int p, std::uint64_t seed);

// (U S V) * E and E * (U S V), re-truncated to canonical form without rank
// growth; only the touched side is re-orthogonalized (O(p m^3) + small SVD).
TruncatedFactorization extend_right(const TruncatedFactorization& f, const TransferOp& E);
TruncatedFactorization extend_left(const TransferOp& E, const TruncatedFactorization& f);

// Product of two factorizations through the small middle matrix; exact, rank
// min(rA, rB) with zero tail trimmed.
TruncatedFactorization fact_product(const TruncatedFactorization& A,
                                    const TruncatedFactorization& B);

// Weighted sum, re-truncated to rank p with the randomized SVD.
struct WeightedFact {
  cxd weight{1.0, 0.0};
  const TruncatedFactorization* fact = nullptr;
};
TruncatedFactorization fact_sum(const std::vector<WeightedFact>& terms, int p,
                                std::uint64_t seed);

// Caches for one contiguous chain of sites on the ring: the plain product T,
// edge products B with one operator insertion, and the in-chain Hamiltonian
// partial sum H, all held as rank-<=p factorizations.
//   B_left[t]  : operator t.right_op at the first site, keyed by bond_terms(first-1)
//   B_right[t] : operator t.left_op at the last site, keyed by bond_terms(last)
struct SectorCache {
  int first = 0;
  int len = 0;
  TruncatedFactorization T;
  TruncatedFactorization H;
  std::vector<TruncatedFactorization> B_left;
  std::vector<TruncatedFactorization> B_right;

  int last(int N) const { return (first + len - 1) % N; }
};

// Build the caches for range [first, first+len) by the randomized SVD of the
// whole-chain maps (length >= 2 required).
SectorCache build_sector_cache(const MpsState& state, const HamiltonianSpec& spec,
                               int first, int len, int p, std::uint64_t seed);

// Grow a chain cache by one site on either edge. The appended site multiplies
// the existing rank-p objects (no fresh truncation except the H-channel sum).
SectorCache chain_extend_right(const SectorCache& c, const MpsState& state,
                               const HamiltonianSpec& spec, int p, std::uint64_t seed);
SectorCache chain_extend_left(const MpsState& state, const HamiltonianSpec& spec,
                              const SectorCache& c, int p, std::uint64_t seed);

// Concatenate two adjacent chains (P immediately left of Q on the ring).
SectorCache chain_merge(const SectorCache& P, const SectorCache& Q,
                        const HamiltonianSpec& spec, int p, std::uint64_t seed);

}  // namespace mpsring
