#pragma once

#include "mpsring/tsvd.hpp"

#include <memory>
#include <optional>
#include <stdexcept>

namespace mpsring {

struct EffectiveKernels;  // cached contraction stacks (internal)

// Thrown by stabilize_gauge when the environment norm has collapsed; the sweep
// driver restarts the site from a fresh random tensor.
struct degenerate_norm_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GaugePair {
  MatC X, Y;        // m x m invertible
  MatC Xinv, Yinv;  // cached inverses
};

// Site-k pencil (H_k, N_k) on vectors of dimension d*m^2. N_k = M_k (x) I with
// M_k acting on the bond-pair index; H_k is a sum of environment-chain
// quadratic forms, each optionally dressed with a site operator. Appliers are
// Hermitian-symmetrized. The eps shifts act on the operators the solver sees
// (the gauged frame once a gauge is set) and are never folded into the rank-s
// surrogate, so they stay exact diagonal terms.
class EffectiveProblem {
 public:
  // One term group of the effective Hamiltonian.
  struct HGroup {
    TruncatedFactorization G;  // environment chain, m^2-dim
    SiteOperator sigma;        // d x d; size 0 means identity
    cxd coeff{1.0, 0.0};       // coupling strength times relative scale
  };

  struct Surrogate {
    MatC U;     // n x s
    VecR s;     // absolute scale folded in
    MatC V;     // s x n
  };

  static EffectiveProblem from_chains(const SectorCache& left, const SectorCache& right,
                                      const HamiltonianSpec& spec, int k);
  // Synthetic pencil for tests/solvers: H dense (d*m^2 square), M dense (m^2 square).
  static EffectiveProblem from_dense(MatC H, MatC M, int d);

  int phys_dim() const { return d_; }
  int bond_dim() const { return m_; }
  int dim() const { return d_ * block_; }
  int site() const { return site_; }
  double eps() const { return eps_; }
  // log of the absolute scale of the norm operator (the pencil is exposed in
  // units where the leading singular value of M_k is ~1)
  double norm_log_scale() const { return norm_log_scale_; }
  const std::optional<GaugePair>& gauge() const { return gauge_; }
  bool has_surrogate() const { return sur_.has_value(); }
  int surrogate_rank() const { return sur_ ? static_cast<int>(sur_->s.size()) : 0; }

  VecC apply_H(const VecC& x) const;
  VecC apply_N(const VecC& x) const;
  MatC apply_H_block(const MatC& X) const;
  MatC apply_N_block(const MatC& X) const;
  // groups path even when a surrogate is installed (true Rayleigh quotients)
  VecC apply_H_exact(const VecC& x) const;
  // shift-free quadratic forms of the physical pencil at x: {x^dag H x, x^dag N x}
  std::pair<double, double> rayleigh_parts(const VecC& x) const;

  MatC dense_H() const;  // test-scale only
  MatC dense_N() const;

  friend EffectiveProblem regularize(EffectiveProblem prob, double eps);
  friend std::pair<EffectiveProblem, GaugePair> stabilize_gauge(EffectiveProblem prob,
                                                                int p, std::uint64_t seed);
  friend EffectiveProblem truncate_hamiltonian(EffectiveProblem prob, int s,
                                               std::uint64_t seed);

 private:
  EffectiveProblem() = default;
  const EffectiveKernels& kernels() const;
  MatC apply_groups(const MatC& X, bool adjoint) const;
  MatC apply_M(const MatC& X, bool adjoint) const;   // one m^2 block
  MatC gauge_in(const MatC& X) const;                // (X^dag (x) Y^dag) x
  MatC gauge_out(const MatC& X) const;               // (X (x) Y) y
  MatC gauged_base_H(const MatC& X, bool adjoint) const;

  int d_ = 0, m_ = 0, site_ = -1;
  int block_ = 0;  // m_*m_ for chain-backed problems; M.rows() for dense ones
  double eps_ = 0.0;
  double norm_log_scale_ = 0.0;
  std::vector<HGroup> groups_;
  TruncatedFactorization Tenv_;
  std::optional<MatC> dense_h_;
  std::optional<MatC> dense_m_;
  std::optional<GaugePair> gauge_;
  std::optional<Surrogate> sur_;
  // stacks depend only on groups_/Tenv_ (immutable after assembly), so copies
  // of the problem share them
  mutable std::shared_ptr<const EffectiveKernels> kernels_;
};

// Pencil from the two environment chains: left covers [.., k-1], right covers
// [k+1, ..]; together they must cover every site except k.
EffectiveProblem assemble(const SectorCache& left, const SectorCache& right,
                          const HamiltonianSpec& spec, int k);

// N -> N + eps I, H -> H + sqrt(eps) I.
EffectiveProblem regularize(EffectiveProblem prob, double eps);

// Congruence transform by X (x) Y built from the dominant tensor-product term
// of M_k; makes the leading block of the transformed norm the identity.
std::pair<EffectiveProblem, GaugePair> stabilize_gauge(EffectiveProblem prob, int p,
                                                       std::uint64_t seed);

// Replace the (gauged) Hamiltonian applier by a rank-s SVD surrogate, then
// Hermitian-symmetrize in applier form. s == 0 or s >= dim leaves the problem
// uncompressed.
EffectiveProblem truncate_hamiltonian(EffectiveProblem prob, int s, std::uint64_t seed);

// Reshape between the site vector (d*m^2) and the d site matrices.
std::vector<MatC> split_site_vector(const VecC& x, int d, int m);
VecC join_site_matrices(const std::vector<MatC>& As);

}  // namespace mpsring
