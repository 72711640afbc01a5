#pragma once

#include "mpsring/common.hpp"
#include "mpsring/model.hpp"

#include <string>
#include <vector>

namespace mpsring {

// Ring MPS: per site k, d matrices A^{[k],i} of shape m x m.
// Value type; optimization always produces new tensors, never mutates shared state.
struct MpsState {
  int N = 0, d = 0, m = 0;
  std::vector<std::vector<MatC>> tensors;  // [site][phys] -> m x m

  void validate() const;
};

// i.i.d. complex Gaussian entries scaled by 1/sqrt(d*m), then globally rescaled
// so the state norm <psi|psi> lands at 1 (inside the [0.1, 10] contract).
// Deterministic for a fixed seed.
MpsState random_mps(int N, int d, int m, std::uint64_t seed);

// Gauge move on bond k: A^{[k],i} <- A^{[k],i} W, A^{[k+1],i} <- V A^{[k+1],i}.
// Requires ||W V - I|| <= 1e-10 and cond(V) <= 1e12; physical state unchanged.
MpsState apply_gauge(const MpsState& state, int bond, const MatC& V, const MatC& W);

// Dense transfer matrix E^{[k]}[op], m^2 x m^2, composite index <a,b> = a*m+b
// with a the bra row and b the ket row. op == nullptr means identity.
MatC transfer_matrix(const MpsState& state, int k, const SiteOperator* op = nullptr);

// Structured application of E^{[k]}[op] to blocks of vectors; never materializes
// the m^2 x m^2 matrix. Cost O(d^2 m^3) per column.
class TransferOp {
 public:
  enum class Mode { Plain, Transpose, Adjoint };

  TransferOp(const std::vector<MatC>& site_tensors, const SiteOperator* op);

  int m() const { return m_; }
  int dim() const { return m_ * m_; }

  // Y = E^T X for Mode::Transpose (row-vector products), Y = E^dag X for Adjoint.
  MatC apply(const MatC& X, Mode mode = Mode::Plain) const;
  MatC dense() const;

 private:
  struct Term {
    MatC L, RT;  // contribution c * vec(L * Xmat * RT) per column
    cxd c;
  };
  std::vector<Term> plain_, trans_, adj_;
  int m_ = 0;
  int d_ = 0;
};

struct Expectation {
  cxd energy{0.0, 0.0};  // <psi|H|psi>
  double norm = 0.0;     // <psi|psi>
};

// Exact (untruncated) contraction of energy and norm, O(N d^2 m^5).
// Intended for test-scale N*m^4; production energies come from the sweep driver.
Expectation expectation(const MpsState& state, const HamiltonianSpec& spec);

// log(<psi|psi>), stable for long rings (renormalized running products).
double norm_log(const MpsState& state);

// Bring sites j < upto to the left-isometry gauge (sum_i A^dag A = I); the
// discarded DW factor is absorbed into site (upto mod N) so the ring state is
// preserved up to overall scale. canonicalize_right is the mirror image.
MpsState canonicalize_left(const MpsState& state, int upto);
MpsState canonicalize_right(const MpsState& state, int from);

// Checkpoint file: fixed little-endian binary layout (see README), bit-exact
// round trip.
struct Checkpoint {
  MpsState state;
  std::uint64_t seed = 0;
  std::int64_t sweeps_done = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mpsring
