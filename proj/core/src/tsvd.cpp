#include "mpsring/tsvd.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace mpsring {

MatC TruncatedFactorization::dense() const {
  const int n = dim();
  if (rank() == 0) return MatC::Zero(n, n);
  return std::exp(log_scale) * (U * sigma.asDiagonal() * V);
}

cxd TruncatedFactorization::trace() const {
  cxd t(0.0, 0.0);
  for (int j = 0; j < rank(); ++j) t += sigma(j) * (V.row(j) * U.col(j))(0);
  return std::exp(log_scale) * t;
}

void TruncatedFactorization::normalize() {
  if (rank() == 0) {
    log_scale = 0.0;
    return;
  }
  const double s0 = sigma(0);
  if (s0 > 0.0 && std::isfinite(s0)) {
    sigma /= s0;
    log_scale += std::log(s0);
  }
}

TruncatedFactorization TruncatedFactorization::zero(int n) {
  TruncatedFactorization f;
  f.U = MatC::Zero(n, 0);
  f.sigma = VecR::Zero(0);
  f.V = MatC::Zero(0, n);
  return f;
}

LinearMap map_from_dense(const MatC& M) {
  require(M.rows() == M.cols(), "map_from_dense: square matrices only");
  LinearMap lm;
  lm.n = static_cast<int>(M.rows());
  lm.apply = [M](const MatC& X) -> MatC { return M * X; };
  lm.apply_adjoint = [M](const MatC& X) -> MatC { return M.adjoint() * X; };
  return lm;
}

LinearMap map_from_fact(const TruncatedFactorization& f) {
  LinearMap lm;
  lm.n = f.dim();
  const double sc = std::exp(f.log_scale);
  lm.apply = [f, sc](const MatC& X) -> MatC {
    if (f.rank() == 0) return MatC::Zero(X.rows(), X.cols());
    return sc * (f.U * (f.sigma.asDiagonal() * (f.V * X)));
  };
  lm.apply_adjoint = [f, sc](const MatC& X) -> MatC {
    if (f.rank() == 0) return MatC::Zero(X.rows(), X.cols());
    return sc * (f.V.adjoint() * (f.sigma.asDiagonal() * (f.U.adjoint() * X)));
  };
  return lm;
}

namespace {

// Two-pass modified Gram-Schmidt on the rows of Y. Collapsed rows are replaced
// with fresh random draws; returns false only if completion keeps failing.
bool orthonormalize_rows(MatC& Y, Rng& rng, bool& replaced_any) {
  const int p = static_cast<int>(Y.rows());
  const int n = static_cast<int>(Y.cols());
  double scale = Y.norm() / std::sqrt(static_cast<double>(p));
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  int budget = 4 * p + 16;
  for (int i = 0; i < p; ++i) {
    bool ok = false;
    while (budget > 0) {
      for (int pass = 0; pass < 2; ++pass)
        for (int j = 0; j < i; ++j) Y.row(i) -= (Y.row(j).conjugate() * Y.row(i).transpose())(0) * Y.row(j);
      const double nrm = Y.row(i).norm();
      if (nrm > 1e-13 * scale && std::isfinite(nrm)) {
        Y.row(i) /= nrm;
        ok = true;
        break;
      }
      replaced_any = true;
      --budget;
      for (int c = 0; c < n; ++c) Y(i, c) = rng.cgaussian();
    }
    if (!ok) return false;
  }
  return true;
}

}  // namespace

TruncatedFactorization truncated_svd(const LinearMap& M, int p, std::uint64_t seed) {
  const int n = M.n;
  require(n >= 1, "truncated_svd: empty map");
  require(p >= 1 && p <= n, "truncated_svd: p must lie in [1, n]");
  Rng rng(derive_seed(seed, 0x74737664ULL));

  // probe rows x (p x n), y = x M via y^dag = M^dag x^dag
  MatC Xd(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) Xd(i, j) = rng.cgaussian();
  MatC Y = M.apply_adjoint(Xd).adjoint();  // p x n

  bool replaced = false;
  bool complete = orthonormalize_rows(Y, rng, replaced);

  MatC Z = M.apply(Y.adjoint());  // n x p
  Eigen::JacobiSVD<MatC> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedFactorization f;
  f.U = svd.matrixU();
  f.sigma = svd.singularValues();
  f.V = svd.matrixV().adjoint() * Y;
  f.rank_warning = replaced || !complete;
  f.normalize();
  return f;
}

TruncatedFactorization extend_right(const TruncatedFactorization& f, const TransferOp& E) {
  require(f.dim() == E.dim(), "extend_right: dimension mismatch");
  const int r = f.rank();
  if (r == 0) return f;
  const int n = f.dim();

  // rows V * E, then re-orthogonalize and refresh the small SVD
  MatC VE = E.apply(f.V.transpose(), TransferOp::Mode::Transpose).transpose();  // r x n
  MatC W = f.sigma.asDiagonal() * VE;
  Eigen::HouseholderQR<MatC> qr(W.adjoint());  // n x r
  MatC Q = qr.householderQ() * MatC::Identity(n, r);
  MatC R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatC> svd(R.adjoint(), Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedFactorization out;
  out.U = f.U * svd.matrixU();
  out.sigma = svd.singularValues();
  out.V = svd.matrixV().adjoint() * Q.adjoint();
  out.log_scale = f.log_scale;
  out.rank_warning = f.rank_warning;
  out.normalize();
  return out;
}

TruncatedFactorization extend_left(const TransferOp& E, const TruncatedFactorization& f) {
  require(f.dim() == E.dim(), "extend_left: dimension mismatch");
  const int r = f.rank();
  if (r == 0) return f;
  const int n = f.dim();

  MatC W = E.apply(f.U) * f.sigma.asDiagonal();  // n x r
  Eigen::HouseholderQR<MatC> qr(W);
  MatC Q = qr.householderQ() * MatC::Identity(n, r);
  MatC R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatC> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedFactorization out;
  out.U = Q * svd.matrixU();
  out.sigma = svd.singularValues();
  out.V = svd.matrixV().adjoint() * f.V;
  out.log_scale = f.log_scale;
  out.rank_warning = f.rank_warning;
  out.normalize();
  return out;
}

TruncatedFactorization fact_product(const TruncatedFactorization& A,
                                    const TruncatedFactorization& B) {
  require(A.dim() == B.dim(), "fact_product: dimension mismatch");
  const int n = A.dim();
  if (A.rank() == 0 || B.rank() == 0) return TruncatedFactorization::zero(n);

  MatC C = A.sigma.asDiagonal() * (A.V * B.U) * B.sigma.asDiagonal();
  Eigen::JacobiSVD<MatC> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);

  // trim the numerically-zero tail
  const VecR& s = svd.singularValues();
  int r = static_cast<int>(s.size());
  const double cut = (s.size() > 0 ? s(0) : 0.0) * 1e-15;
  while (r > 0 && !(s(r - 1) > cut)) --r;
  if (r == 0) return TruncatedFactorization::zero(n);

  TruncatedFactorization out;
  out.U = A.U * svd.matrixU().leftCols(r);
  out.sigma = s.head(r);
  out.V = svd.matrixV().leftCols(r).adjoint() * B.V;
  out.log_scale = A.log_scale + B.log_scale;
  out.rank_warning = A.rank_warning || B.rank_warning;
  out.normalize();
  return out;
}

TruncatedFactorization fact_sum(const std::vector<WeightedFact>& terms, int p,
                                std::uint64_t seed) {
  require(!terms.empty(), "fact_sum: no terms");
  const int n = terms.front().fact->dim();
  double ls_ref = -std::numeric_limits<double>::infinity();
  int total_rank = 0;
  bool warn = false;
  for (const auto& t : terms) {
    require(t.fact && t.fact->dim() == n, "fact_sum: dimension mismatch");
    if (t.fact->rank() > 0 && std::abs(t.weight) > 0)
      ls_ref = std::max(ls_ref, t.fact->log_scale + std::log(std::abs(t.weight)));
    total_rank += t.fact->rank();
    warn = warn || t.fact->rank_warning;
  }
  if (total_rank == 0 || !std::isfinite(ls_ref)) return TruncatedFactorization::zero(n);

  LinearMap lm;
  lm.n = n;
  lm.apply = [&terms, ls_ref](const MatC& X) -> MatC {
    MatC Y = MatC::Zero(X.rows(), X.cols());
    for (const auto& t : terms) {
      if (t.fact->rank() == 0) continue;
      const cxd c = t.weight * std::exp(t.fact->log_scale - ls_ref);
      Y.noalias() += c * (t.fact->U * (t.fact->sigma.asDiagonal() * (t.fact->V * X)));
    }
    return Y;
  };
  lm.apply_adjoint = [&terms, ls_ref](const MatC& X) -> MatC {
    MatC Y = MatC::Zero(X.rows(), X.cols());
    for (const auto& t : terms) {
      if (t.fact->rank() == 0) continue;
      const cxd c = std::conj(t.weight) * std::exp(t.fact->log_scale - ls_ref);
      Y.noalias() += c * (t.fact->V.adjoint() * (t.fact->sigma.asDiagonal() * (t.fact->U.adjoint() * X)));
    }
    return Y;
  };

  TruncatedFactorization out = truncated_svd(lm, std::min(p, n), seed);
  out.log_scale += ls_ref;
  out.rank_warning = out.rank_warning || warn;

  // drop the numerically-zero tail so ranks do not bloat downstream
  int r = out.rank();
  while (r > 0 && !(out.sigma(r - 1) > 1e-15)) --r;
  if (r < out.rank()) {
    out.U = out.U.leftCols(r).eval();
    out.sigma = out.sigma.head(r).eval();
    out.V = out.V.topRows(r).eval();
  }
  if (r == 0) return TruncatedFactorization::zero(n);
  return out;
}

namespace {

// Whole-chain linear maps over the ring range [first, first+len).
struct ChainCtx {
  const MpsState* state;
  const HamiltonianSpec* spec;
  int first, len;

  int site(int off) const { return (first + off) % state->N; }
  const std::vector<MatC>& A(int off) const {
    return state->tensors[static_cast<size_t>(site(off))];
  }
};

// T- and B-channel: E_first[op_first] ... E_last[op_last] applied to X.
MatC chain_apply(const ChainCtx& c, const SiteOperator* first_op,
                 const SiteOperator* last_op, const MatC& X, bool adjoint) {
  MatC Y = X;
  auto op_at = [&](int off) -> const SiteOperator* {
    if (off == 0 && first_op) return first_op;
    if (off == c.len - 1 && last_op) return last_op;
    return nullptr;
  };
  if (!adjoint) {
    for (int off = c.len - 1; off >= 0; --off)
      Y = TransferOp(c.A(off), op_at(off)).apply(Y);
  } else {
    for (int off = 0; off < c.len; ++off)
      Y = TransferOp(c.A(off), op_at(off)).apply(Y, TransferOp::Mode::Adjoint);
  }
  return Y;
}

// H-channel: sum over the len-1 interior bonds of the chain.
MatC hchain_apply(const ChainCtx& c, const MatC& X, bool adjoint) {
  MatC zero = MatC::Zero(X.rows(), X.cols());
  if (c.len < 2) return zero;

  if (!adjoint) {
    // right-to-left: Tcur = E_off ... E_last X, Hacc accumulates closed bonds
    MatC Tprev = X;                                      // chain from off+2
    MatC Tcur = TransferOp(c.A(c.len - 1), nullptr).apply(X);
    MatC Hacc = zero;
    for (int off = c.len - 2; off >= 0; --off) {
      const int j = c.site(off);
      MatC Hnew = TransferOp(c.A(off), nullptr).apply(Hacc);
      for (const auto& t : c.spec->bond_terms(j)) {
        MatC B = TransferOp(c.A(off + 1), &t.right_op).apply(Tprev);
        Hnew.noalias() += t.strength * TransferOp(c.A(off), &t.left_op).apply(B);
      }
      Hacc.swap(Hnew);
      Tprev = Tcur;
      if (off > 0) Tcur = TransferOp(c.A(off), nullptr).apply(Tcur);
    }
    return Hacc;
  }

  // adjoint: mirror pass, left-to-right with adjoint applications
  MatC Tprev = X;  // adjoint chain up to off-2
  MatC Tcur = TransferOp(c.A(0), nullptr).apply(X, TransferOp::Mode::Adjoint);
  MatC Hacc = zero;
  for (int off = 1; off < c.len; ++off) {
    const int jp = c.site(off - 1);
    MatC Hnew = TransferOp(c.A(off), nullptr).apply(Hacc, TransferOp::Mode::Adjoint);
    for (const auto& t : c.spec->bond_terms(jp)) {
      MatC B = TransferOp(c.A(off - 1), &t.left_op).apply(Tprev, TransferOp::Mode::Adjoint);
      Hnew.noalias() += std::conj(t.strength) *
                        TransferOp(c.A(off), &t.right_op).apply(B, TransferOp::Mode::Adjoint);
    }
    Hacc.swap(Hnew);
    Tprev = Tcur;
    if (off + 1 < c.len) Tcur = TransferOp(c.A(off), nullptr).apply(Tcur, TransferOp::Mode::Adjoint);
  }
  return Hacc;
}

}  // namespace

SectorCache build_sector_cache(const MpsState& state, const HamiltonianSpec& spec,
                               int first, int len, int p, std::uint64_t seed) {
  state.validate();
  const int N = state.N;
  require(spec.sites() == N && spec.phys_dim() == state.d,
          "build_sector_cache: spec/state mismatch");
  require(len >= 2 && len <= N - 1, "build_sector_cache: range length must be in [2, N-1]");
  require(first >= 0 && first < N, "build_sector_cache: bad range start");
  const int n = state.m * state.m;
  require(p >= 1 && p <= n, "build_sector_cache: p must lie in [1, m^2]");

  ChainCtx ctx{&state, &spec, first, len};
  SectorCache out;
  out.first = first;
  out.len = len;

  LinearMap tmap{n,
                 [&](const MatC& X) { return chain_apply(ctx, nullptr, nullptr, X, false); },
                 [&](const MatC& X) { return chain_apply(ctx, nullptr, nullptr, X, true); }};
  out.T = truncated_svd(tmap, p, derive_seed(seed, 1));

  const int left_bond = (first - 1 + N) % N;
  const auto& lterms = spec.bond_terms(left_bond);
  out.B_left.resize(lterms.size());
  for (size_t i = 0; i < lterms.size(); ++i) {
    const SiteOperator* op = &lterms[i].right_op;
    LinearMap bmap{n,
                   [&, op](const MatC& X) { return chain_apply(ctx, op, nullptr, X, false); },
                   [&, op](const MatC& X) { return chain_apply(ctx, op, nullptr, X, true); }};
    out.B_left[i] = truncated_svd(bmap, p, derive_seed(seed, 2, i));
  }

  const int right_bond = (first + len - 1) % N;
  const auto& rterms = spec.bond_terms(right_bond);
  out.B_right.resize(rterms.size());
  for (size_t i = 0; i < rterms.size(); ++i) {
    const SiteOperator* op = &rterms[i].left_op;
    LinearMap bmap{n,
                   [&, op](const MatC& X) { return chain_apply(ctx, nullptr, op, X, false); },
                   [&, op](const MatC& X) { return chain_apply(ctx, nullptr, op, X, true); }};
    out.B_right[i] = truncated_svd(bmap, p, derive_seed(seed, 3, i));
  }

  bool any_interior = false;
  for (int off = 0; off + 1 < len; ++off)
    if (!spec.bond_terms((first + off) % N).empty()) any_interior = true;
  if (any_interior) {
    LinearMap hmap{n, [&](const MatC& X) { return hchain_apply(ctx, X, false); },
                   [&](const MatC& X) { return hchain_apply(ctx, X, true); }};
    out.H = truncated_svd(hmap, p, derive_seed(seed, 4));
  } else {
    out.H = TruncatedFactorization::zero(n);
  }
  return out;
}

SectorCache chain_extend_right(const SectorCache& c, const MpsState& state,
                               const HamiltonianSpec& spec, int p, std::uint64_t seed) {
  const int N = state.N;
  require(c.len >= 1 && c.len + 1 <= N - 1, "chain_extend_right: chain too long");
  const int site = (c.first + c.len) % N;
  const auto& A = state.tensors[static_cast<size_t>(site)];
  TransferOp E(A, nullptr);

  SectorCache out;
  out.first = c.first;
  out.len = c.len + 1;
  out.T = extend_right(c.T, E);

  out.B_left.resize(c.B_left.size());
  for (size_t i = 0; i < c.B_left.size(); ++i) out.B_left[i] = extend_right(c.B_left[i], E);

  const auto& nterms = spec.bond_terms(site);
  out.B_right.resize(nterms.size());
  for (size_t i = 0; i < nterms.size(); ++i)
    out.B_right[i] = extend_right(c.T, TransferOp(A, &nterms[i].left_op));

  // bond (old last, site) becomes interior
  const int jb = (c.first + c.len - 1) % N;
  const auto& jterms = spec.bond_terms(jb);
  std::vector<TruncatedFactorization> parts;
  std::vector<WeightedFact> sum;
  if (c.H.rank() > 0) {
    parts.push_back(extend_right(c.H, E));
    sum.push_back({cxd(1.0, 0.0), nullptr});
  }
  for (size_t i = 0; i < jterms.size(); ++i) {
    parts.push_back(extend_right(c.B_right[i], TransferOp(A, &jterms[i].right_op)));
    sum.push_back({jterms[i].strength, nullptr});
  }
  for (size_t i = 0; i < sum.size(); ++i) sum[i].fact = &parts[i];
  out.H = sum.empty() ? TruncatedFactorization::zero(c.T.dim())
                      : fact_sum(sum, p, derive_seed(seed, 5, static_cast<std::uint64_t>(site)));
  return out;
}

SectorCache chain_extend_left(const MpsState& state, const HamiltonianSpec& spec,
                              const SectorCache& c, int p, std::uint64_t seed) {
  const int N = state.N;
  require(c.len >= 1 && c.len + 1 <= N - 1, "chain_extend_left: chain too long");
  const int site = (c.first - 1 + N) % N;
  const auto& A = state.tensors[static_cast<size_t>(site)];
  TransferOp E(A, nullptr);

  SectorCache out;
  out.first = site;
  out.len = c.len + 1;
  out.T = extend_left(E, c.T);

  out.B_right.resize(c.B_right.size());
  for (size_t i = 0; i < c.B_right.size(); ++i) out.B_right[i] = extend_left(E, c.B_right[i]);

  const int new_left_bond = (site - 1 + N) % N;
  const auto& nterms = spec.bond_terms(new_left_bond);
  out.B_left.resize(nterms.size());
  for (size_t i = 0; i < nterms.size(); ++i)
    out.B_left[i] = extend_left(TransferOp(A, &nterms[i].right_op), c.T);

  // bond (site, old first) becomes interior
  const auto& jterms = spec.bond_terms(site);
  std::vector<TruncatedFactorization> parts;
  std::vector<WeightedFact> sum;
  if (c.H.rank() > 0) {
    parts.push_back(extend_left(E, c.H));
    sum.push_back({cxd(1.0, 0.0), nullptr});
  }
  for (size_t i = 0; i < jterms.size(); ++i) {
    parts.push_back(extend_left(TransferOp(A, &jterms[i].left_op), c.B_left[i]));
    sum.push_back({jterms[i].strength, nullptr});
  }
  for (size_t i = 0; i < sum.size(); ++i) sum[i].fact = &parts[i];
  out.H = sum.empty() ? TruncatedFactorization::zero(c.T.dim())
                      : fact_sum(sum, p, derive_seed(seed, 6, static_cast<std::uint64_t>(site)));
  return out;
}

SectorCache chain_merge(const SectorCache& P, const SectorCache& Q,
                        const HamiltonianSpec& spec, int p, std::uint64_t seed) {
  const int N = spec.sites();
  require((P.first + P.len) % N == Q.first, "chain_merge: chains not adjacent");
  require(P.len + Q.len <= N - 1, "chain_merge: merged chain too long");

  SectorCache out;
  out.first = P.first;
  out.len = P.len + Q.len;
  out.T = fact_product(P.T, Q.T);

  out.B_left.resize(P.B_left.size());
  for (size_t i = 0; i < P.B_left.size(); ++i) out.B_left[i] = fact_product(P.B_left[i], Q.T);
  out.B_right.resize(Q.B_right.size());
  for (size_t i = 0; i < Q.B_right.size(); ++i) out.B_right[i] = fact_product(P.T, Q.B_right[i]);

  const int jb = P.last(N);
  const auto& jterms = spec.bond_terms(jb);
  require(jterms.size() == P.B_right.size() && jterms.size() == Q.B_left.size(),
          "chain_merge: junction cache mismatch");
  std::vector<TruncatedFactorization> parts;
  std::vector<WeightedFact> sum;
  if (P.H.rank() > 0) {
    parts.push_back(fact_product(P.H, Q.T));
    sum.push_back({cxd(1.0, 0.0), nullptr});
  }
  if (Q.H.rank() > 0) {
    parts.push_back(fact_product(P.T, Q.H));
    sum.push_back({cxd(1.0, 0.0), nullptr});
  }
  for (size_t i = 0; i < jterms.size(); ++i) {
    parts.push_back(fact_product(P.B_right[i], Q.B_left[i]));
    sum.push_back({jterms[i].strength, nullptr});
  }
  for (size_t i = 0; i < sum.size(); ++i) sum[i].fact = &parts[i];
  out.H = sum.empty() ? TruncatedFactorization::zero(P.T.dim())
                      : fact_sum(sum, p, derive_seed(seed, 7));
  return out;
}

}  // namespace mpsring
