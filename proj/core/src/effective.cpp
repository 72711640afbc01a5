#include "mpsring/effective.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace mpsring {

using RowMatC = Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

// Stacked quadratic-form kernel. Blocks of A, B are m x m; the result is
// sum_j A_j * Xmat_c * B_j applied to every column c of X (m^2 x q).
MatC stacked_sandwich(const MatC& A, const MatC& B, int r, int m, const MatC& X) {
  const int n = m * m;
  const int q = static_cast<int>(X.cols());
  MatC Y = MatC::Zero(n, q);
  if (r == 0 || q == 0) return Y;

  MatC XH(m, static_cast<Eigen::Index>(m) * q);
  for (int c = 0; c < q; ++c)
    XH.block(0, static_cast<Eigen::Index>(c) * m, m, m) =
        Eigen::Map<const RowMatC>(X.col(c).data(), m, m);

  MatC W(static_cast<Eigen::Index>(r) * m, static_cast<Eigen::Index>(m) * q);
  W.noalias() = A * XH;

  MatC WV(static_cast<Eigen::Index>(m) * q, m);
  MatC Z(static_cast<Eigen::Index>(m) * q, m);
  for (int j = 0; j < r; ++j) {
    for (int c = 0; c < q; ++c)
      WV.middleRows(static_cast<Eigen::Index>(c) * m, m) =
          W.block(static_cast<Eigen::Index>(j) * m, static_cast<Eigen::Index>(c) * m, m, m);
    Z.noalias() = WV * B.middleRows(static_cast<Eigen::Index>(j) * m, m);
    for (int c = 0; c < q; ++c)
      for (int a = 0; a < m; ++a)
        Y.col(c).segment(static_cast<Eigen::Index>(a) * m, m) +=
            Z.row(static_cast<Eigen::Index>(c) * m + a).transpose();
  }
  return Y;
}

}  // namespace

struct Stacks {
  MatC L, Rt;    // plain:    sum_j (sigma_j matr(V_j)) Xmat (mat(U_j))^T
  MatC La, Rta;  // adjoint:  sum_j (sigma_j matr(V_j))^dag Xmat conj(mat(U_j))
  int r = 0;
};

struct EffectiveKernels {
  std::vector<Stacks> group;
  Stacks tenv;
};

namespace {

Stacks build_stacks(const TruncatedFactorization& f, int m) {
  Stacks s;
  s.r = f.rank();
  s.L.resize(static_cast<Eigen::Index>(s.r) * m, m);
  s.Rt.resize(static_cast<Eigen::Index>(s.r) * m, m);
  s.La.resize(static_cast<Eigen::Index>(s.r) * m, m);
  s.Rta.resize(static_cast<Eigen::Index>(s.r) * m, m);
  MatC Vm(m, m);
  for (int j = 0; j < s.r; ++j) {
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) Vm(a, b) = f.V(j, a * m + b);
    Eigen::Map<const RowMatC> Um(f.U.col(j).data(), m, m);
    const double sg = f.sigma(j);
    s.L.middleRows(static_cast<Eigen::Index>(j) * m, m) = sg * Vm;
    s.Rt.middleRows(static_cast<Eigen::Index>(j) * m, m) = Um.transpose();
    s.La.middleRows(static_cast<Eigen::Index>(j) * m, m) = sg * Vm.adjoint();
    s.Rta.middleRows(static_cast<Eigen::Index>(j) * m, m) = Um.conjugate();
  }
  return s;
}

// Per-block kron application: every site matrix Amat -> P * Amat * R.
MatC block_kron_apply(const MatC& P, const MatC& R, const MatC& X, int d, int m) {
  const int n = m * m;
  MatC Y(X.rows(), X.cols());
  MatC tmp(m, m);
  for (int c = 0; c < X.cols(); ++c)
    for (int i = 0; i < d; ++i) {
      Eigen::Map<const RowMatC> Am(X.col(c).data() + static_cast<Eigen::Index>(i) * n, m, m);
      tmp.noalias() = P * Am * R;
      Eigen::Map<RowMatC>(Y.col(c).data() + static_cast<Eigen::Index>(i) * n, m, m) = tmp;
    }
  return Y;
}

MatC matr_row(const MatC& V, int j, int m) {
  MatC out(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out(a, b) = V(j, a * m + b);
  return out;
}

MatC phase_fixed_hermitian(const MatC& Nmat) {
  cxd tr = Nmat.trace();
  if (std::abs(tr) < 1e-300) {
    // fall back to the largest entry for the phase reference
    Eigen::Index ar = 0, ac = 0;
    Nmat.cwiseAbs().maxCoeff(&ar, &ac);
    tr = Nmat(ar, ac);
  }
  const cxd ph = (std::abs(tr) > 0) ? tr / std::abs(tr) : cxd(1.0, 0.0);
  MatC fixed = Nmat / ph;
  return 0.5 * (fixed + fixed.adjoint());
}

// Inverse square root with eigenvalues clamped at 1e-12 * max (Moore-Penrose
// threshold, kept invertible).
void inv_sqrt_clamped(const MatC& Nmat, MatC& X, MatC& Xinv) {
  const int m = static_cast<int>(Nmat.rows());
  Eigen::SelfAdjointEigenSolver<MatC> es(Nmat);
  const VecR& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (!(lmax > 0) || !std::isfinite(lmax)) {
    X = MatC::Identity(m, m);
    Xinv = MatC::Identity(m, m);
    return;
  }
  const double floor = 1e-12 * lmax;
  VecR inv_sqrt(m), sqrt_v(m);
  for (int i = 0; i < m; ++i) {
    const double v = std::max(ev(i), floor);
    inv_sqrt(i) = 1.0 / std::sqrt(v);
    sqrt_v(i) = std::sqrt(v);
  }
  X = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
  Xinv = es.eigenvectors() * sqrt_v.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

const EffectiveKernels& EffectiveProblem::kernels() const {
  if (!kernels_) {
    auto kc = std::make_shared<EffectiveKernels>();
    kc->group.reserve(groups_.size());
    for (const auto& g : groups_) kc->group.push_back(build_stacks(g.G, m_));
    if (!dense_m_) kc->tenv = build_stacks(Tenv_, m_);
    kernels_ = std::move(kc);
  }
  return *kernels_;
}

EffectiveProblem EffectiveProblem::from_chains(const SectorCache& left,
                                               const SectorCache& right,
                                               const HamiltonianSpec& spec, int k) {
  const int N = spec.sites();
  require(k >= 0 && k < N, "assemble: site out of range");
  require(left.len >= 1 && right.len >= 1 && left.len + right.len == N - 1,
          "assemble: inconsistent cache ranges");
  require(right.first == (k + 1) % N, "assemble: inconsistent cache ranges");
  require((left.first + left.len) % N == k, "assemble: inconsistent cache ranges");
  require((right.first + right.len) % N == left.first,
          "assemble: inconsistent cache ranges");

  EffectiveProblem prob;
  prob.d_ = spec.phys_dim();
  const int n = left.T.dim();
  prob.m_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  require(prob.m_ * prob.m_ == n, "assemble: bad factorization dimension");
  prob.block_ = n;
  prob.site_ = k;

  prob.Tenv_ = fact_product(right.T, left.T);
  require(prob.Tenv_.rank() > 0, "assemble: null environment");
  prob.norm_log_scale_ = prob.Tenv_.log_scale;
  const double ls_ref = prob.norm_log_scale_;

  auto push_group = [&](TruncatedFactorization G, const SiteOperator* sigma, cxd w) {
    if (G.rank() == 0 || w == cxd(0.0, 0.0)) return;
    const double rel = G.log_scale - ls_ref;
    require(std::abs(rel) < 300.0, "assemble: scale overflow between chain caches");
    HGroup g;
    g.G = std::move(G);
    g.G.log_scale = 0.0;
    if (sigma) g.sigma = *sigma;
    g.coeff = w * std::exp(rel);
    prob.groups_.push_back(std::move(g));
  };

  // in-chain Hamiltonian sums
  push_group(fact_product(right.H, left.T), nullptr, cxd(1.0, 0.0));
  push_group(fact_product(right.T, left.H), nullptr, cxd(1.0, 0.0));

  // junction bond between the two chains
  const int jb = right.last(N);
  const auto& jterms = spec.bond_terms(jb);
  require(jterms.size() == right.B_right.size() && jterms.size() == left.B_left.size(),
          "assemble: junction cache mismatch");
  for (size_t i = 0; i < jterms.size(); ++i)
    push_group(fact_product(right.B_right[i], left.B_left[i]), nullptr, jterms[i].strength);

  // bond (k-1, k): operator at the last site of the left chain
  const int bl = (k - 1 + N) % N;
  const auto& lterms = spec.bond_terms(bl);
  require(lterms.size() == left.B_right.size(), "assemble: left-edge cache mismatch");
  for (size_t i = 0; i < lterms.size(); ++i)
    push_group(fact_product(right.T, left.B_right[i]), &lterms[i].right_op,
               lterms[i].strength);

  // bond (k, k+1): operator at the first site of the right chain
  const auto& rterms = spec.bond_terms(k);
  require(rterms.size() == right.B_left.size(), "assemble: right-edge cache mismatch");
  for (size_t i = 0; i < rterms.size(); ++i)
    push_group(fact_product(right.B_left[i], left.T), &rterms[i].left_op,
               rterms[i].strength);

  return prob;
}

EffectiveProblem EffectiveProblem::from_dense(MatC H, MatC M, int d) {
  require(H.rows() == H.cols() && M.rows() == M.cols(), "from_dense: square blocks");
  const int n2 = static_cast<int>(M.rows());
  const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n2))));
  require(H.rows() == static_cast<Eigen::Index>(d) * n2, "from_dense: H dim != d*block");
  EffectiveProblem prob;
  prob.d_ = d;
  prob.m_ = (m * m == n2) ? m : 0;  // gauge available only on bond-pair spaces
  prob.block_ = n2;
  prob.dense_h_ = std::move(H);
  prob.dense_m_ = std::move(M);
  return prob;
}

MatC EffectiveProblem::gauge_in(const MatC& X) const {
  if (!gauge_) return X;
  return block_kron_apply(gauge_->X.adjoint(), gauge_->Y.conjugate(), X, d_, m_);
}

MatC EffectiveProblem::gauge_out(const MatC& X) const {
  if (!gauge_) return X;
  return block_kron_apply(gauge_->X, gauge_->Y.transpose(), X, d_, m_);
}

MatC EffectiveProblem::apply_groups(const MatC& X, bool adjoint) const {
  const int n = block_;
  const EffectiveKernels& kc = kernels();
  MatC Y = MatC::Zero(X.rows(), X.cols());
  for (size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto& g = groups_[gi];
    const Stacks& st = kc.group[gi];
    const bool ident = (g.sigma.size() == 0);
    const cxd c = adjoint ? std::conj(g.coeff) : g.coeff;
    for (int i = 0; i < d_; ++i) {
      bool needed = ident;
      if (!ident)
        for (int ip = 0; ip < d_ && !needed; ++ip)
          needed = adjoint ? (g.sigma(i, ip) != cxd(0.0, 0.0))
                           : (g.sigma(ip, i) != cxd(0.0, 0.0));
      if (!needed) continue;
      MatC Si = adjoint
                    ? stacked_sandwich(st.La, st.Rta, st.r, m_, X.middleRows(static_cast<Eigen::Index>(i) * n, n))
                    : stacked_sandwich(st.L, st.Rt, st.r, m_, X.middleRows(static_cast<Eigen::Index>(i) * n, n));
      if (ident) {
        Y.middleRows(static_cast<Eigen::Index>(i) * n, n) += c * Si;
      } else {
        for (int ip = 0; ip < d_; ++ip) {
          const cxd s = adjoint ? std::conj(g.sigma(i, ip)) : g.sigma(ip, i);
          if (s == cxd(0.0, 0.0)) continue;
          Y.middleRows(static_cast<Eigen::Index>(ip) * n, n) += (c * s) * Si;
        }
      }
    }
  }
  return Y;
}

MatC EffectiveProblem::apply_M(const MatC& X, bool adjoint) const {
  if (dense_m_) return adjoint ? MatC(dense_m_->adjoint() * X) : MatC(*dense_m_ * X);
  const Stacks& st = kernels().tenv;
  return adjoint ? stacked_sandwich(st.La, st.Rta, st.r, m_, X)
                 : stacked_sandwich(st.L, st.Rt, st.r, m_, X);
}

MatC EffectiveProblem::gauged_base_H(const MatC& X, bool adjoint) const {
  MatC X1 = gauge_in(X);
  MatC Y;
  if (dense_h_)
    Y = adjoint ? MatC(dense_h_->adjoint() * X1) : MatC(*dense_h_ * X1);
  else
    Y = apply_groups(X1, adjoint);
  return gauge_out(Y);
}

MatC EffectiveProblem::apply_H_block(const MatC& X) const {
  MatC out;
  if (sur_) {
    const auto& s = *sur_;
    MatC a = s.U * (s.s.asDiagonal() * (s.V * X));
    MatC b = s.V.adjoint() * (s.s.asDiagonal() * (s.U.adjoint() * X));
    out = 0.5 * (a + b);
  } else {
    out = 0.5 * (gauged_base_H(X, false) + gauged_base_H(X, true));
  }
  if (eps_ > 0) out += std::sqrt(eps_) * X;
  return out;
}

MatC EffectiveProblem::apply_N_block(const MatC& X) const {
  const int n = block_;
  MatC X1 = gauge_in(X);
  MatC Y(X.rows(), X.cols());
  for (int i = 0; i < d_; ++i) {
    const MatC& blk = X1.middleRows(static_cast<Eigen::Index>(i) * n, n);
    Y.middleRows(static_cast<Eigen::Index>(i) * n, n) =
        0.5 * (apply_M(blk, false) + apply_M(blk, true));
  }
  MatC out = gauge_out(Y);
  if (eps_ > 0) out += eps_ * X;
  return out;
}

VecC EffectiveProblem::apply_H(const VecC& x) const {
  require(static_cast<int>(x.size()) == dim(), "apply_H: dimension mismatch");
  return apply_H_block(x);
}

VecC EffectiveProblem::apply_N(const VecC& x) const {
  require(static_cast<int>(x.size()) == dim(), "apply_N: dimension mismatch");
  return apply_N_block(x);
}

VecC EffectiveProblem::apply_H_exact(const VecC& x) const {
  require(static_cast<int>(x.size()) == dim(), "apply_H_exact: dimension mismatch");
  MatC out = 0.5 * (gauged_base_H(x, false) + gauged_base_H(x, true));
  if (eps_ > 0) out += std::sqrt(eps_) * x;
  return out;
}

std::pair<double, double> EffectiveProblem::rayleigh_parts(const VecC& x) const {
  require(static_cast<int>(x.size()) == dim(), "rayleigh_parts: dimension mismatch");
  MatC Hx = 0.5 * (gauged_base_H(x, false) + gauged_base_H(x, true));
  const int n = block_;
  MatC X1 = gauge_in(x);
  MatC Y(x.size(), 1);
  for (int i = 0; i < d_; ++i) {
    const MatC& blk = X1.middleRows(static_cast<Eigen::Index>(i) * n, n);
    Y.middleRows(static_cast<Eigen::Index>(i) * n, n) =
        0.5 * (apply_M(blk, false) + apply_M(blk, true));
  }
  MatC Nx = gauge_out(Y);
  return {(x.adjoint() * Hx)(0).real(), (x.adjoint() * Nx)(0).real()};
}

MatC EffectiveProblem::dense_H() const { return apply_H_block(MatC::Identity(dim(), dim())); }

MatC EffectiveProblem::dense_N() const { return apply_N_block(MatC::Identity(dim(), dim())); }

EffectiveProblem assemble(const SectorCache& left, const SectorCache& right,
                          const HamiltonianSpec& spec, int k) {
  return EffectiveProblem::from_chains(left, right, spec, k);
}

EffectiveProblem regularize(EffectiveProblem prob, double eps) {
  require(eps >= 0 && std::isfinite(eps), "regularize: eps must be >= 0");
  prob.eps_ = eps;
  return prob;
}

std::pair<EffectiveProblem, GaugePair> stabilize_gauge(EffectiveProblem prob, int p,
                                                       std::uint64_t seed) {
  require(!prob.gauge_, "stabilize_gauge: gauge already set");
  require(!prob.sur_, "stabilize_gauge: must precede truncate_hamiltonian");
  require(prob.m_ >= 1, "stabilize_gauge: norm block is not a bond-pair space");
  const int m = prob.m_;
  const int n = m * m;

  MatC N1(m, m), N2(m, m);
  double lead = 0.0;
  if (prob.dense_m_) {
    // operator-Schmidt decomposition via the reshuffled matrix
    MatC R(n, n);
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c)
        for (int b = 0; b < m; ++b)
          for (int dd = 0; dd < m; ++dd)
            R(c * m + dd, a * m + b) = (*prob.dense_m_)(a * m + c, b * m + dd);
    TruncatedFactorization f =
        truncated_svd(map_from_dense(R), std::min(std::max(p, 1), n), seed);
    require(f.rank() > 0, "stabilize_gauge: null norm operator");
    lead = std::exp(f.log_scale) * f.sigma(0);
    N1 = matr_row(f.V, 0, m);
    Eigen::Map<const RowMatC> Um(f.U.col(0).data(), m, m);
    N2 = Um;
  } else {
    require(prob.Tenv_.rank() > 0, "stabilize_gauge: null norm operator");
    lead = std::exp(prob.norm_log_scale_) * prob.Tenv_.sigma(0);
    N1 = matr_row(prob.Tenv_.V, 0, m);
    Eigen::Map<const RowMatC> Um(prob.Tenv_.U.col(0).data(), m, m);
    N2 = Um;
  }
  if (!(lead > 1e-14))
    throw degenerate_norm_error("stabilize_gauge: leading norm singular value <= 1e-14");

  // split the in-frame leading weight symmetrically between the two sides
  const double s1 = prob.dense_m_ ? lead : prob.Tenv_.sigma(0);
  const double half = std::sqrt(s1);
  MatC N1h = phase_fixed_hermitian(half * N1);
  MatC N2h = phase_fixed_hermitian(half * N2);

  GaugePair g;
  inv_sqrt_clamped(N1h, g.X, g.Xinv);
  inv_sqrt_clamped(N2h, g.Y, g.Yinv);

  prob.gauge_ = g;
  return {std::move(prob), g};
}

EffectiveProblem truncate_hamiltonian(EffectiveProblem prob, int s, std::uint64_t seed) {
  require(s >= 0, "truncate_hamiltonian: s must be >= 0");
  require(!prob.sur_, "truncate_hamiltonian: surrogate already set");
  const int n = prob.dim();
  if (s == 0 || s >= n) return prob;  // uncompressed

  LinearMap lm;
  lm.n = n;
  lm.apply = [&prob](const MatC& X) { return prob.gauged_base_H(X, false); };
  lm.apply_adjoint = [&prob](const MatC& X) { return prob.gauged_base_H(X, true); };
  TruncatedFactorization f = truncated_svd(lm, s, seed);

  EffectiveProblem::Surrogate sur;
  sur.U = std::move(f.U);
  sur.V = std::move(f.V);
  sur.s = std::exp(f.log_scale) * f.sigma;
  prob.sur_ = std::move(sur);
  return prob;
}

std::vector<MatC> split_site_vector(const VecC& x, int d, int m) {
  require(static_cast<int>(x.size()) == d * m * m, "split_site_vector: bad size");
  std::vector<MatC> out(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    out[static_cast<size_t>(i)] =
        Eigen::Map<const RowMatC>(x.data() + static_cast<Eigen::Index>(i) * m * m, m, m);
  return out;
}

VecC join_site_matrices(const std::vector<MatC>& As) {
  require(!As.empty(), "join_site_matrices: empty input");
  const int d = static_cast<int>(As.size());
  const int m = static_cast<int>(As[0].rows());
  VecC x(static_cast<Eigen::Index>(d) * m * m);
  for (int i = 0; i < d; ++i) {
    require(As[static_cast<size_t>(i)].rows() == m && As[static_cast<size_t>(i)].cols() == m,
            "join_site_matrices: inconsistent shapes");
    Eigen::Map<RowMatC>(x.data() + static_cast<Eigen::Index>(i) * m * m, m, m) =
        As[static_cast<size_t>(i)];
  }
  return x;
}

}  // namespace mpsring
