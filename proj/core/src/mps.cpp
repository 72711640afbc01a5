#include "mpsring/mps.hpp"

#include <Eigen/SVD>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mpsring {

using RowMatC = Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void MpsState::validate() const {
  require(N >= 2 && d >= 1 && m >= 1, "MpsState: bad dimensions");
  require(static_cast<int>(tensors.size()) == N, "MpsState: wrong site count");
  for (const auto& site : tensors) {
    require(static_cast<int>(site.size()) == d, "MpsState: wrong physical count");
    for (const auto& A : site) {
      require(A.rows() == m && A.cols() == m, "MpsState: wrong tensor shape");
      require(A.allFinite(), "MpsState: non-finite tensor entries");
    }
  }
}

MpsState random_mps(int N, int d, int m, std::uint64_t seed) {
  require(N >= 2, "random_mps: N must be >= 2");
  require(d >= 2, "random_mps: d must be >= 2");
  require(m >= 1, "random_mps: m must be >= 1");

  for (int attempt = 0; attempt < 8; ++attempt) {
    Rng rng(derive_seed(seed, 0x6d70735fULL, static_cast<std::uint64_t>(attempt)));
    MpsState st;
    st.N = N;
    st.d = d;
    st.m = m;
    st.tensors.assign(static_cast<size_t>(N), std::vector<MatC>(static_cast<size_t>(d)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d) * m);
    for (int k = 0; k < N; ++k)
      for (int i = 0; i < d; ++i) {
        MatC A(m, m);
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) A(a, b) = scale * rng.cgaussian();
        st.tensors[static_cast<size_t>(k)][static_cast<size_t>(i)] = std::move(A);
      }
    double ln = norm_log(st);
    if (!std::isfinite(ln)) continue;
    const double f = std::exp(-ln / (2.0 * N));
    for (auto& site : st.tensors)
      for (auto& A : site) A *= f;
    return st;
  }
  throw std::runtime_error("random_mps: degenerate random state");
}

MpsState apply_gauge(const MpsState& state, int bond, const MatC& V, const MatC& W) {
  state.validate();
  require(bond >= 0 && bond < state.N, "apply_gauge: bond out of range");
  require(V.rows() == state.m && V.cols() == state.m && W.rows() == state.m &&
              W.cols() == state.m,
          "apply_gauge: gauge matrices must be m x m");
  require((W * V - MatC::Identity(state.m, state.m)).norm() <= 1e-10,
          "apply_gauge: W*V must equal the identity");
  Eigen::JacobiSVD<MatC> svd(V);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  require(smin > 0 && smax / smin <= 1e12, "apply_gauge: V is numerically singular");

  MpsState out = state;
  const int next = (bond + 1) % state.N;
  for (int i = 0; i < state.d; ++i) {
    out.tensors[static_cast<size_t>(bond)][static_cast<size_t>(i)] =
        state.tensors[static_cast<size_t>(bond)][static_cast<size_t>(i)] * W;
    out.tensors[static_cast<size_t>(next)][static_cast<size_t>(i)] =
        V * state.tensors[static_cast<size_t>(next)][static_cast<size_t>(i)];
  }
  return out;
}

TransferOp::TransferOp(const std::vector<MatC>& A, const SiteOperator* op) {
  d_ = static_cast<int>(A.size());
  m_ = static_cast<int>(A[0].rows());
  MatC sigma = op ? *op : MatC::Identity(d_, d_);
  require(sigma.rows() == d_ && sigma.cols() == d_, "TransferOp: operator dim mismatch");
  for (int ip = 0; ip < d_; ++ip)
    for (int i = 0; i < d_; ++i) {
      const cxd c = sigma(ip, i);
      if (c == cxd(0.0, 0.0)) continue;
      const MatC& Ap = A[static_cast<size_t>(ip)];
      const MatC& Ai = A[static_cast<size_t>(i)];
      plain_.push_back({Ap.conjugate(), Ai.transpose(), c});
      trans_.push_back({Ap.adjoint(), Ai, c});
      adj_.push_back({Ap.transpose(), Ai.conjugate(), std::conj(c)});
    }
}

MatC TransferOp::apply(const MatC& X, Mode mode) const {
  const int n = m_ * m_;
  require(static_cast<int>(X.rows()) == n, "TransferOp::apply: dimension mismatch");
  const int q = static_cast<int>(X.cols());
  const auto& terms = (mode == Mode::Plain) ? plain_
                      : (mode == Mode::Transpose) ? trans_
                                                  : adj_;

  MatC XH(m_, static_cast<Eigen::Index>(m_) * q);
  for (int j = 0; j < q; ++j)
    XH.block(0, static_cast<Eigen::Index>(j) * m_, m_, m_) =
        Eigen::Map<const RowMatC>(X.col(j).data(), m_, m_);

  MatC Y = MatC::Zero(n, q);
  MatC T1(m_, static_cast<Eigen::Index>(m_) * q);
  MatC TV(static_cast<Eigen::Index>(m_) * q, m_);
  MatC T2(static_cast<Eigen::Index>(m_) * q, m_);
  for (const auto& t : terms) {
    T1.noalias() = t.L * XH;
    for (int j = 0; j < q; ++j)
      TV.middleRows(static_cast<Eigen::Index>(j) * m_, m_) =
          T1.block(0, static_cast<Eigen::Index>(j) * m_, m_, m_);
    T2.noalias() = TV * t.RT;
    for (int j = 0; j < q; ++j)
      for (int a = 0; a < m_; ++a)
        Y.col(j).segment(static_cast<Eigen::Index>(a) * m_, m_) +=
            t.c * T2.row(static_cast<Eigen::Index>(j) * m_ + a).transpose();
  }
  return Y;
}

MatC TransferOp::dense() const {
  return apply(MatC::Identity(m_ * m_, m_ * m_));
}

MatC transfer_matrix(const MpsState& state, int k, const SiteOperator* op) {
  state.validate();
  require(k >= 0 && k < state.N, "transfer_matrix: site out of range");
  if (op)
    require(op->rows() == state.d && op->cols() == state.d,
            "transfer_matrix: operator dimension mismatch");
  return TransferOp(state.tensors[static_cast<size_t>(k)], op).dense();
}

Expectation expectation(const MpsState& state, const HamiltonianSpec& spec) {
  state.validate();
  require(spec.sites() == state.N, "expectation: site count mismatch");
  require(spec.phys_dim() == state.d, "expectation: physical dimension mismatch");
  const int N = state.N;
  const int n = state.m * state.m;

  std::vector<TransferOp> E;
  E.reserve(static_cast<size_t>(N));
  for (int k = 0; k < N; ++k) E.emplace_back(state.tensors[static_cast<size_t>(k)], nullptr);

  // suffix[k] = E_k * E_{k+1} * ... * E_{N-1}; suffix[N] = I
  std::vector<MatC> suffix(static_cast<size_t>(N) + 1);
  suffix[static_cast<size_t>(N)] = MatC::Identity(n, n);
  for (int k = N - 1; k >= 0; --k)
    suffix[static_cast<size_t>(k)] = E[static_cast<size_t>(k)].apply(suffix[static_cast<size_t>(k) + 1]);

  Expectation out;
  out.norm = suffix[0].trace().real();

  cxd energy(0.0, 0.0);
  MatC P = MatC::Identity(n, n);  // prefix E_0 ... E_{k-1}
  for (int k = 0; k + 1 < N; ++k) {
    for (const auto& t : spec.bond_terms(k)) {
      TransferOp eL(state.tensors[static_cast<size_t>(k)], &t.left_op);
      TransferOp eR(state.tensors[static_cast<size_t>(k) + 1], &t.right_op);
      MatC B = eR.apply(suffix[static_cast<size_t>(k) + 2]);
      MatC C = eL.apply(B);
      energy += t.strength * (P.transpose().cwiseProduct(C)).sum();
    }
    // P <- P * E_k
    P = E[static_cast<size_t>(k)].apply(P.transpose(), TransferOp::Mode::Transpose).transpose();
  }
  if (!spec.bond_terms(N - 1).empty()) {
    // ring-closure bond: Tr[ E_{N-1}[sL] E_0[sR] E_1 ... E_{N-2} ]
    MatC T = MatC::Identity(n, n);
    for (int j = N - 2; j >= 1; --j) T = E[static_cast<size_t>(j)].apply(T);
    for (const auto& t : spec.bond_terms(N - 1)) {
      TransferOp eR(state.tensors[0], &t.right_op);
      TransferOp eL(state.tensors[static_cast<size_t>(N) - 1], &t.left_op);
      MatC B = eR.apply(T);
      MatC C = eL.apply(B);
      energy += t.strength * C.trace();
    }
  }
  out.energy = energy;
  return out;
}

double norm_log(const MpsState& state) {
  state.validate();
  const int n = state.m * state.m;
  MatC T = MatC::Identity(n, n);
  double acc = 0.0;
  for (int k = state.N - 1; k >= 0; --k) {
    TransferOp E(state.tensors[static_cast<size_t>(k)], nullptr);
    T = E.apply(T);
    const double s = T.norm();
    if (!(s > 0.0) || !std::isfinite(s)) return -std::numeric_limits<double>::infinity();
    T /= s;
    acc += std::log(s);
  }
  const double tr = T.trace().real();
  if (!(tr > 0.0)) return -std::numeric_limits<double>::infinity();
  return acc + std::log(tr);
}

MpsState canonicalize_left(const MpsState& state, int upto) {
  state.validate();
  require(upto >= 1 && upto <= state.N, "canonicalize_left: upto out of range");
  MpsState out = state;
  const int m = state.m, d = state.d;
  for (int j = 0; j < upto; ++j) {
    MatC V(static_cast<Eigen::Index>(d) * m, m);
    for (int i = 0; i < d; ++i)
      V.middleRows(static_cast<Eigen::Index>(i) * m, m) =
          out.tensors[static_cast<size_t>(j)][static_cast<size_t>(i)];
    Eigen::JacobiSVD<MatC> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
    MatC U = svd.matrixU();
    MatC carry = svd.singularValues().asDiagonal() * svd.matrixV().adjoint();
    for (int i = 0; i < d; ++i)
      out.tensors[static_cast<size_t>(j)][static_cast<size_t>(i)] =
          U.middleRows(static_cast<Eigen::Index>(i) * m, m);
    const int next = (j + 1) % state.N;
    for (int i = 0; i < d; ++i)
      out.tensors[static_cast<size_t>(next)][static_cast<size_t>(i)] =
          carry * out.tensors[static_cast<size_t>(next)][static_cast<size_t>(i)];
  }
  return out;
}

MpsState canonicalize_right(const MpsState& state, int from) {
  state.validate();
  require(from >= 0 && from < state.N, "canonicalize_right: from out of range");
  MpsState out = state;
  const int m = state.m, d = state.d;
  for (int j = state.N - 1; j > from; --j) {
    MatC V(m, static_cast<Eigen::Index>(d) * m);
    for (int i = 0; i < d; ++i)
      V.middleCols(static_cast<Eigen::Index>(i) * m, m) =
          out.tensors[static_cast<size_t>(j)][static_cast<size_t>(i)];
    Eigen::JacobiSVD<MatC> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
    MatC Wd = svd.matrixV().adjoint();  // m x d*m, orthonormal rows
    MatC carry = svd.matrixU() * svd.singularValues().asDiagonal();
    for (int i = 0; i < d; ++i)
      out.tensors[static_cast<size_t>(j)][static_cast<size_t>(i)] =
          Wd.middleCols(static_cast<Eigen::Index>(i) * m, m);
    for (int i = 0; i < d; ++i)
      out.tensors[static_cast<size_t>(j) - 1][static_cast<size_t>(i)] =
          out.tensors[static_cast<size_t>(j) - 1][static_cast<size_t>(i)] * carry;
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'P', 'S', 'R', 'I', 'N', 'G', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  cp.state.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "save_checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, static_cast<std::int64_t>(cp.state.N));
  write_pod(os, static_cast<std::int64_t>(cp.state.d));
  write_pod(os, static_cast<std::int64_t>(cp.state.m));
  write_pod(os, cp.seed);
  write_pod(os, cp.sweeps_done);
  for (const auto& site : cp.state.tensors)
    for (const auto& A : site)
      for (int a = 0; a < cp.state.m; ++a)
        for (int b = 0; b < cp.state.m; ++b) {
          write_pod(os, A(a, b).real());
          write_pod(os, A(a, b).imag());
        }
  require(os.good(), "save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  require(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "load_checkpoint: bad magic in " + path);
  std::int64_t N = 0, d = 0, m = 0;
  Checkpoint cp;
  read_pod(is, N);
  read_pod(is, d);
  read_pod(is, m);
  read_pod(is, cp.seed);
  read_pod(is, cp.sweeps_done);
  require(N >= 2 && d >= 1 && m >= 1 && N < (1 << 24) && d < (1 << 16) && m < (1 << 16),
          "load_checkpoint: implausible header in " + path);
  cp.state.N = static_cast<int>(N);
  cp.state.d = static_cast<int>(d);
  cp.state.m = static_cast<int>(m);
  cp.state.tensors.assign(static_cast<size_t>(N),
                          std::vector<MatC>(static_cast<size_t>(d)));
  for (auto& site : cp.state.tensors)
    for (auto& A : site) {
      A.resize(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          double re = 0, im = 0;
          read_pod(is, re);
          read_pod(is, im);
          A(a, b) = cxd(re, im);
        }
    }
  require(is.good(), "load_checkpoint: truncated file " + path);
  cp.state.validate();
  return cp;
}

}  // namespace mpsring
