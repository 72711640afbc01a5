#include "mpsring/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

namespace mpsring::oracle {

namespace {

long pow_long(int base, int exp) {
  long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_size(const HamiltonianSpec& spec) {
  require(spec.sites() <= 14, "oracle: N capped at 14");
  require(pow_long(spec.phys_dim(), spec.sites()) <= (1L << 14),
          "oracle: Hilbert dimension capped at 2^14");
}

}  // namespace

Eigen::SparseMatrix<cxd> dense_hamiltonian(const HamiltonianSpec& spec) {
  check_size(spec);
  const int N = spec.sites();
  const int d = spec.phys_dim();
  const long dim = pow_long(d, N);

  std::vector<Eigen::Triplet<cxd>> trip;
  for (int k = 0; k < N; ++k) {
    const int kn = (k + 1) % N;
    const long sk = pow_long(d, N - 1 - k);   // stride of site k (site 0 slowest)
    const long skn = pow_long(d, N - 1 - kn);
    for (const auto& t : spec.bond_terms(k)) {
      for (long idx = 0; idx < dim; ++idx) {
        const int ik = static_cast<int>((idx / sk) % d);
        const int ikn = static_cast<int>((idx / skn) % d);
        for (int jk = 0; jk < d; ++jk) {
          const cxd l = t.left_op(jk, ik);
          if (l == cxd(0.0, 0.0)) continue;
          for (int jkn = 0; jkn < d; ++jkn) {
            const cxd r = t.right_op(jkn, ikn);
            if (r == cxd(0.0, 0.0)) continue;
            const long out = idx + (jk - ik) * sk + (jkn - ikn) * skn;
            trip.emplace_back(static_cast<int>(out), static_cast<int>(idx),
                              t.strength * l * r);
          }
        }
      }
    }
  }
  Eigen::SparseMatrix<cxd> H(static_cast<int>(dim), static_cast<int>(dim));
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

std::pair<double, DenseState> exact_ground(const HamiltonianSpec& spec) {
  check_size(spec);
  Eigen::SparseMatrix<cxd> H = dense_hamiltonian(spec);
  const long dim = H.rows();

  if (dim <= 2048) {
    MatC Hd = MatC(H);
    Eigen::SelfAdjointEigenSolver<MatC> es(Hd);
    DenseState st;
    st.amplitudes = es.eigenvectors().col(0);
    return {es.eigenvalues()(0), st};
  }

  // Lanczos with full reorthogonalization, deterministic start.
  const int max_iter = 400;
  VecC v0(dim);
  for (long i = 0; i < dim; ++i)
    v0(i) = cxd(std::sin(0.7 * static_cast<double>(i) + 0.3), 0.0);
  v0.normalize();

  std::vector<VecC> basis;
  basis.push_back(v0);
  std::vector<double> alpha, beta;
  double last = 0.0;
  VecR ritz;
  MatR ritzvecs;
  int it = 0;
  for (; it < max_iter; ++it) {
    VecC w = H * basis.back();
    double a = (basis.back().adjoint() * w)(0).real();
    alpha.push_back(a);
    w -= a * basis.back();
    if (it > 0) w -= beta.back() * basis[basis.size() - 2];
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= (b.adjoint() * w)(0) * b;
    const double bnorm = w.norm();

    const int kdim = static_cast<int>(alpha.size());
    MatR T = MatR::Zero(kdim, kdim);
    for (int i = 0; i < kdim; ++i) {
      T(i, i) = alpha[static_cast<size_t>(i)];
      if (i + 1 < kdim) {
        T(i, i + 1) = beta[static_cast<size_t>(i)];
        T(i + 1, i) = beta[static_cast<size_t>(i)];
      }
    }
    Eigen::SelfAdjointEigenSolver<MatR> es(T);
    ritz = es.eigenvalues();
    ritzvecs = es.eigenvectors();
    if (it > 4 && std::abs(ritz(0) - last) < 1e-14 * std::max(1.0, std::abs(ritz(0)))) {
      last = ritz(0);
      break;
    }
    last = ritz(0);
    if (bnorm < 1e-14) break;
    beta.push_back(bnorm);
    basis.push_back(w / bnorm);
  }

  DenseState st;
  st.amplitudes = VecC::Zero(dim);
  for (size_t i = 0; i < basis.size() && i < static_cast<size_t>(ritzvecs.rows()); ++i)
    st.amplitudes += ritzvecs(static_cast<Eigen::Index>(i), 0) * basis[i];
  st.amplitudes.normalize();
  return {last, st};
}

double exact_ground_power(const HamiltonianSpec& spec, int max_iter) {
  check_size(spec);
  Eigen::SparseMatrix<cxd> H = dense_hamiltonian(spec);
  const long dim = H.rows();

  // Gershgorin upper bound so that shift - H is PSD with the ground state dominant.
  VecR diag_re(dim), radius(dim);
  diag_re.setZero();
  radius.setZero();
  for (int c = 0; c < H.outerSize(); ++c)
    for (Eigen::SparseMatrix<cxd>::InnerIterator itr(H, c); itr; ++itr) {
      if (itr.row() == c)
        diag_re(c) += itr.value().real();
      else
        radius(c) += std::abs(itr.value());
    }
  const double shift = (diag_re + radius).maxCoeff() + 1.0;

  VecC v(dim);
  for (long i = 0; i < dim; ++i)
    v(i) = cxd(std::cos(0.31 * static_cast<double>(i)) + 0.5,
               std::sin(0.17 * static_cast<double>(i)));
  v.normalize();

  double rq = 0.0, rq_prev = 1e300;
  int stable = 0;
  for (int it = 0; it < max_iter; ++it) {
    VecC w = shift * v - H * v;
    const double nw = w.norm();
    require(nw > 0, "exact_ground_power: null iterate");
    v = w / nw;
    VecC Hv = H * v;
    rq = (v.adjoint() * Hv)(0).real();
    if (std::abs(rq - rq_prev) < 1e-14 * std::max(1.0, std::abs(rq))) {
      if (++stable > 50) break;
    } else {
      stable = 0;
    }
    rq_prev = rq;
  }
  return rq;
}

DenseState expand_mps(const MpsState& state) {
  state.validate();
  const int N = state.N, d = state.d, m = state.m;
  require(pow_long(d, N) <= (1L << 14), "expand_mps: Hilbert dimension capped at 2^14");
  const long dim = pow_long(d, N);

  DenseState out;
  out.amplitudes = VecC::Zero(dim);

  // DFS with running prefix products (site 0 slowest index).
  std::vector<MatC> stack(static_cast<size_t>(N) + 1);
  stack[0] = MatC::Identity(m, m);
  std::vector<int> digits(static_cast<size_t>(N), 0);
  int level = 0;
  while (true) {
    if (level == N) {
      long idx = 0;
      for (int k = 0; k < N; ++k) idx = idx * d + digits[static_cast<size_t>(k)];
      out.amplitudes(idx) = stack[static_cast<size_t>(N)].trace();
      --level;
      while (level >= 0 && digits[static_cast<size_t>(level)] == d - 1) {
        digits[static_cast<size_t>(level)] = 0;
        --level;
      }
      if (level < 0) break;
      ++digits[static_cast<size_t>(level)];
    }
    stack[static_cast<size_t>(level) + 1] =
        stack[static_cast<size_t>(level)] *
        state.tensors[static_cast<size_t>(level)][static_cast<size_t>(digits[static_cast<size_t>(level)])];
    ++level;
  }
  return out;
}

double exact_stiffness_fd(double delta, int N, double dphi, BoundaryKind kind, double J) {
  require(dphi >= 1e-3 && dphi <= 0.05, "exact_stiffness_fd: dphi outside [1e-3, 0.05]");
  auto energy_at = [&](double phi) {
    Boundary b = (kind == BoundaryKind::Open) ? Boundary::open() : Boundary::twisted(phi);
    return exact_ground(build_xxz(N, J, delta, b)).first;
  };
  const double e0 = energy_at(0.0);
  const double ep = energy_at(dphi);
  const double em = energy_at(-dphi);
  return N * (ep - 2.0 * e0 + em) / (dphi * dphi);
}

}  // namespace mpsring::oracle
