#include "mpsring/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace mpsring {

using RowMatC = Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

VecC deterministic_start(int n, int which) {
  VecC x = VecC::Zero(n);
  if (which == 0) {
    x(0) = 1.0;
  } else {
    for (int i = 0; i < n; ++i)
      x(i) = cxd(1.0 + 0.25 * std::sin(1.3 * i + 0.7), 0.25 * std::cos(0.9 * i));
    x /= x.norm();
  }
  return x;
}

}  // namespace

EigSolveReport min_generalized_eig(const EffectiveProblem& prob, double mu,
                                   const std::optional<VecC>& x0, int max_iter) {
  const int n = prob.dim();
  require(mu > 0, "min_generalized_eig: mu must be positive");
  require(max_iter >= 1, "min_generalized_eig: max_iter must be >= 1");

  auto n_norm = [&](const VecC& v, const VecC& Nv) {
    return std::sqrt(std::max(0.0, (v.adjoint() * Nv)(0).real()));
  };

  VecC x;
  if (x0 && x0->size() == n && x0->allFinite() && x0->norm() > 0)
    x = *x0;
  else
    x = deterministic_start(n, 0);

  VecC Nx = prob.apply_N(x);
  double nn = n_norm(x, Nx);
  if (!(nn > 1e-150)) {
    x = deterministic_start(n, 1);
    Nx = prob.apply_N(x);
    nn = n_norm(x, Nx);
  }
  x /= nn;
  Nx /= nn;
  VecC Hx = prob.apply_H(x);
  double lambda = (x.adjoint() * Hx)(0).real();

  VecC p;
  bool have_p = false;

  EigSolveReport best;
  best.x = x;
  best.lambda = lambda;
  best.residual = std::numeric_limits<double>::infinity();

  int it = 0;
  for (; it < max_iter; ++it) {
    // periodic exact refresh against recombination drift
    if (it % 10 == 9) {
      Nx = prob.apply_N(x);
      const double rn = n_norm(x, Nx);
      if (rn > 1e-150) {
        x /= rn;
        Nx /= rn;
      }
      Hx = prob.apply_H(x);
      lambda = (x.adjoint() * Hx)(0).real();
    }

    VecC r = Hx - lambda * Nx;
    const double nxnorm = Nx.norm();
    const double res = (nxnorm > 0) ? r.norm() / nxnorm : r.norm();
    if (res < best.residual || lambda < best.lambda - 1e-14 * std::abs(best.lambda)) {
      best.x = x;
      best.lambda = lambda;
      best.residual = res;
      best.iterations = it;
    }
    if (res < mu) {
      best.converged = true;
      best.iterations = it;
      return best;
    }

    // search directions, orthogonalized in the Euclidean sense for conditioning
    VecC w = r;
    w -= (x.adjoint() * w)(0) / x.squaredNorm() * x;
    const double wn = w.norm();
    if (!(wn > 1e-250)) break;  // stationary but above tolerance: stagnation
    w /= wn;

    int nb = 2;
    VecC pq;
    if (have_p) {
      pq = p;
      pq -= (x.adjoint() * pq)(0) / x.squaredNorm() * x;
      pq -= (w.adjoint() * pq)(0) * w;
      const double pn = pq.norm();
      if (pn > 1e-8 * p.norm()) {
        pq /= pn;
        nb = 3;
      }
    }

    MatC B(n, nb);
    B.col(0) = x;
    B.col(1) = w;
    if (nb == 3) B.col(2) = pq;

    MatC HB(n, nb), NB(n, nb);
    HB.col(0) = Hx;
    NB.col(0) = Nx;
    HB.col(1) = prob.apply_H(w);
    NB.col(1) = prob.apply_N(w);
    if (nb == 3) {
      HB.col(2) = prob.apply_H(pq);
      NB.col(2) = prob.apply_N(pq);
    }

    MatC Hs = B.adjoint() * HB;
    MatC Ns = B.adjoint() * NB;
    Hs = 0.5 * (Hs + Hs.adjoint()).eval();
    Ns = 0.5 * (Ns + Ns.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<MatC> esn(Ns);
    const double nmax = esn.eigenvalues().maxCoeff();
    if (!(nmax > 0) || !std::isfinite(nmax)) break;
    int keep = 0;
    for (int i = 0; i < nb; ++i)
      if (esn.eigenvalues()(i) > 1e-10 * nmax) ++keep;
    if (keep == 0) break;
    MatC C(nb, keep);
    int col = 0;
    for (int i = 0; i < nb; ++i) {
      if (esn.eigenvalues()(i) <= 1e-10 * nmax) continue;
      C.col(col++) = esn.eigenvectors().col(i) / std::sqrt(esn.eigenvalues()(i));
    }

    MatC Hred = C.adjoint() * Hs * C;
    Hred = 0.5 * (Hred + Hred.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatC> esr(Hred);
    VecC y = C * esr.eigenvectors().col(0);
    const double ritz = esr.eigenvalues()(0);
    if (!std::isfinite(ritz)) break;

    VecC xn = B * y;
    VecC Hxn = HB * y;
    VecC Nxn = NB * y;
    const double xnn = n_norm(xn, Nxn);
    if (!(xnn > 1e-150)) break;

    // next conjugate direction: the non-x part of the update
    VecC pn_dir = xn - y(0) * x;
    const double pnn = pn_dir.norm();
    if (pnn > 1e-12 * xn.norm()) {
      p = pn_dir / pnn;
      have_p = true;
    } else {
      have_p = false;
    }

    x = xn / xnn;
    Hx = Hxn / xnn;
    Nx = Nxn / xnn;
    lambda = ritz;
  }

  // final report from the best iterate, with freshly computed residual
  VecC Hb = prob.apply_H(best.x);
  VecC Nb = prob.apply_N(best.x);
  const double den = (best.x.adjoint() * Nb)(0).real();
  if (den > 0) best.lambda = (best.x.adjoint() * Hb)(0).real() / den;
  const double nbn = Nb.norm();
  best.residual = (nbn > 0) ? (Hb - best.lambda * Nb).norm() / nbn
                            : (Hb - best.lambda * Nb).norm();
  best.iterations = it;
  best.converged = best.residual < mu;
  return best;
}

std::vector<MatC> ungauge_solution(const VecC& xprime, const GaugePair& gauge, int d) {
  const int m = static_cast<int>(gauge.X.rows());
  require(static_cast<int>(xprime.size()) == d * m * m, "ungauge_solution: bad size");
  require(gauge.X.allFinite() && gauge.Y.allFinite(), "ungauge_solution: bad gauge");
  Eigen::JacobiSVD<MatC> sx(gauge.X), sy(gauge.Y);
  require(sx.singularValues().minCoeff() > 0 && sy.singularValues().minCoeff() > 0 &&
              sx.singularValues().maxCoeff() / sx.singularValues().minCoeff() < 1e14 &&
              sy.singularValues().maxCoeff() / sy.singularValues().minCoeff() < 1e14,
          "ungauge_solution: singular gauge");

  const MatC P = gauge.X.adjoint();
  const MatC R = gauge.Y.conjugate();  // (Y^dag)^T
  std::vector<MatC> out(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    Eigen::Map<const RowMatC> Am(xprime.data() + static_cast<Eigen::Index>(i) * m * m, m, m);
    out[static_cast<size_t>(i)] = P * Am * R;
  }
  return out;
}

}  // namespace mpsring
