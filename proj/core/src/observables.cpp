#include "mpsring/observables.hpp"

#include <Eigen/QR>
#include <cmath>
#include <ostream>

namespace mpsring {

std::vector<double> default_phi_grid() {
  return {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
}

std::vector<TwistPoint> energy_vs_twist(double delta, double J, int N,
                                        const std::vector<double>& phi_grid,
                                        const SweepConfig& cfg,
                                        bool warm_start_along_grid) {
  require(!phi_grid.empty(), "energy_vs_twist: empty grid");
  std::vector<TwistPoint> out;
  out.reserve(phi_grid.size());

  MpsState carry;
  bool have_carry = false;
  for (size_t gi = 0; gi < phi_grid.size(); ++gi) {
    const double phi = phi_grid[gi];
    require(std::isfinite(phi), "energy_vs_twist: non-finite twist");
    HamiltonianSpec spec = build_xxz(N, J, delta, Boundary::twisted(phi));

    SweepConfig run = cfg;
    run.seed = derive_seed(cfg.seed, 0x70686900ULL, gi);
    run.warm_start_path.clear();
    MpsState st0 = (warm_start_along_grid && have_carry)
                       ? carry
                       : random_mps(N, 2, cfg.m, run.seed);

    auto [st, trace] = optimize(st0, spec, run);
    ConvergedEnergy ce = converged_energy(trace, cfg.averaging_window);

    TwistPoint pt;
    pt.phi = phi;
    pt.e_mean = ce.mean;
    pt.e_std = ce.std_dev;
    pt.converged = true;
    for (const auto& s : trace.steps)
      if (s.sweep == trace.n_sweeps - 1 && !s.converged) pt.converged = false;
    out.push_back(pt);

    carry = std::move(st);
    have_carry = true;
  }

  // flag points whose fluctuation drowns the twist signal
  double e0 = out.front().e_mean, emax = out.front().e_mean;
  double phimax = std::abs(out.front().phi);
  for (const auto& p : out) {
    if (std::abs(p.phi) < 1e-15) e0 = p.e_mean;
    if (std::abs(p.phi) >= phimax) {
      phimax = std::abs(p.phi);
      emax = p.e_mean;
    }
  }
  const double signal = std::abs(emax - e0);
  if (signal > 0)
    for (auto& p : out)
      if (p.e_std > 0.1 * signal) p.usable = false;
  return out;
}

StiffnessFit fit_stiffness(const std::vector<TwistPoint>& points, int N,
                           bool include_odd_diagnostic, bool include_quartic) {
  std::vector<const TwistPoint*> used;
  for (const auto& p : points)
    if (p.usable) used.push_back(&p);
  require(used.size() >= 3, "fit_stiffness: need at least 3 usable points");
  double lo = used.front()->phi, hi = used.front()->phi;
  for (const auto* p : used) {
    lo = std::min(lo, p->phi);
    hi = std::max(hi, p->phi);
  }
  require(hi - lo > 1e-12, "fit_stiffness: degenerate grid");

  const int cols = 2 + (include_odd_diagnostic ? 1 : 0) + (include_quartic ? 1 : 0);
  require(static_cast<int>(used.size()) >= cols, "fit_stiffness: underdetermined fit");
  MatR A(static_cast<Eigen::Index>(used.size()), cols);
  VecR b(static_cast<Eigen::Index>(used.size()));
  for (size_t i = 0; i < used.size(); ++i) {
    const double phi = used[i]->phi;
    int c = 0;
    A(static_cast<Eigen::Index>(i), c++) = 1.0;
    A(static_cast<Eigen::Index>(i), c++) = phi * phi;
    if (include_odd_diagnostic) A(static_cast<Eigen::Index>(i), c++) = phi;
    if (include_quartic) A(static_cast<Eigen::Index>(i), c++) = phi * phi * phi * phi;
    b(static_cast<Eigen::Index>(i)) = used[i]->e_mean;
  }
  VecR coef = A.colPivHouseholderQr().solve(b);

  StiffnessFit fit;
  fit.c2 = coef(1);
  int c = 2;
  if (include_odd_diagnostic) fit.c1 = coef(c++);
  if (include_quartic) fit.c4 = coef(c++);
  fit.rho_s = 2.0 * N * fit.c2;
  fit.residual = std::sqrt((A * coef - b).squaredNorm() / static_cast<double>(used.size()));
  return fit;
}

double bethe_stiffness(double delta, double J) {
  require(std::isfinite(delta), "bethe_stiffness: non-finite anisotropy");
  const double pi = 3.14159265358979323846;
  if (std::abs(delta) > 1.0) return 0.0;
  if (std::abs(delta) >= 1.0 - 1e-14) return 0.25 * J;  // mu -> 0 (or pi) limit
  const double mu = std::acos(delta);
  return J * pi * std::sin(mu) / (4.0 * mu * (pi - mu));
}

void write_stiffness_csv(std::ostream& os, const StiffnessResult& r, int n_sweeps) {
  os << "# mps-ring v" << kVersion << "\n";
  os << "delta,N,m,p,s,phi,E_mean,E_std,n_sweeps\n";
  char buf[256];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%d,%d,%d,%.17g,%.17g,%.17g,%d\n", r.delta,
                  r.N, r.m, r.p, r.s, p.phi, p.e_mean, p.e_std, n_sweeps);
    os << buf;
  }
}

}  // namespace mpsring
