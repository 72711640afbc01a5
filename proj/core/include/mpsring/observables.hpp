#pragma once

#include "mpsring/sweep.hpp"

#include <iosfwd>
#include <vector>

namespace mpsring {

struct TwistPoint {
  double phi = 0.0;
  double e_mean = 0.0;
  double e_std = 0.0;
  bool usable = true;     // e_std small enough against the twist signal
  bool converged = true;  // end-of-run solver state
};

struct StiffnessFit {
  double c2 = 0.0;
  double rho_s = 0.0;
  double residual = 0.0;  // RMS of fit deviations
  double c1 = 0.0;        // odd-term diagnostic (0 unless requested)
  double c4 = 0.0;        // quartic diagnostic (0 unless requested)
};

struct StiffnessResult {
  double delta = 0.0;
  int N = 0, m = 0, p = 0, s = 0;
  std::vector<TwistPoint> points;
  StiffnessFit fit;
  double rho_bethe = 0.0;
};

// Grid chosen so the quadratic signal clears the fluctuation floor without
// picking up quartic contamination.
std::vector<double> default_phi_grid();

// One converged ground-state run per twist angle, warm-started along the grid
// when enabled. Deterministic for fixed seeds.
std::vector<TwistPoint> energy_vs_twist(double delta, double J, int N,
                                        const std::vector<double>& phi_grid,
                                        const SweepConfig& cfg,
                                        bool warm_start_along_grid = true);

// Least squares for E0(phi) = E0 + c2 phi^2; rho_s = 2 N c2. Optional odd and
// quartic diagnostic terms.
StiffnessFit fit_stiffness(const std::vector<TwistPoint>& points, int N,
                           bool include_odd_diagnostic = false,
                           bool include_quartic = false);

// Closed-form thermodynamic-limit stiffness: mu = arccos(Delta),
// rho_s = J pi sin(mu) / (4 mu (pi - mu)) for |Delta| <= 1, zero beyond.
double bethe_stiffness(double delta, double J = 1.0);

// CSV: delta,N,m,p,s,phi,E_mean,E_std,n_sweeps
void write_stiffness_csv(std::ostream& os, const StiffnessResult& r, int n_sweeps);

}  // namespace mpsring
