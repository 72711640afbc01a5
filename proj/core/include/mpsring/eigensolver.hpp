#pragma once

#include "mpsring/effective.hpp"

#include <optional>

namespace mpsring {

struct EigSolveReport {
  double lambda = 0.0;   // smallest generalized eigenvalue
  VecC x;                // eigenvector, dim d*m^2
  int iterations = 0;
  double residual = 0.0;  // ||H x - lambda N x|| / ||N x||
  bool converged = false;
};

// Locally optimal preconditioned CG on the pencil (H, N) with N-inner products;
// returns the smallest eigenpair. Warm-started from x0 when given, otherwise a
// deterministic basis start. Non-convergence returns the best pair found with
// converged = false.
EigSolveReport min_generalized_eig(const EffectiveProblem& prob, double mu,
                                   const std::optional<VecC>& x0 = std::nullopt,
                                   int max_iter = 500);

// Undo the stabilization gauge: x = (X^dag (x) Y^dag) x', reshaped to the d
// site matrices A^{[k],i}.
std::vector<MatC> ungauge_solution(const VecC& xprime, const GaugePair& gauge, int d);

}  // namespace mpsring
