#pragma once

#include "mpsring/model.hpp"
#include "mpsring/mps.hpp"

#include <Eigen/SparseCore>

// Brute-force ground truth for small systems. Independent of the variational
// code paths on purpose; used by tests and the `validate` CLI subcommand.

namespace mpsring::oracle {

struct DenseState {
  VecC amplitudes;  // dimension d^N, unit norm after a solve
};

Eigen::SparseMatrix<cxd> dense_hamiltonian(const HamiltonianSpec& spec);

// Smallest eigenvalue and eigenvector of the full Hamiltonian. Dense solve for
// d^N <= 2048, Lanczos with full reorthogonalization above that. N capped at 14.
std::pair<double, DenseState> exact_ground(const HamiltonianSpec& spec);

// Independent second path (shifted power iteration); shares no solver code
// with exact_ground.
double exact_ground_power(const HamiltonianSpec& spec, int max_iter = 200000);

// Coefficients of Eq.-style literal expansion: c_{i1..iN} = Tr(A^{i1} ... A^{iN}).
DenseState expand_mps(const MpsState& state);

// Central second difference N * (E(d) - 2 E(0) + E(-d)) / d^2 for the XXZ model.
double exact_stiffness_fd(double delta, int N, double dphi,
                          BoundaryKind kind = BoundaryKind::Twisted, double J = 1.0);

}  // namespace mpsring::oracle
