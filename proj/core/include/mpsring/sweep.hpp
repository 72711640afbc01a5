#pragma once

#include "mpsring/eigensolver.hpp"
#include "mpsring/model.hpp"
#include "mpsring/mps.hpp"
#include "mpsring/tsvd.hpp"

#include <array>
#include <iosfwd>
#include <string>

namespace mpsring {

struct SweepConfig {
  int m = 8;
  int p = 16;
  int s = 0;  // Hamiltonian compression rank; 0 (or >= d*m^2) = uncompressed
  double epsilon = 1e-12;
  double mu = 1e-10;
  int n_sweeps = 40;
  int averaging_window = 5;
  std::uint64_t seed = 1;
  int max_iter = 500;
  bool stabilize = true;          // X/Y gauge on/off (off only for diagnostics)
  std::string warm_start_path;    // optional checkpoint to resume from
  std::string checkpoint_path;    // written after every full sweep when set
};

struct StepRecord {
  int sweep = 0;
  int sector = 0;
  int site = 0;
  double energy = 0.0;    // variational E/N of the state after this step
  double residual = 0.0;
  double seconds = 0.0;
  int iterations = 0;
  bool converged = true;
  bool sector_start = false;  // first step after a sector-cache rebuild
};

struct EnergyTrace {
  std::vector<StepRecord> steps;
  int n_sweeps = 0;
  int sites = 0;

  std::vector<double> end_of_sweep_energies() const;
};

struct ConvergedEnergy {
  double mean = 0.0;
  double std_dev = 0.0;
};

// Three near-equal contiguous sectors (sizes differ by at most one).
std::array<std::pair<int, int>, 3> sector_partition(int N);

// Circular single-site optimization: per site, rebuild/extend the two chain
// caches, assemble the pencil, regularize, gauge, compress, solve, un-gauge,
// write the tensor. The two passive sector caches are rebuilt at every sector
// entry; right partials are prebuilt and consumed, left partials extended.
std::pair<MpsState, EnergyTrace> optimize(const MpsState& state0,
                                          const HamiltonianSpec& spec,
                                          const SweepConfig& cfg);

// Mean and population standard deviation of the end-of-sweep energies over the
// last `window` sweeps.
ConvergedEnergy converged_energy(const EnergyTrace& trace, int window);

void write_trace_csv(std::ostream& os, const EnergyTrace& trace);

}  // namespace mpsring
