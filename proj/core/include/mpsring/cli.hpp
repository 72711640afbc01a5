#pragma once

#include "mpsring/observables.hpp"

#include <optional>
#include <string>

namespace mpsring {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // model
  double delta = 0.0;
  double J = 1.0;
  int N = 0;
  Boundary boundary = Boundary::periodic();
  std::vector<double> phi_grid;  // stiffness runs; empty -> default grid
  // algorithm
  SweepConfig algo;
  bool warm_start_grid = true;
  // output
  std::string out_dir = ".";
  bool trace = true;
  // stiffness test hook: energies injected instead of running the solver
  std::vector<TwistPoint> synthetic_energies;
};

// Strict parse: unknown keys rejected, every value validated before compute.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string resolved_config_json(const RunConfig& cfg);

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int jobs = 1;
  bool quiet = false;
};

// Exit codes: 0 converged, 1 config/IO error, 2 completed without convergence.
int cmd_ground(const std::string& config_path, const CliOptions& opt);
int cmd_stiffness(const std::string& config_path, const CliOptions& opt);
int cmd_validate(const CliOptions& opt);
int cmd_trace_plot(const std::string& trace_csv, const std::string& out_csv,
                   const CliOptions& opt);

// MPSRING_THREADS caps internal fan-out (0 means unlimited/hardware).
int thread_cap();

}  // namespace mpsring
