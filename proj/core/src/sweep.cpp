#include "mpsring/sweep.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace mpsring {

using RowMatC = Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::array<std::pair<int, int>, 3> sector_partition(int N) {
  require(N >= 6, "sector_partition: need N >= 6 so every sector has >= 2 sites");
  const int base = N / 3;
  const int rem = N % 3;
  std::array<std::pair<int, int>, 3> out;
  int start = 0;
  for (int i = 0; i < 3; ++i) {
    const int len = base + (i < rem ? 1 : 0);
    out[static_cast<size_t>(i)] = {start, len};
    start += len;
  }
  return out;
}

std::vector<double> EnergyTrace::end_of_sweep_energies() const {
  std::vector<double> out;
  for (size_t i = 0; i < steps.size(); ++i) {
    const bool last_of_sweep =
        (i + 1 == steps.size()) || (steps[i + 1].sweep != steps[i].sweep);
    if (last_of_sweep) out.push_back(steps[i].energy);
  }
  return out;
}

ConvergedEnergy converged_energy(const EnergyTrace& trace, int window) {
  require(window >= 1, "converged_energy: window must be >= 1");
  std::vector<double> ends = trace.end_of_sweep_energies();
  require(static_cast<int>(ends.size()) >= window,
          "converged_energy: trace covers fewer sweeps than the window");
  double mean = 0.0;
  for (int i = 0; i < window; ++i) mean += ends[ends.size() - 1 - static_cast<size_t>(i)];
  mean /= window;
  double var = 0.0;
  for (int i = 0; i < window; ++i) {
    const double dv = ends[ends.size() - 1 - static_cast<size_t>(i)] - mean;
    var += dv * dv;
  }
  return {mean, std::sqrt(var / window)};
}

void write_trace_csv(std::ostream& os, const EnergyTrace& trace) {
  os << "# mps-ring v" << kVersion << "\n";
  os << "sweep,sector,site,energy,residual,seconds\n";
  char buf[256];
  for (const auto& s : trace.steps) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.6f\n", s.sweep, s.sector,
                  s.site, s.energy, s.residual, s.seconds);
    os << buf;
  }
}

namespace {

// x' = ([X^dag]^-1 (x) [Y^dag]^-1) x : map the bare tensor into the gauged frame
VecC gauge_forward(const VecC& x, const GaugePair& g, int d, int m) {
  const MatC P = g.Xinv.adjoint();
  const MatC R = g.Yinv.conjugate();
  VecC out(x.size());
  for (int i = 0; i < d; ++i) {
    Eigen::Map<const RowMatC> Am(x.data() + static_cast<Eigen::Index>(i) * m * m, m, m);
    Eigen::Map<RowMatC>(out.data() + static_cast<Eigen::Index>(i) * m * m, m, m) =
        P * Am * R;
  }
  return out;
}

}  // namespace

std::pair<MpsState, EnergyTrace> optimize(const MpsState& state0,
                                          const HamiltonianSpec& spec,
                                          const SweepConfig& cfg) {
  MpsState state = state0;
  if (!cfg.warm_start_path.empty()) state = load_checkpoint(cfg.warm_start_path).state;
  state.validate();
  const int N = state.N, d = state.d, m = state.m;
  require(spec.sites() == N && spec.phys_dim() == d, "optimize: spec/state mismatch");
  require(cfg.m == m, "optimize: cfg.m must match the state bond dimension");
  require(cfg.p >= 1 && cfg.p <= m * m, "optimize: p must lie in [1, m^2]");
  require(cfg.s >= 0 && cfg.s <= d * m * m, "optimize: s must lie in [0, d*m^2]");
  require(cfg.n_sweeps >= 1, "optimize: n_sweeps must be >= 1");
  require(cfg.epsilon >= 0 && std::isfinite(cfg.epsilon), "optimize: bad epsilon");
  require(cfg.mu > 0, "optimize: mu must be positive");

  const auto sectors = sector_partition(N);
  EnergyTrace trace;
  trace.n_sweeps = cfg.n_sweeps;
  trace.sites = N;
  trace.steps.reserve(static_cast<size_t>(cfg.n_sweeps) * static_cast<size_t>(N));

  int consecutive_failures = 0;
  Rng restart_rng(derive_seed(cfg.seed, 0x72657374ULL));

  for (int sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
    for (int sec = 0; sec < 3; ++sec) {
      const auto [a, len] = sectors[static_cast<size_t>(sec)];
      const auto [na, nlen] = sectors[static_cast<size_t>((sec + 1) % 3)];
      const auto [nna, nnlen] = sectors[static_cast<size_t>((sec + 2) % 3)];
      const std::uint64_t sec_seed =
          derive_seed(cfg.seed, static_cast<std::uint64_t>(sweep) + 1,
                      static_cast<std::uint64_t>(sec) + 1);

      // passive sector caches, rebuilt from scratch at sector entry
      SectorCache right_base =
          build_sector_cache(state, spec, na, nlen, cfg.p, derive_seed(sec_seed, 11));
      SectorCache left_chain =
          build_sector_cache(state, spec, nna, nnlen, cfg.p, derive_seed(sec_seed, 12));

      // right partials, prebuilt from the sector edge inward and consumed
      std::vector<SectorCache> rstack(static_cast<size_t>(len));
      rstack[static_cast<size_t>(len) - 1] = std::move(right_base);
      for (int off = len - 2; off >= 0; --off)
        rstack[static_cast<size_t>(off)] =
            chain_extend_left(state, spec, rstack[static_cast<size_t>(off) + 1], cfg.p,
                              derive_seed(sec_seed, 13, static_cast<std::uint64_t>(off)));

      for (int off = 0; off < len; ++off) {
        const int k = a + off;
        const auto t_start = std::chrono::steady_clock::now();
        const std::uint64_t site_seed =
            derive_seed(sec_seed, 20, static_cast<std::uint64_t>(off));

        StepRecord rec;
        rec.sweep = sweep;
        rec.sector = sec;
        rec.site = k;
        rec.sector_start = (off == 0);

        EffectiveProblem prob =
            regularize(assemble(left_chain, rstack[static_cast<size_t>(off)], spec, k),
                       cfg.epsilon);

        bool degenerate = false;
        std::optional<GaugePair> gauge;
        if (cfg.stabilize) {
          try {
            auto [gprob, g] = stabilize_gauge(std::move(prob), cfg.p, site_seed);
            prob = std::move(gprob);
            gauge = g;
          } catch (const degenerate_norm_error&) {
            degenerate = true;
          }
        }

        if (degenerate) {
          // restart the site from a fresh random tensor and move on
          const double sc = 1.0 / std::sqrt(static_cast<double>(d) * m);
          for (int i = 0; i < d; ++i)
            for (int aa = 0; aa < m; ++aa)
              for (int bb = 0; bb < m; ++bb)
                state.tensors[static_cast<size_t>(k)][static_cast<size_t>(i)](aa, bb) =
                    sc * restart_rng.cgaussian();
          rec.converged = false;
          rec.energy = trace.steps.empty() ? 0.0 : trace.steps.back().energy;
          rec.residual = std::numeric_limits<double>::infinity();
          rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                      t_start)
                            .count();
          trace.steps.push_back(rec);
          if (off < len - 1)
            left_chain = chain_extend_right(left_chain, state, spec, cfg.p,
                                            derive_seed(sec_seed, 14,
                                                        static_cast<std::uint64_t>(off)));
          continue;
        }

        if (cfg.s > 0)
          prob = truncate_hamiltonian(std::move(prob), cfg.s, derive_seed(site_seed, 2));

        VecC x0 = join_site_matrices(state.tensors[static_cast<size_t>(k)]);
        if (gauge) x0 = gauge_forward(x0, *gauge, d, m);

        EigSolveReport rep = min_generalized_eig(prob, cfg.mu, x0, cfg.max_iter);

        VecC chosen;
        if (rep.converged) {
          consecutive_failures = 0;
          chosen = rep.x;
        } else {
          ++consecutive_failures;
          chosen = x0;  // site skipped, tensor unchanged
          if (consecutive_failures >= 3)
            throw std::runtime_error(
                "optimize: three consecutive solver failures (sweep " +
                std::to_string(sweep) + ", site " + std::to_string(k) + ")");
        }

        // true variational energy of the chosen tensor (shift-free, gauge-invariant)
        const auto [hval, nrm2] = prob.rayleigh_parts(chosen);
        const bool usable = nrm2 > 0 && std::isfinite(nrm2) && std::isfinite(hval);

        if (rep.converged && usable) {
          std::vector<MatC> As = gauge ? ungauge_solution(chosen, *gauge, d)
                                       : split_site_vector(chosen, d, m);
          // keep the global norm at 1
          const double lg = std::log(nrm2) + prob.norm_log_scale();
          const double f = std::exp(-0.5 * lg);
          for (int i = 0; i < d; ++i)
            state.tensors[static_cast<size_t>(k)][static_cast<size_t>(i)] =
                f * As[static_cast<size_t>(i)];
        }

        rec.energy = usable ? hval / nrm2
                            : (trace.steps.empty() ? 0.0 : trace.steps.back().energy);
        rec.residual = rep.residual;
        rec.iterations = rep.iterations;
        rec.converged = rep.converged;
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        trace.steps.push_back(rec);

        if (off < len - 1)
          left_chain = chain_extend_right(
              left_chain, state, spec, cfg.p,
              derive_seed(sec_seed, 14, static_cast<std::uint64_t>(off)));
      }
    }
    if (!cfg.checkpoint_path.empty())
      save_checkpoint(cfg.checkpoint_path, {state, cfg.seed, sweep + 1});
  }
  return {std::move(state), std::move(trace)};
}

}  // namespace mpsring
