#include "mpsring/cli.hpp"

#include "mpsring/oracle.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace mpsring {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok) throw config_error("unknown key \"" + where + it.key() + "\"");
  }
}

template <typename T>
T get_required(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw config_error("missing required key \"" + where + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("bad value for key \"" + where + key + "\"");
  }
}

template <typename T>
T get_optional(const json& j, const std::string& where, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("bad value for key \"" + where + key + "\"");
  }
}

json config_to_json(const RunConfig& c) {
  json model;
  model["delta"] = c.delta;
  model["J"] = c.J;
  model["N"] = c.N;
  switch (c.boundary.kind) {
    case BoundaryKind::Open: model["boundary"] = "open"; break;
    case BoundaryKind::Periodic: model["boundary"] = "periodic"; break;
    case BoundaryKind::Twisted:
      model["boundary"] = "twisted";
      model["phi"] = c.boundary.phi;
      break;
  }
  if (!c.phi_grid.empty()) model["phi_grid"] = c.phi_grid;

  json algo;
  algo["m"] = c.algo.m;
  algo["p"] = c.algo.p;
  algo["s"] = c.algo.s;
  algo["epsilon"] = c.algo.epsilon;
  algo["mu"] = c.algo.mu;
  algo["n_sweeps"] = c.algo.n_sweeps;
  algo["averaging_window"] = c.algo.averaging_window;
  algo["seed"] = c.algo.seed;
  algo["max_iter"] = c.algo.max_iter;
  algo["stabilize"] = c.algo.stabilize;
  algo["warm_start_path"] = c.algo.warm_start_path;
  algo["warm_start_grid"] = c.warm_start_grid;

  json output;
  output["dir"] = c.out_dir;
  output["trace"] = c.trace;

  json root;
  root["model"] = model;
  root["algorithm"] = algo;
  root["output"] = output;
  if (!c.synthetic_energies.empty()) {
    json arr = json::array();
    for (const auto& p : c.synthetic_energies)
      arr.push_back({{"phi", p.phi}, {"e_mean", p.e_mean}, {"e_std", p.e_std}});
    root["synthetic_energies"] = arr;
  }
  return root;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  // a previously written summary can be re-run from its embedded config
  if (root.contains("config") && root.contains("results"))
    root = root.at("config");

  reject_unknown(root, "", {"model", "algorithm", "output", "synthetic_energies"});
  if (!root.contains("model")) throw config_error("missing required key \"model\"");
  if (!root.contains("algorithm")) throw config_error("missing required key \"algorithm\"");

  RunConfig c;
  const json& model = root.at("model");
  reject_unknown(model, "model.", {"delta", "J", "N", "boundary", "phi", "phi_grid"});
  c.delta = get_required<double>(model, "model.", "delta");
  c.J = get_optional<double>(model, "model.", "J", 1.0);
  c.N = get_required<int>(model, "model.", "N");
  const std::string b = get_optional<std::string>(model, "model.", "boundary", "periodic");
  if (b == "open") {
    c.boundary = Boundary::open();
  } else if (b == "periodic") {
    c.boundary = Boundary::periodic();
  } else if (b == "twisted") {
    c.boundary = Boundary::twisted(get_optional<double>(model, "model.", "phi", 0.0));
  } else {
    throw config_error("bad value for key \"model.boundary\"");
  }
  if (model.contains("phi_grid"))
    c.phi_grid = model.at("phi_grid").get<std::vector<double>>();

  const json& algo = root.at("algorithm");
  reject_unknown(algo, "algorithm.",
                 {"m", "p", "s", "epsilon", "mu", "n_sweeps", "averaging_window", "seed",
                  "max_iter", "stabilize", "warm_start_path", "warm_start_grid"});
  c.algo.m = get_required<int>(algo, "algorithm.", "m");
  c.algo.p = get_required<int>(algo, "algorithm.", "p");
  c.algo.s = get_optional<int>(algo, "algorithm.", "s", 0);
  c.algo.epsilon = get_optional<double>(algo, "algorithm.", "epsilon", 1e-12);
  c.algo.mu = get_optional<double>(algo, "algorithm.", "mu", 1e-10);
  c.algo.n_sweeps = get_required<int>(algo, "algorithm.", "n_sweeps");
  c.algo.averaging_window = get_optional<int>(algo, "algorithm.", "averaging_window", 5);
  c.algo.seed = get_optional<std::uint64_t>(algo, "algorithm.", "seed", 1);
  c.algo.max_iter = get_optional<int>(algo, "algorithm.", "max_iter", 500);
  c.algo.stabilize = get_optional<bool>(algo, "algorithm.", "stabilize", true);
  c.algo.warm_start_path = get_optional<std::string>(algo, "algorithm.", "warm_start_path", "");
  c.warm_start_grid = get_optional<bool>(algo, "algorithm.", "warm_start_grid", true);

  if (root.contains("output")) {
    const json& output = root.at("output");
    reject_unknown(output, "output.", {"dir", "trace"});
    c.out_dir = get_optional<std::string>(output, "output.", "dir", ".");
    c.trace = get_optional<bool>(output, "output.", "trace", true);
  }

  if (root.contains("synthetic_energies")) {
    for (const auto& e : root.at("synthetic_energies")) {
      reject_unknown(e, "synthetic_energies[].", {"phi", "e_mean", "e_std"});
      TwistPoint p;
      p.phi = get_required<double>(e, "synthetic_energies[].", "phi");
      p.e_mean = get_required<double>(e, "synthetic_energies[].", "e_mean");
      p.e_std = get_optional<double>(e, "synthetic_energies[].", "e_std", 0.0);
      c.synthetic_energies.push_back(p);
    }
  }

  // validation before any compute
  if (c.N < 2) throw config_error("bad value for key \"model.N\" (need N >= 2)");
  if (!std::isfinite(c.delta)) throw config_error("bad value for key \"model.delta\"");
  if (!std::isfinite(c.J)) throw config_error("bad value for key \"model.J\"");
  if (c.algo.m < 1) throw config_error("bad value for key \"algorithm.m\"");
  if (c.algo.p < 1 || c.algo.p > c.algo.m * c.algo.m)
    throw config_error("bad value for key \"algorithm.p\" (need 1 <= p <= m^2)");
  if (c.algo.s < 0 || c.algo.s > 2 * c.algo.m * c.algo.m)
    throw config_error("bad value for key \"algorithm.s\" (need 0 <= s <= d*m^2)");
  if (c.algo.n_sweeps < 1) throw config_error("bad value for key \"algorithm.n_sweeps\"");
  if (c.algo.averaging_window < 1 || c.algo.averaging_window > c.algo.n_sweeps)
    throw config_error("bad value for key \"algorithm.averaging_window\"");
  if (!(c.algo.epsilon >= 0) || !std::isfinite(c.algo.epsilon))
    throw config_error("bad value for key \"algorithm.epsilon\"");
  if (!(c.algo.mu > 0)) throw config_error("bad value for key \"algorithm.mu\"");
  if (c.algo.max_iter < 1) throw config_error("bad value for key \"algorithm.max_iter\"");
  for (double phi : c.phi_grid)
    if (!std::isfinite(phi)) throw config_error("bad value in \"model.phi_grid\"");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is.good()) throw config_error("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string resolved_config_json(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

int thread_cap() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("MPSRING_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) hw = std::min(hw, v);
  }
  return hw;
}

namespace {

void apply_overrides(RunConfig& cfg, const CliOptions& opt) {
  if (opt.seed) cfg.algo.seed = *opt.seed;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
}

}  // namespace

int cmd_ground(const std::string& config_path, const CliOptions& opt) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
    apply_overrides(cfg, opt);
    fs::create_directories(cfg.out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    HamiltonianSpec spec = build_xxz(cfg.N, cfg.J, cfg.delta, cfg.boundary);
    SweepConfig run = cfg.algo;
    run.checkpoint_path = (fs::path(cfg.out_dir) / "ground.mps").string();
    MpsState st0 = run.warm_start_path.empty()
                       ? random_mps(cfg.N, 2, run.m, run.seed)
                       : load_checkpoint(run.warm_start_path).state;
    run.warm_start_path.clear();

    auto [state, trace] = optimize(st0, spec, run);
    ConvergedEnergy ce = converged_energy(trace, run.averaging_window);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (cfg.trace) {
      std::ofstream tf(fs::path(cfg.out_dir) / "trace_ground.csv");
      write_trace_csv(tf, trace);
    }

    bool all_last_converged = true;
    for (const auto& s : trace.steps)
      if (s.sweep == trace.n_sweeps - 1 && !s.converged) all_last_converged = false;
    const bool converged =
        all_last_converged && ce.std_dev <= std::max(1e-6 * std::abs(ce.mean), 1e-12);

    json summary;
    summary["config"] = json::parse(resolved_config_json(cfg));
    summary["results"] = {{"E_mean", ce.mean},
                          {"E_std", ce.std_dev},
                          {"E_per_site", ce.mean / cfg.N},
                          {"sweeps", trace.n_sweeps},
                          {"converged", converged},
                          {"wall_time_seconds", wall}};
    std::ofstream sf(fs::path(cfg.out_dir) / "ground_summary.json");
    sf << summary.dump(2) << "\n";

    if (!opt.quiet)
      std::cout << "ground: E = " << ce.mean << " +- " << ce.std_dev << " ("
                << (converged ? "converged" : "not converged") << ")\n";
    return converged ? 0 : 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_stiffness(const std::string& config_path, const CliOptions& opt) {
  try {
    RunConfig cfg = load_run_config(config_path);
    apply_overrides(cfg, opt);
    fs::create_directories(cfg.out_dir);

    std::vector<double> grid = cfg.phi_grid.empty() ? default_phi_grid() : cfg.phi_grid;
    double phimax = 0;
    for (double phi : grid) phimax = std::max(phimax, std::abs(phi));
    if (phimax > 0.5 && !opt.quiet)
      std::cerr << "warning: |phi| grid extends beyond 0.5, outside the quadratic regime\n";

    StiffnessResult res;
    res.delta = cfg.delta;
    res.N = cfg.N;
    res.m = cfg.algo.m;
    res.p = cfg.algo.p;
    res.s = cfg.algo.s;
    res.rho_bethe = bethe_stiffness(cfg.delta, cfg.J);

    if (!cfg.synthetic_energies.empty()) {
      res.points = cfg.synthetic_energies;  // test hook
    } else {
      res.points = energy_vs_twist(cfg.delta, cfg.J, cfg.N, grid, cfg.algo,
                                   cfg.warm_start_grid);
    }
    res.fit = fit_stiffness(res.points, cfg.N);

    {
      std::ofstream cf(fs::path(cfg.out_dir) / "stiffness.csv");
      write_stiffness_csv(cf, res, cfg.algo.n_sweeps);
    }

    bool all_usable = true, all_converged = true;
    json pts = json::array();
    for (const auto& p : res.points) {
      all_usable = all_usable && p.usable;
      all_converged = all_converged && p.converged;
      pts.push_back({{"phi", p.phi},
                     {"E_mean", p.e_mean},
                     {"E_std", p.e_std},
                     {"usable", p.usable},
                     {"converged", p.converged}});
    }

    json summary;
    summary["config"] = json::parse(resolved_config_json(cfg));
    summary["results"] = {{"c2", res.fit.c2},
                          {"rho_s", res.fit.rho_s},
                          {"rho_bethe", res.rho_bethe},
                          {"fit_residual", res.fit.residual},
                          {"points", pts}};
    std::ofstream sf(fs::path(cfg.out_dir) / "stiffness_summary.json");
    sf << summary.dump(2) << "\n";

    if (!opt.quiet)
      std::cout << "stiffness: rho_s = " << res.fit.rho_s << " (Bethe " << res.rho_bethe
                << ", c2 = " << res.fit.c2 << ")\n";
    return (all_usable && all_converged) ? 0 : 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_validate(const CliOptions& opt) {
  struct Check {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Check> checks;
  auto run_check = [&](const std::string& name, auto&& fn) {
    try {
      auto [ok, detail] = fn();
      checks.push_back({name, ok, detail});
    } catch (const std::exception& e) {
      checks.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  run_check("two_site_singlet", []() -> std::pair<bool, std::string> {
    const double e = oracle::exact_ground(build_xxz(2, 1.0, 1.0, Boundary::open())).first;
    return {std::abs(e + 0.75) < 1e-12, "E0 = " + std::to_string(e)};
  });

  run_check("oracle_paths_agree_N10", []() -> std::pair<bool, std::string> {
    HamiltonianSpec spec = build_xxz(10, 1.0, 1.0, Boundary::periodic());
    const double e1 = oracle::exact_ground(spec).first;
    const double e2 = oracle::exact_ground_power(spec);
    return {std::abs(e1 - e2) < 1e-10, "dE = " + std::to_string(e1 - e2)};
  });

  run_check("obc_stiffness_zero", []() -> std::pair<bool, std::string> {
    const double r = oracle::exact_stiffness_fd(0.5, 8, 0.01, BoundaryKind::Open);
    return {std::abs(r) < 1e-9, "rho = " + std::to_string(r)};
  });

  run_check("mps_expand_consistency", []() -> std::pair<bool, std::string> {
    MpsState st = random_mps(6, 2, 2, 42);
    HamiltonianSpec spec = build_xxz(6, 1.0, 0.5, Boundary::periodic());
    auto ex = expectation(st, spec);
    auto dense = oracle::expand_mps(st);
    const double n2 = dense.amplitudes.squaredNorm();
    return {std::abs(n2 - ex.norm) < 1e-10 * std::max(1.0, ex.norm),
            "dN = " + std::to_string(n2 - ex.norm)};
  });

  run_check("sweep_matches_oracle_N6", []() -> std::pair<bool, std::string> {
    HamiltonianSpec spec = build_xxz(6, 1.0, 1.0, Boundary::periodic());
    const double e_exact = oracle::exact_ground(spec).first;
    SweepConfig cfg;
    cfg.m = 6;
    cfg.p = 36;
    cfg.s = 0;
    cfg.n_sweeps = 24;
    cfg.seed = 7;
    auto [st, trace] = optimize(random_mps(6, 2, 6, 7), spec, cfg);
    const double e = converged_energy(trace, 5).mean;
    return {std::abs(e - e_exact) < 1e-6 * std::abs(e_exact),
            "dE_rel = " + std::to_string((e - e_exact) / std::abs(e_exact))};
  });

  run_check("sweep_matches_oracle_twisted_N8", []() -> std::pair<bool, std::string> {
    HamiltonianSpec spec = build_xxz(8, 1.0, 0.5, Boundary::twisted(0.2));
    const double e_exact = oracle::exact_ground(spec).first;
    SweepConfig cfg;
    cfg.m = 6;
    cfg.p = 36;
    cfg.s = 0;
    cfg.n_sweeps = 28;
    cfg.seed = 11;
    auto [st, trace] = optimize(random_mps(8, 2, 6, 11), spec, cfg);
    const double e = converged_energy(trace, 5).mean;
    return {std::abs(e - e_exact) < 1e-6 * std::abs(e_exact),
            "dE_rel = " + std::to_string((e - e_exact) / std::abs(e_exact))};
  });

  bool all = true;
  for (const auto& c : checks) {
    all = all && c.pass;
    if (!opt.quiet || !c.pass)
      std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  " << c.detail << "\n";
  }
  if (!all) {
    std::cout << "validate: FAILED\n";
    return 1;
  }
  std::cout << "validate: all checks passed\n";
  return 0;
}

int cmd_trace_plot(const std::string& trace_csv, const std::string& out_csv,
                   const CliOptions& opt) {
  try {
    std::ifstream is(trace_csv);
    if (!is.good()) throw config_error("cannot open trace file " + trace_csv);
    std::ofstream os(out_csv);
    if (!os.good()) throw config_error("cannot open output file " + out_csv);

    os << "# mps-ring v" << kVersion << "\n";
    os << "step,sweep_frac,energy,delta_energy,sector_start\n";
    std::string line;
    long step = 0;
    double prev = 0;
    bool have_prev = false;
    int prev_sector = -1;
    long sites = 0;
    std::vector<std::array<double, 4>> rows;  // sweep, sector, site, energy
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("sweep,", 0) == 0) continue;
      std::stringstream ss(line);
      std::string tok;
      std::array<double, 6> v{};
      int c = 0;
      while (std::getline(ss, tok, ',') && c < 6) v[static_cast<size_t>(c++)] = std::stod(tok);
      if (c < 5) continue;
      rows.push_back({v[0], v[1], v[2], v[3]});
      sites = std::max(sites, static_cast<long>(v[2]) + 1);
    }
    for (const auto& r : rows) {
      const double frac = r[0] + (sites > 0 ? (r[2] + 1) / static_cast<double>(sites) : 0);
      const int sector = static_cast<int>(r[1]);
      const double de = have_prev ? r[3] - prev : 0.0;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%ld,%.8f,%.17g,%.17g,%d\n", step, frac, r[3], de,
                    (sector != prev_sector) ? 1 : 0);
      os << buf;
      prev = r[3];
      have_prev = true;
      prev_sector = sector;
      ++step;
    }
    if (!opt.quiet) std::cout << "trace-plot: wrote " << out_csv << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mpsring
