// Batch front end: ground-state runs, stiffness sweeps, oracle validation and
// trace post-processing. Configs in, CSV/JSON/checkpoints out.

#include "mpsring/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"mps-ring: variational MPS ground states on periodic rings"};
  app.require_subcommand(1);

  mpsring::CliOptions opt;
  std::string config_path, trace_in, plot_out;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", opt.seed, "override algorithm.seed");
    sub->add_option("--out", opt.out_dir, "override output.dir");
    sub->add_option("--jobs", opt.jobs, "parallel independent runs (default 1)");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
  };

  CLI::App* ground = app.add_subcommand("ground", "converge one ground-state run");
  add_common(ground, true);
  CLI::App* stiff = app.add_subcommand("stiffness", "twist sweep + quadratic fit");
  add_common(stiff, true);
  CLI::App* val = app.add_subcommand("validate", "oracle-equivalence suite (small N)");
  add_common(val, false);
  CLI::App* plot = app.add_subcommand("trace-plot", "emit plot-ready CSV from a trace");
  plot->add_option("--trace", trace_in, "input trace CSV")->required();
  plot->add_option("--out-csv", plot_out, "output CSV")->required();
  plot->add_flag("--quiet", opt.quiet, "suppress progress output");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(ground)) return mpsring::cmd_ground(config_path, opt);
  if (app.got_subcommand(stiff)) return mpsring::cmd_stiffness(config_path, opt);
  if (app.got_subcommand(val)) return mpsring::cmd_validate(opt);
  if (app.got_subcommand(plot)) return mpsring::cmd_trace_plot(trace_in, plot_out, opt);
  return 1;
}
