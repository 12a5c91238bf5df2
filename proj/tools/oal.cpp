// Command-line front end: pump sweeps, g2 curves, click-record generation
// and the estimation pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "oal/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"oal - strongly coupled one-atom laser simulator"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  auto* opt_config = app.add_option("--config", config_path, "key = value config file");
  auto* opt_preset = app.add_option("--preset", preset, "fig3, fig4_low or fig4_high");
  auto* opt_out = app.add_option("--out-dir", out_dir, "output directory (default: out)");
  auto* opt_seed = app.add_option("--seed", seed, "master random seed");
  app.add_option("--threads", threads, "worker threads for sweeps/trajectories");

  auto* sweep = app.add_subcommand("sweep", "steady-state nbar(x) plus the semiclassical scan");
  auto* g2 = app.add_subcommand("g2", "g2(tau) by quantum regression, raw and smoothed");
  auto* traj = app.add_subcommand("trajectories", "Monte-Carlo records and count-rate traces");
  auto* est = app.add_subcommand("estimate", "reconstruct g2 and nbar from click records");
  std::vector<std::string> record_paths;
  est->add_option("records", record_paths, "click record files")->required();
  for (auto* sub : {sweep, g2, traj, est}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    oal::RunConfig cfg;
    if (*opt_preset) oal::apply_preset(cfg, preset);
    if (*opt_config) oal::apply_config_file(cfg, config_path);
    if (*opt_seed) cfg.seed = seed;
    if (*opt_out) cfg.out_dir = out_dir;

    if (sweep->parsed()) oal::cmd_sweep(cfg, threads);
    if (g2->parsed()) oal::cmd_g2(cfg);
    if (traj->parsed()) oal::cmd_trajectories(cfg, threads);
    if (est->parsed()) oal::cmd_estimate(record_paths, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
