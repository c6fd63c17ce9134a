// synclattice: simulate coupled lattices, sweep coupling strength, locate the
// synchronization threshold, and check cluster/symmetry invariance.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "synclattice/commands.hpp"

int main(int argc, char** argv) {
  using namespace synclattice;

  CLI::App app{"Asynchronous lattice synchronization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out, svg_path;
  std::uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config file")->required();
  auto* out_opt = app.add_option("--out", out, "output CSV path (overrides [output] csv)");
  auto* svg_opt = app.add_option("--svg", svg_path, "SVG plot path (sweep)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides [experiment] seed)");
  app.add_flag("--quiet", quiet, "suppress progress messages");

  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory and write states plus synchrony summary");
  auto* sweep = app.add_subcommand("sweep", "evaluate R, drift, eta and mu over lambda_grid");
  auto* threshold = app.add_subcommand("threshold", "bisect for the coherence threshold lambda_c");
  auto* clusters = app.add_subcommand("clusters", "coarsest balanced partition, optional invariance check");
  app.add_subcommand("symmetry", "equivariance defects and orbit partition of generators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  cli::Overrides ov;
  if (*out_opt) ov.out = out;
  if (*svg_opt) ov.svg = svg_path;
  if (*seed_opt) ov.seed = seed;
  ov.quiet = quiet;
  ov.threads = cli::threads_from_env();

  return cli::run_guarded([&] {
    const RunConfig cfg = load_config(config_path);
    if (*simulate) return cli::cmd_simulate(cfg, ov);
    if (*sweep) return cli::cmd_sweep(cfg, ov);
    if (*threshold) return cli::cmd_threshold(cfg, ov);
    if (*clusters) return cli::cmd_clusters(cfg, ov);
    return cli::cmd_symmetry(cfg, ov);
  });
}
