#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vml/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vml_lab: exact mode-seeking diffusion MAP estimation on "
               "Gaussian-mixture inverse problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string suite = "all";
  int workers = 4;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_dir,
                    "output directory (default: config output_dir, then $VML_LAB_OUT)");
    return cmd;
  };

  CLI::App* solve = add_common(app.add_subcommand("solve", "run the MAP solver"), true);
  auto* seed_opt = solve->add_option("--seed", seed, "override the config seed");

  CLI::App* check =
      app.add_subcommand("check", "run the verification suites against the oracles");
  check->add_option("--suite", suite, "identities | gradients | limits | all");
  check->add_option("--out", out_dir, "output directory for the checks CSV");

  CLI::App* densities = add_common(
      app.add_subcommand("densities", "export marginal and conditional density grids"),
      true);
  densities->add_option("--workers", workers, "worker pool size");

  CLI::App* schedule =
      add_common(app.add_subcommand("schedule", "print the sigma grid"), true);

  CLI11_PARSE(app, argc, argv);

  vml::CliOverrides overrides;
  if (!out_dir.empty()) overrides.out_dir = out_dir;
  overrides.workers = workers;

  if (solve->parsed()) {
    if (seed_opt->count() > 0) overrides.seed = seed;
    return vml::cmd_solve(config_path, overrides, std::cout);
  }
  if (check->parsed()) return vml::cmd_check(suite, overrides, std::cout);
  if (densities->parsed()) return vml::cmd_densities(config_path, overrides, std::cout);
  if (schedule->parsed()) return vml::cmd_schedule(config_path, std::cout);
  return 1;
}
