#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lmclab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Langevin Monte Carlo planning, sampling and verification"};
  app.require_subcommand(1);

  std::string config_path;
  lmc::CliOptions cli;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::string suite = "all";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config or run manifest")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--output-dir", output_dir, "override the output directory");
  };
  auto* plan = app.add_subcommand("plan", "print the step size, step count and constants");
  auto* run = app.add_subcommand("run", "sample and check the guarantees");
  auto* audit = app.add_subcommand("audit", "check the declared constants against the potential");
  auto* verify = app.add_subcommand("verify", "run the inequality verification suites");
  for (auto* sub : {plan, run, audit, verify}) add_common(sub);
  run->add_flag("--force", cli.force, "sample even when infeasible or above the step-size cap");
  verify->add_option("--suite", suite, "mlsi | moments | metrics | all")
      ->check(CLI::IsMember({"mlsi", "moments", "metrics", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lmc::exit_code::config;
  }

  return lmc::guarded(
      [&]() -> int {
        const lmc::LoadedConfig loaded = lmc::load_config(config_path);
        cli.seed = seed;
        cli.output_dir = output_dir;
        if (loaded.from_manifest) cli.force = cli.force || loaded.manifest_force;
        const lmc::ExperimentConfig cfg = lmc::apply_cli(loaded.config, cli);
        if (*plan) return lmc::cmd_plan(cfg, cli, std::cout);
        if (*run) return lmc::cmd_run(cfg, cli, std::cout);
        if (*audit) return lmc::cmd_audit(cfg, cli, std::cout);
        return lmc::cmd_verify(cfg, cli, suite, std::cout);
      },
      std::cerr);
}
