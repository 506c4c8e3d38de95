// qpsim: entanglement-request scheduling experiments on quantum repeater
// networks. Subcommands mirror the pipeline: topology -> dataset -> train ->
// simulate -> report.

#include <CLI11.hpp>
#include <cstdio>
#include <optional>

#include "qpsim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantum-network purification scheduling simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "Experiment config file (key = value sections)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override every seed in the config");
  app.add_option("--out", out_dir, "Output directory (default: out)");

  auto* cmd_topology = app.add_subcommand("topology", "Generate the network and write its edge list");
  auto* cmd_dataset = app.add_subcommand("dataset", "Generate the classifier training dataset CSV");
  auto* cmd_train = app.add_subcommand("train", "Generate the dataset, train the round predictor, write model + report");
  auto* cmd_simulate = app.add_subcommand("simulate", "Run every (policy, lambda, seed) combination");
  auto* cmd_report = app.add_subcommand("report", "Build CDFs, gains and utilization tables from simulate outputs");
  for (CLI::App* sub : {cmd_topology, cmd_dataset, cmd_train, cmd_simulate, cmd_report}) {
    sub->fallthrough();  // global flags may follow the subcommand name
  }

  CLI11_PARSE(app, argc, argv);

  try {
    qpsim::ExperimentConfig config;
    if (!config_path.empty()) config = qpsim::load_config(config_path);
    if (seed) qpsim::override_seed(config, *seed);
    config.out_dir = out_dir;

    if (cmd_topology->parsed()) qpsim::cmd_topology(config);
    if (cmd_dataset->parsed()) qpsim::cmd_dataset(config);
    if (cmd_train->parsed()) qpsim::cmd_train(config);
    if (cmd_simulate->parsed()) qpsim::cmd_simulate(config);
    if (cmd_report->parsed()) qpsim::cmd_report(config);
    return static_cast<int>(qpsim::ExitCode::Ok);
  } catch (const qpsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return static_cast<int>(qpsim::ExitCode::ConfigError);
  } catch (const qpsim::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return static_cast<int>(qpsim::ExitCode::IoError);
  } catch (const qpsim::InfeasibleTargetError& e) {
    std::fprintf(stderr, "infeasible experiment: %s\n", e.what());
    return static_cast<int>(qpsim::ExitCode::Infeasible);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(qpsim::ExitCode::ConfigError);
  }
}
