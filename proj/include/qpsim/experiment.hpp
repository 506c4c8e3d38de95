#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpsim/classifier.hpp"
#include "qpsim/simulator.hpp"
#include "qpsim/topology.hpp"

namespace qpsim {

/// Exit codes of the command-line tool.
enum class ExitCode : int {
  Ok = 0,
  ConfigError = 2,
  IoError = 3,
  Infeasible = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full experiment description. Every field has the stock default, so an
/// empty config file reproduces the reference setting.
struct ExperimentConfig {
  WattsStrogatzParams topology;
  std::uint64_t topology_seed = 31;  // a representative weight draw
  TrainingConfig training;
  SimConfig sim;  // lambda/seed fields are placeholders; the lists below drive runs
  std::vector<PolicyKind> policies = {
      PolicyKind::SemiSupervisedMedium, PolicyKind::SemiSupervisedHigh,
      PolicyKind::ShortestPathFixedOne, PolicyKind::ShortestPathFixedTwo,
      PolicyKind::Fifo,
  };
  std::vector<double> lambdas = {2.0, 6.0, 8.0};
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path out_dir = "out";

  std::filesystem::path topology_path() const { return out_dir / "topology.txt"; }
  std::filesystem::path dataset_path() const { return out_dir / "dataset.csv"; }
  std::filesystem::path model_path() const { return out_dir / "model.bin"; }
  std::filesystem::path training_report_path() const {
    return out_dir / "training_report.csv";
  }
  std::filesystem::path summary_path() const { return out_dir / "summary.csv"; }
  std::filesystem::path report_dir() const { return out_dir / "report"; }
};

/// Flat "key = value" sections; '#' and ';' start comments. Unknown keys are
/// rejected so typos fail loudly.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies the --seed override: topology, training and every run seed.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

std::string run_file_stem(PolicyKind policy, double lambda, std::uint64_t seed);

/// Subcommand bodies. Each writes its artifacts under config.out_dir and is
/// byte-reproducible for a fixed config.
void cmd_topology(const ExperimentConfig& config);
void cmd_dataset(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_simulate(const ExperimentConfig& config);
void cmd_report(const ExperimentConfig& config);

/// Empirical CDF over the values: one row per distinct value, cumulative
/// probability ending at 1.
struct CdfPoint {
  double value = 0.0;
  double cum_prob = 0.0;
};
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

}  // namespace qpsim
