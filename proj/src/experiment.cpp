#include "qpsim/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "qpsim/csv.hpp"

namespace qpsim {

namespace {

std::string trim(std::string_view s) {
  std::size_t first = 0;
  std::size_t last = s.size();
  while (first < last && std::isspace(static_cast<unsigned char>(s[first]))) ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(s[last - 1]))) --last;
  return std::string(s.substr(first, last - first));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  for (std::string_view piece : csv::split(value)) {
    items.push_back(trim(piece));
  }
  return items;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    return csv::parse_double(value);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    return csv::parse_int(value);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
      }
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "topology" && section != "gates" && section != "training" &&
          section != "simulation") {
        throw ConfigError("unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    }

    if (section == "topology") {
      if (key == "nodes") config.topology.nodes = static_cast<int>(to_int(key, value));
      else if (key == "degree") config.topology.degree = static_cast<int>(to_int(key, value));
      else if (key == "rewire_prob") config.topology.rewire_prob = to_double(key, value);
      else if (key == "hop_distance_km") config.topology.hop_distance_km = to_double(key, value);
      else if (key == "fidelity_stddev") config.topology.fidelity_stddev = to_double(key, value);
      else if (key == "seed") config.topology_seed = static_cast<std::uint64_t>(to_int(key, value));
      else if (key == "weights") {
        config.topology.weight_choices.clear();
        for (const std::string& item : split_list(value)) {
          config.topology.weight_choices.push_back(to_double(key, item));
        }
      } else {
        throw ConfigError("unknown key '" + key + "' in [topology]");
      }
    } else if (section == "gates") {
      if (key == "two_qubit_gate_fidelity") {
        config.sim.gate.two_qubit_gate_fidelity = to_double(key, value);
      } else if (key == "measurement_fidelity") {
        config.sim.gate.measurement_fidelity = to_double(key, value);
      } else {
        throw ConfigError("unknown key '" + key + "' in [gates]");
      }
    } else if (section == "training") {
      if (key == "samples_per_hop") config.training.samples_per_hop = static_cast<int>(to_int(key, value));
      else if (key == "epochs") config.training.epochs = static_cast<int>(to_int(key, value));
      else if (key == "batch_size") config.training.batch_size = static_cast<int>(to_int(key, value));
      else if (key == "lr_initial") config.training.lr_initial = to_double(key, value);
      else if (key == "lr_final") config.training.lr_final = to_double(key, value);
      else if (key == "validation_fraction") config.training.validation_fraction = to_double(key, value);
      else if (key == "seed") config.training.seed = static_cast<std::uint64_t>(to_int(key, value));
      else if (key == "hidden") {
        config.training.hidden_dims.clear();
        for (const std::string& item : split_list(value)) {
          config.training.hidden_dims.push_back(static_cast<int>(to_int(key, item)));
        }
      } else {
        throw ConfigError("unknown key '" + key + "' in [training]");
      }
    } else if (section == "simulation") {
      if (key == "timeslots") config.sim.n_timeslots = static_cast<int>(to_int(key, value));
      else if (key == "slot_interval_us") config.sim.slot_interval_us = to_double(key, value);
      else if (key == "fidelity_threshold") config.sim.fidelity_threshold = Fidelity(to_double(key, value));
      else if (key == "purification_time_us") config.sim.purification_time_us = to_double(key, value);
      else if (key == "entanglement_time_per_km_us") config.sim.entanglement_time_per_km_us = to_double(key, value);
      else if (key == "gamma") config.sim.gamma = to_double(key, value);
      else if (key == "target_margin") config.sim.target_margin = to_double(key, value);
      else if (key == "candidate_paths") config.sim.candidate_paths = static_cast<int>(to_int(key, value));
      else if (key == "lambdas") {
        config.lambdas.clear();
        for (const std::string& item : split_list(value)) {
          config.lambdas.push_back(to_double(key, item));
        }
      } else if (key == "seeds") {
        config.seeds.clear();
        for (const std::string& item : split_list(value)) {
          config.seeds.push_back(static_cast<std::uint64_t>(to_int(key, item)));
        }
      } else if (key == "bell_pairs") {
        const auto items = split_list(value);
        if (items.size() != 3) {
          throw ConfigError("bell_pairs expects three values (rounds 1, 2, 3)");
        }
        for (std::size_t i = 0; i < 3; ++i) {
          config.sim.bell_pairs_per_rounds[i] = static_cast<int>(to_int(key, items[i]));
        }
      } else if (key == "policies") {
        config.policies.clear();
        for (const std::string& item : split_list(value)) {
          try {
            config.policies.push_back(policy_from_string(item));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
        }
      } else {
        throw ConfigError("unknown key '" + key + "' in [simulation]");
      }
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
    }
  }
  if (config.lambdas.empty()) throw ConfigError("lambdas list must not be empty");
  if (config.seeds.empty()) throw ConfigError("seeds list must not be empty");
  if (config.policies.empty()) throw ConfigError("policies list must not be empty");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  return parse_config(in);
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.topology_seed = seed;
  config.training.seed = seed;
  config.seeds = {seed};
}

std::string run_file_stem(PolicyKind policy, double lambda, std::uint64_t seed) {
  return to_string(policy) + "_lambda" + csv::format_double(lambda) + "_seed" +
         std::to_string(seed);
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

Topology load_topology(const ExperimentConfig& config) {
  std::ifstream in(config.topology_path());
  if (!in) {
    throw IoError("topology file missing (run the topology command first): " +
                  config.topology_path().string());
  }
  return read_edge_list(in);
}

}  // namespace

void cmd_topology(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  const Topology topo = generate_watts_strogatz(config.topology, config.topology_seed);
  auto out = open_output(config.topology_path());
  write_edge_list(topo, out);
}

void cmd_dataset(const ExperimentConfig& config) {
  const Topology topo = load_topology(config);
  const auto samples =
      generate_dataset(topo, config.training.samples_per_hop, config.training.seed);
  auto out = open_output(config.dataset_path());
  write_dataset_csv(samples, out);
}

void cmd_train(const ExperimentConfig& config) {
  const Topology topo = load_topology(config);
  const auto samples =
      generate_dataset(topo, config.training.samples_per_hop, config.training.seed);
  TrainingReport report;
  const ClassifierModel model =
      train(samples, topo.node_count(), config.training, &report);
  save_model(model, config.model_path().string());
  auto out = open_output(config.training_report_path());
  write_training_report_csv(report, out);
}

void cmd_simulate(const ExperimentConfig& config) {
  const Topology topo = load_topology(config);
  std::optional<ClassifierModel> model;
  const bool needs_model =
      std::any_of(config.policies.begin(), config.policies.end(), policy_needs_model);
  if (needs_model) {
    if (!std::filesystem::exists(config.model_path())) {
      throw IoError("model file missing (run the train command first): " +
                    config.model_path().string());
    }
    model = load_model(config.model_path().string());
  }

  auto summary = open_output(config.summary_path());
  summary << "policy,lambda,seed,timeslots,generated,served,unserved,successes,"
             "bell_pairs,utilization,mean_latency,mean_throughput,mean_fidelity\n";
  for (PolicyKind policy : config.policies) {
    for (double lambda : config.lambdas) {
      for (std::uint64_t seed : config.seeds) {
        SimConfig sim = config.sim;
        sim.lambda = lambda;
        sim.seed = seed;
        const RunOutput run = run_simulation(sim, topo, policy,
                                             model ? &*model : nullptr);
        const std::string stem = run_file_stem(policy, lambda, seed);
        {
          auto trace = open_output(config.out_dir / ("trace_" + stem + ".csv"));
          write_trace_csv(run.requests, trace);
        }
        {
          auto slots = open_output(config.out_dir / ("slots_" + stem + ".csv"));
          write_slot_csv(run.metrics, slots);
        }
        summary << to_string(policy) << ',' << csv::format_double(lambda) << ','
                << seed << ',' << sim.n_timeslots << ','
                << run.metrics.total_generated << ',' << run.metrics.total_served
                << ',' << run.metrics.total_unserved << ','
                << run.metrics.total_success << ',' << run.metrics.total_bell_pairs
                << ',' << csv::format_double(run.metrics.utilization) << ','
                << csv::format_double(mean_latency_us(run.metrics)) << ','
                << csv::format_double(mean_throughput(run.metrics)) << ','
                << csv::format_double(mean_fidelity(run.metrics)) << "\n";
      }
    }
  }
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
  std::vector<CdfPoint> cdf;
  if (values.empty()) return cdf;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    cdf.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return cdf;
}

namespace {

struct SummaryRow {
  std::string policy;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double utilization = 0.0;
  double mean_latency = 0.0;
  double mean_throughput = 0.0;
};

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("summary file missing (run the simulate command first): " +
                         path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("policy,lambda,seed,", 0) != 0) {
    throw IoError("unexpected summary header in " + path.string());
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 13) throw IoError("malformed summary row in " + path.string());
    SummaryRow row;
    row.policy = std::string(f[0]);
    row.lambda = csv::parse_double(f[1]);
    row.seed = static_cast<std::uint64_t>(csv::parse_int(f[2]));
    row.utilization = csv::parse_double(f[9]);
    row.mean_latency = csv::parse_double(f[10]);
    row.mean_throughput = csv::parse_double(f[11]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void collect_trace_metrics(const std::filesystem::path& path,
                           std::vector<double>& fidelities,
                           std::vector<double>& latencies) {
  std::ifstream in(path);
  if (!in) throw IoError("trace file missing: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 11) throw IoError("malformed trace row in " + path.string());
    if (!f[6].empty()) fidelities.push_back(csv::parse_double(f[6]));
    if (!f[7].empty()) latencies.push_back(csv::parse_double(f[7]));
  }
}

void collect_slot_throughputs(const std::filesystem::path& path,
                              std::vector<double>& throughputs) {
  std::ifstream in(path);
  if (!in) throw IoError("slot file missing: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw IoError("malformed slot row in " + path.string());
    throughputs.push_back(csv::parse_double(f[2]));
  }
}

void write_cdf_csv(const std::filesystem::path& path, std::vector<double> values) {
  auto out = open_output(path);
  out << "value,cum_prob\n";
  for (const CdfPoint& p : empirical_cdf(std::move(values))) {
    out << csv::format_double(p.value) << ',' << csv::format_double(p.cum_prob)
        << "\n";
  }
}

template <typename T>
void push_unique(std::vector<T>& items, const T& value) {
  if (std::find(items.begin(), items.end(), value) == items.end()) {
    items.push_back(value);
  }
}

}  // namespace

void cmd_report(const ExperimentConfig& config) {
  const std::vector<SummaryRow> rows = read_summary(config.summary_path());
  if (rows.empty()) throw IoError("summary file has no runs");
  std::filesystem::create_directories(config.report_dir());

  std::vector<std::string> policies;
  std::vector<double> lambdas;
  for (const SummaryRow& row : rows) {
    push_unique(policies, row.policy);
    push_unique(lambdas, row.lambda);
  }

  for (const std::string& policy : policies) {
    for (double lambda : lambdas) {
      std::vector<double> fidelities;
      std::vector<double> latencies;
      std::vector<double> throughputs;
      bool any = false;
      for (const SummaryRow& row : rows) {
        if (row.policy != policy || row.lambda != lambda) continue;
        any = true;
        const std::string stem =
            run_file_stem(policy_from_string(policy), lambda, row.seed);
        collect_trace_metrics(config.out_dir / ("trace_" + stem + ".csv"),
                              fidelities, latencies);
        collect_slot_throughputs(config.out_dir / ("slots_" + stem + ".csv"),
                                 throughputs);
      }
      if (!any) continue;
      const std::string suffix = policy + "_lambda" + csv::format_double(lambda);
      write_cdf_csv(config.report_dir() / ("cdf_fidelity_" + suffix + ".csv"),
                    std::move(fidelities));
      write_cdf_csv(config.report_dir() / ("cdf_latency_" + suffix + ".csv"),
                    std::move(latencies));
      write_cdf_csv(config.report_dir() / ("cdf_throughput_" + suffix + ".csv"),
                    std::move(throughputs));
    }
  }

  // Per-seed means averaged per (policy, lambda).
  const auto mean_over_seeds = [&](const std::string& policy, double lambda,
                                   auto field) -> std::optional<double> {
    double sum = 0.0;
    int count = 0;
    for (const SummaryRow& row : rows) {
      if (row.policy == policy && row.lambda == lambda) {
        sum += field(row);
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
  };

  {
    auto out = open_output(config.report_dir() / "utilization.csv");
    out << "policy";
    for (double lambda : lambdas) out << ",lambda_" << csv::format_double(lambda);
    out << "\n";
    for (const std::string& policy : policies) {
      out << policy;
      for (double lambda : lambdas) {
        out << ',';
        const auto mean = mean_over_seeds(policy, lambda,
                                          [](const SummaryRow& r) { return r.utilization; });
        if (mean) out << csv::format_double(*mean);
      }
      out << "\n";
    }
  }

  const bool have_pair =
      std::find(policies.begin(), policies.end(), "semi_medium") != policies.end() &&
      std::find(policies.begin(), policies.end(), "fixed2") != policies.end();
  if (have_pair) {
    auto out = open_output(config.report_dir() / "gains.csv");
    out << "lambda,latency_gain_pct,throughput_gain_pct\n";
    for (double lambda : lambdas) {
      const auto lat_semi = mean_over_seeds("semi_medium", lambda,
                                            [](const SummaryRow& r) { return r.mean_latency; });
      const auto lat_fixed = mean_over_seeds("fixed2", lambda,
                                             [](const SummaryRow& r) { return r.mean_latency; });
      const auto thr_semi = mean_over_seeds("semi_medium", lambda,
                                            [](const SummaryRow& r) { return r.mean_throughput; });
      const auto thr_fixed = mean_over_seeds("fixed2", lambda,
                                             [](const SummaryRow& r) { return r.mean_throughput; });
      if (!lat_semi || !lat_fixed || !thr_semi || !thr_fixed) continue;
      const double latency_gain = 100.0 * (*lat_fixed - *lat_semi) / *lat_fixed;
      const double throughput_gain = 100.0 * (*thr_semi - *thr_fixed) / *thr_fixed;
      out << csv::format_double(lambda) << ',' << csv::format_double(latency_gain)
          << ',' << csv::format_double(throughput_gain) << "\n";
    }
  }
}

}  // namespace qpsim
