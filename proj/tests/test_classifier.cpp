#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpsim/classifier.hpp"
#include "qpsim/rng.hpp"

using namespace qpsim;

namespace {

Topology two_nodes(double weight, double stddev = 0.01) {
  return Topology(2, {{0, 1, weight, 1.0, stddev}});
}

// Central finite differences over every parameter.
double max_gradient_mismatch(ClassifierModel model, const Eigen::MatrixXd& inputs,
                             const std::vector<int>& labels) {
  Gradients grads;
  cross_entropy_with_gradients(model, inputs, labels, grads);
  constexpr double h = 1e-6;
  double worst = 0.0;
  const auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = cross_entropy_loss(model, inputs, labels);
    param = saved - h;
    const double down = cross_entropy_loss(model, inputs, labels);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
        probe(model.weights[l](r, c), grads.weights[l](r, c));
      }
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
      probe(model.biases[l](r), grads.biases[l](r));
    }
  }
  return worst;
}

ClassifierModel zeroed(ClassifierModel model) {
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  return model;
}

}  // namespace

TEST_CASE("hop encoding is one-hot per block and direction-sensitive") {
  const Eigen::VectorXd v = encode_hop(0, 2, 4);
  Eigen::VectorXd expected(8);
  expected << 1, 0, 0, 0, 0, 0, 1, 0;
  CHECK(v == expected);

  const Eigen::VectorXd w = encode_hop(9, 0, 10);
  CHECK(w.sum() == 2.0);
  CHECK(w(9) == 1.0);
  CHECK(w(10) == 1.0);

  CHECK(encode_hop(1, 3, 5) != encode_hop(3, 1, 5));
  CHECK_THROWS_AS(encode_hop(2, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(encode_hop(0, 7, 5), std::out_of_range);
}

TEST_CASE("dataset counting and label range") {
  const auto samples = generate_dataset(two_nodes(0.1), 3, 1);
  REQUIRE(samples.size() == 6);
  for (const TrainingSample& s : samples) {
    CHECK(s.rounds >= 1);
    CHECK(s.rounds <= 3);
    CHECK(((s.src == 0 && s.dst == 1) || (s.src == 1 && s.dst == 0)));
  }
}

TEST_CASE("dataset fidelities follow the deterministic purification pipeline") {
  const auto samples = generate_dataset(two_nodes(0.1, 0.0), 500, 9);
  int label_counts[4] = {0, 0, 0, 0};
  for (const TrainingSample& s : samples) {
    ++label_counts[s.rounds];
    CHECK(s.fidelity ==
          doctest::Approx(purify_rounds(Fidelity(0.9), s.rounds).value())
              .epsilon(1e-12));
  }
  // 0.9 -> 0.926395939... after one round, 0.947207793... after two.
  bool saw_two = false;
  for (const TrainingSample& s : samples) {
    if (s.rounds == 2) {
      CHECK(s.fidelity == doctest::Approx(0.9472077932330234).epsilon(1e-12));
      saw_two = true;
    }
  }
  CHECK(saw_two);
  for (int r = 1; r <= 3; ++r) CHECK(label_counts[r] > 0);
}

TEST_CASE("labels are near-uniform over a large dataset") {
  const auto samples = generate_dataset(two_nodes(0.15), 15000, 3);
  double counts[4] = {0, 0, 0, 0};
  for (const TrainingSample& s : samples) counts[s.rounds] += 1.0;
  for (int r = 1; r <= 3; ++r) {
    CHECK(counts[r] / static_cast<double>(samples.size()) ==
          doctest::Approx(1.0 / 3.0).epsilon(0.03));
  }
}

TEST_CASE("uniform logits give ln(3) loss and class-one prediction") {
  const ClassifierModel model = zeroed(make_classifier(4, {8, 8}, 1));
  Eigen::MatrixXd inputs(model.input_dim(), 5);
  RandomStream rng(3);
  for (Eigen::Index c = 0; c < 5; ++c) {
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) inputs(r, c) = rng.next_double();
  }
  const std::vector<int> labels = {1, 2, 3, 1, 2};
  CHECK(cross_entropy_loss(model, inputs, labels) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(predict_rounds(model, 0, 3, Fidelity(0.9)) == 1);
}

TEST_CASE("analytic gradients match central finite differences") {
  RandomStream rng(17);
  for (int batch = 0; batch < 5; ++batch) {
    ClassifierModel model = make_classifier(4, {8, 6}, 100 + batch);
    Eigen::MatrixXd inputs(model.input_dim(), 10);
    std::vector<int> labels(10);
    for (Eigen::Index c = 0; c < 10; ++c) {
      for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        inputs(r, c) = 2.0 * rng.next_double() - 1.0;
      }
      labels[static_cast<std::size_t>(c)] = 1 + static_cast<int>(rng.next_below(3));
    }
    CHECK(max_gradient_mismatch(model, inputs, labels) < 1e-4);
  }
}

TEST_CASE("cosine annealing endpoints and midpoint") {
  CHECK(cosine_annealed_lr(0, 500, 1e-3, 1e-5) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(cosine_annealed_lr(250, 500, 1e-3, 1e-5) ==
        doctest::Approx(0.000505).epsilon(1e-12));
  CHECK(cosine_annealed_lr(500, 500, 1e-3, 1e-5) == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("training is deterministic and separable data reaches full accuracy") {
  // Two fidelity clusters far apart: class 1 near 0.55, class 2 near 0.95.
  std::vector<TrainingSample> samples;
  RandomStream rng(5);
  for (int i = 0; i < 2000; ++i) {
    const bool high = (i % 2) == 0;
    TrainingSample s;
    s.src = (i % 4) < 2 ? 0 : 1;
    s.dst = 1 - s.src;
    s.fidelity = (high ? 0.95 : 0.55) + 0.005 * (rng.next_double() - 0.5);
    s.rounds = high ? 2 : 1;
    samples.push_back(s);
  }
  TrainingConfig config;
  config.epochs = 50;
  config.hidden_dims = {16, 16};
  config.seed = 2;
  TrainingReport report;
  const ClassifierModel model = train(samples, 2, config, &report);
  REQUIRE(report.epochs.size() == 50);
  CHECK(report.final_val_accuracy() == 1.0);
  for (const EpochStats& e : report.epochs) CHECK(std::isfinite(e.train_loss));

  const ClassifierModel again = train(samples, 2, config, nullptr);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    CHECK(model.weights[l] == again.weights[l]);
    CHECK(model.biases[l] == again.biases[l]);
  }

  CHECK_THROWS_AS(train({}, 2, config, nullptr), std::invalid_argument);
  const std::vector<TrainingSample> one_class(10, TrainingSample{0, 1, 0.9, 2});
  CHECK_THROWS_AS(train(one_class, 2, config, nullptr), std::invalid_argument);
}

TEST_CASE("trained predictions track the analytic purification oracle") {
  WattsStrogatzParams params;
  const Topology topo = generate_watts_strogatz(params, 1);
  const auto samples = generate_dataset(topo, 500, 1);
  TrainingConfig config;
  config.epochs = 200;
  config.seed = 1;
  TrainingReport report;
  const ClassifierModel model = train(samples, topo.node_count(), config, &report);
  CHECK(report.final_val_accuracy() >= 0.8);

  // Smallest round count that reaches the target from the hop's mean fidelity.
  const auto oracle = [](double mean_f0, double target) {
    for (int r = 1; r <= 3; ++r) {
      if (purify_rounds(Fidelity(mean_f0), r).value() >= target) return r;
    }
    return 3;
  };

  int match_low_weight = 0;
  int total_low_weight = 0;
  int monotone = 0;
  int total_pairs = 0;
  for (const HopProfile& hop : topo.hops()) {
    if (hop.weight == 0.05) {
      for (const auto& [src, dst] : {std::pair{hop.a, hop.b}, {hop.b, hop.a}}) {
        ++total_low_weight;
        if (predict_rounds(model, src, dst, Fidelity(0.96)) == oracle(0.95, 0.96)) {
          ++match_low_weight;
        }
      }
    }
    if (hop.weight == 0.25) {
      for (const HopProfile& good : topo.hops()) {
        if (good.weight != 0.05) continue;
        ++total_pairs;
        const int bad_rounds = predict_rounds(model, hop.a, hop.b, Fidelity(0.9));
        const int good_rounds = predict_rounds(model, good.a, good.b, Fidelity(0.9));
        if (bad_rounds >= good_rounds) ++monotone;
      }
    }
  }
  if (total_low_weight > 0) {
    CHECK(static_cast<double>(match_low_weight) / total_low_weight >= 0.9);
  }
  if (total_pairs > 0) {
    CHECK(static_cast<double>(monotone) / total_pairs >= 0.9);
  }
}

TEST_CASE("model persistence round trip and corruption detection") {
  const ClassifierModel model = make_classifier(10, {64, 64}, 77);
  const auto dir = std::filesystem::temp_directory_path() / "qpsim_test_classifier";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.bin").string();
  save_model(model, path);
  const ClassifierModel loaded = load_model(path);
  REQUIRE(loaded.layer_dims == model.layer_dims);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    CHECK(loaded.weights[l] == model.weights[l]);
    CHECK(loaded.biases[l] == model.biases[l]);
  }
  CHECK(loaded.node_count() == 10);

  // Flip one payload byte: the checksum must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    char byte = 0;
    f.seekg(64);
    f.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0x40);
    f.seekp(64);
    f.write(&byte, 1);
  }
  CHECK_THROWS(load_model(path));
  CHECK_THROWS(load_model((dir / "missing.bin").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset CSV round trip") {
  const auto samples = generate_dataset(two_nodes(0.2), 25, 4);
  std::stringstream buffer;
  write_dataset_csv(samples, buffer);
  const std::string bytes = buffer.str();
  std::stringstream input(bytes);
  const auto reloaded = read_dataset_csv(input);
  REQUIRE(reloaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(reloaded[i].src == samples[i].src);
    CHECK(reloaded[i].dst == samples[i].dst);
    CHECK(reloaded[i].fidelity == samples[i].fidelity);
    CHECK(reloaded[i].rounds == samples[i].rounds);
  }
  std::stringstream again;
  write_dataset_csv(reloaded, again);
  CHECK(again.str() == bytes);
}
