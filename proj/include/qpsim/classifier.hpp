#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qpsim/topology.hpp"

namespace qpsim {

/// One-hot source block concatenated with one-hot destination block;
/// direction matters.
Eigen::VectorXd encode_hop(NodeId src, NodeId dst, int node_count);

/// One labelled draw: the purified fidelity a directed hop reached after
/// `rounds` purification rounds.
struct TrainingSample {
  NodeId src = 0;
  NodeId dst = 0;
  double fidelity = 0.0;
  int rounds = 1;  // class label, in {1, 2, 3}
};

/// Feed-forward round predictor: rectifier hidden layers, raw logits out.
/// Input layout is [one-hot src | one-hot dst | fidelity].
struct ClassifierModel {
  std::vector<int> layer_dims;           // first = 2*nodes + 1, last = classes
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return layer_dims.front(); }
  int node_count() const { return (layer_dims.front() - 1) / 2; }
  int class_count() const { return layer_dims.back(); }

  Eigen::VectorXd logits(const Eigen::VectorXd& input) const;
  /// Batched forward pass; inputs and result are one column per sample.
  Eigen::MatrixXd logits_batch(const Eigen::MatrixXd& inputs) const;
  bool all_finite() const;
};

/// Fresh model with scaled uniform initialization, deterministic under seed.
ClassifierModel make_classifier(int node_count, const std::vector<int>& hidden_dims,
                                std::uint64_t seed);

struct TrainingConfig {
  int samples_per_hop = 10000;
  int epochs = 500;
  int batch_size = 8;
  double lr_initial = 1e-3;
  double lr_final = 1e-5;
  double validation_fraction = 0.2;
  std::vector<int> hidden_dims = {64, 64};
  std::uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;  // 1-based in reports
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  double final_val_accuracy() const {
    return epochs.empty() ? 0.0 : epochs.back().val_accuracy;
  }
};

/// For every hop: draw the batch fidelity, pick rounds uniformly from {1,2,3},
/// purify deterministically, and emit the sample in both hop orientations.
/// Yields 2 * hops * samples_per_hop samples.
std::vector<TrainingSample> generate_dataset(const Topology& topo,
                                             int samples_per_hop,
                                             std::uint64_t seed);

/// Cosine-annealed step size; epoch 0 gives lr_initial, epoch = total gives
/// lr_final.
double cosine_annealed_lr(int epoch, int total_epochs, double lr_initial,
                          double lr_final);

/// Mini-batch SGD on softmax cross-entropy with a cosine-annealed learning
/// rate. The 80/20 split is stratified by directed hop and seeded; validation
/// accuracy is exact-match argmax. Deterministic: same dataset + config gives
/// a bit-identical model.
ClassifierModel train(const std::vector<TrainingSample>& dataset, int node_count,
                      const TrainingConfig& config,
                      TrainingReport* report = nullptr);

/// Predicted purification rounds for the hop at the requested target fidelity.
/// Argmax ties resolve to the lowest class (fewest rounds).
int predict_rounds(const ClassifierModel& model, NodeId src, NodeId dst,
                   Fidelity target_fidelity);

/// Parameter gradients, shaped like the model.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Mean cross-entropy of the batch (columns of `inputs`, labels in {1..classes}).
double cross_entropy_loss(const ClassifierModel& model,
                          const Eigen::MatrixXd& inputs,
                          const std::vector<int>& labels);

/// Same loss, also filling analytic gradients for every parameter.
double cross_entropy_with_gradients(const ClassifierModel& model,
                                    const Eigen::MatrixXd& inputs,
                                    const std::vector<int>& labels,
                                    Gradients& grads);

/// Versioned binary model file (magic, dims, row-major parameters, checksum).
void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

void write_dataset_csv(const std::vector<TrainingSample>& samples,
                       std::ostream& out);
std::vector<TrainingSample> read_dataset_csv(std::istream& in);

void write_training_report_csv(const TrainingReport& report, std::ostream& out);

}  // namespace qpsim
