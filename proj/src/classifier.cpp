#include "qpsim/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qpsim/csv.hpp"
#include "qpsim/rng.hpp"

namespace qpsim {

Eigen::VectorXd encode_hop(NodeId src, NodeId dst, int node_count) {
  if (src == dst) throw std::invalid_argument("hop endpoints must differ");
  if (src < 0 || dst < 0 || src >= node_count || dst >= node_count) {
    throw std::out_of_range("node id outside the topology");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * node_count);
  v(src) = 1.0;
  v(node_count + dst) = 1.0;
  return v;
}

Eigen::VectorXd ClassifierModel::logits(const Eigen::VectorXd& input) const {
  Eigen::VectorXd a = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::VectorXd z = weights[l] * a + biases[l];
    if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd ClassifierModel::logits_batch(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = (weights[l] * a).colwise() + biases[l];
    if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

bool ClassifierModel::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

ClassifierModel make_classifier(int node_count, const std::vector<int>& hidden_dims,
                                std::uint64_t seed) {
  if (node_count < 2) throw std::invalid_argument("need at least two nodes");
  ClassifierModel model;
  model.layer_dims.push_back(2 * node_count + 1);
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("hidden layer width must be positive");
    model.layer_dims.push_back(h);
  }
  model.layer_dims.push_back(3);

  RandomStream rng = substream(seed, stream_tag::weight_init);
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const int fan_in = model.layer_dims[l];
    const int fan_out = model.layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        w(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
      }
    }
    // Biases share the scaled-uniform draw; an all-zero bias vector would put
    // dead samples exactly on the rectifier kink.
    Eigen::VectorXd b(fan_out);
    for (int r = 0; r < fan_out; ++r) {
      b(r) = (2.0 * rng.next_double() - 1.0) * bound;
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

std::vector<TrainingSample> generate_dataset(const Topology& topo,
                                             int samples_per_hop,
                                             std::uint64_t seed) {
  if (samples_per_hop < 1) {
    throw std::invalid_argument("samples_per_hop must be at least 1");
  }
  std::vector<TrainingSample> samples;
  samples.reserve(2 * topo.hops().size() * static_cast<std::size_t>(samples_per_hop));
  for (std::size_t h = 0; h < topo.hops().size(); ++h) {
    const HopProfile& hop = topo.hops()[h];
    RandomStream rng = substream(seed, stream_tag::dataset, h);
    for (int i = 0; i < samples_per_hop; ++i) {
      const Fidelity f0 = sample_initial_fidelity(hop, rng);
      const int rounds = 1 + static_cast<int>(rng.next_below(3));
      const double purified = purify_rounds(f0, rounds).value();
      samples.push_back({hop.a, hop.b, purified, rounds});
      samples.push_back({hop.b, hop.a, purified, rounds});
    }
  }
  return samples;
}

double cosine_annealed_lr(int epoch, int total_epochs, double lr_initial,
                          double lr_final) {
  const double phase = 3.14159265358979323846 * epoch / total_epochs;
  return lr_final + (lr_initial - lr_final) * (1.0 + std::cos(phase)) / 2.0;
}

namespace {

// Forward/backward workspace reused across SGD steps to avoid reallocation.
struct TrainWorkspace {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input batch
  std::vector<Eigen::MatrixXd> deltas;

  void resize(const std::vector<int>& dims, int batch) {
    activations.resize(dims.size());
    deltas.resize(dims.size() - 1);
    for (std::size_t l = 0; l < dims.size(); ++l) {
      activations[l].resize(dims[l], batch);
      if (l > 0) deltas[l - 1].resize(dims[l], batch);
    }
  }
};

// Softmax cross-entropy over the last activation; returns the batch-mean loss
// and leaves d(loss)/d(logits) in `delta`.
double softmax_loss_and_delta(const Eigen::MatrixXd& logits,
                              const std::vector<int>& labels,
                              Eigen::MatrixXd* delta) {
  const Eigen::Index batch = logits.cols();
  double loss = 0.0;
  if (delta) delta->resize(logits.rows(), batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const auto col = logits.col(c);
    const double peak = col.maxCoeff();
    const Eigen::VectorXd shifted = (col.array() - peak).exp();
    const double total = shifted.sum();
    const int cls = labels[static_cast<std::size_t>(c)] - 1;
    loss += std::log(total) - (col(cls) - peak);
    if (delta) {
      delta->col(c) = shifted / total;
      (*delta)(cls, c) -= 1.0;
    }
  }
  if (delta) *delta /= static_cast<double>(batch);
  return loss / static_cast<double>(batch);
}

double forward_backward(const ClassifierModel& model, TrainWorkspace& ws,
                        const std::vector<int>& labels, Gradients& grads) {
  const std::size_t layers = model.weights.size();
  const Eigen::Index batch = ws.activations[0].cols();
  for (std::size_t l = 0; l < layers; ++l) {
    auto& out = ws.activations[l + 1];
    out.noalias() = model.weights[l] * ws.activations[l];
    out.colwise() += model.biases[l];
    if (l + 1 < layers) out = out.cwiseMax(0.0);
  }

  const double loss =
      softmax_loss_and_delta(ws.activations[layers], labels, &ws.deltas[layers - 1]);

  for (std::size_t l = layers; l-- > 0;) {
    grads.weights[l].noalias() = ws.deltas[l] * ws.activations[l].transpose();
    grads.biases[l] = ws.deltas[l].rowwise().sum();
    if (l > 0) {
      ws.deltas[l - 1].noalias() = model.weights[l].transpose() * ws.deltas[l];
      // Rectifier gate: activations are zero exactly where the unit was off.
      ws.deltas[l - 1] =
          (ws.activations[l].array() > 0.0).select(ws.deltas[l - 1], 0.0);
    }
  }
  (void)batch;
  return loss;
}

Gradients make_gradients(const ClassifierModel& model) {
  Gradients g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.biases.emplace_back(model.biases[l].size());
  }
  return g;
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

double batched_accuracy(const ClassifierModel& model, const Eigen::MatrixXd& inputs,
                        const std::vector<int>& labels) {
  if (inputs.cols() == 0) return 0.0;
  constexpr Eigen::Index chunk = 4096;
  Eigen::Index hits = 0;
  for (Eigen::Index start = 0; start < inputs.cols(); start += chunk) {
    const Eigen::Index width = std::min(chunk, inputs.cols() - start);
    const Eigen::MatrixXd logits = model.logits_batch(inputs.middleCols(start, width));
    for (Eigen::Index c = 0; c < width; ++c) {
      if (argmax_lowest(logits.col(c)) + 1 == labels[static_cast<std::size_t>(start + c)]) {
        ++hits;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(inputs.cols());
}

void fill_input_column(Eigen::Ref<Eigen::MatrixXd> block, Eigen::Index col,
                       const TrainingSample& s, int node_count) {
  block.col(col).setZero();
  block(s.src, col) = 1.0;
  block(node_count + s.dst, col) = 1.0;
  block(2 * node_count, col) = s.fidelity;
}

}  // namespace

double cross_entropy_loss(const ClassifierModel& model,
                          const Eigen::MatrixXd& inputs,
                          const std::vector<int>& labels) {
  const Eigen::MatrixXd logits = model.logits_batch(inputs);
  return softmax_loss_and_delta(logits, labels, nullptr);
}

double cross_entropy_with_gradients(const ClassifierModel& model,
                                    const Eigen::MatrixXd& inputs,
                                    const std::vector<int>& labels,
                                    Gradients& grads) {
  if (grads.weights.empty()) grads = make_gradients(model);
  TrainWorkspace ws;
  ws.resize(model.layer_dims, static_cast<int>(inputs.cols()));
  ws.activations[0] = inputs;
  return forward_backward(model, ws, labels, grads);
}

ClassifierModel train(const std::vector<TrainingSample>& dataset, int node_count,
                      const TrainingConfig& config, TrainingReport* report) {
  if (dataset.empty()) throw std::invalid_argument("dataset is empty");
  if (config.batch_size < 1 || config.epochs < 1) {
    throw std::invalid_argument("batch size and epochs must be positive");
  }
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  }
  {
    std::vector<char> present(4, 0);
    for (const TrainingSample& s : dataset) {
      if (s.rounds < 1 || s.rounds > 3) {
        throw std::invalid_argument("sample label outside {1,2,3}");
      }
      present[s.rounds] = 1;
    }
    if (present[1] + present[2] + present[3] < 2) {
      throw std::invalid_argument("dataset must contain at least two classes");
    }
  }

  // Stratified split: each directed hop contributes the same train/val ratio.
  std::map<std::pair<NodeId, NodeId>, std::vector<std::size_t>> by_hop;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_hop[{dataset[i].src, dataset[i].dst}].push_back(i);
  }
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::uint64_t group = 0;
  for (auto& [hop, members] : by_hop) {
    RandomStream rng = substream(config.seed, stream_tag::split, group++);
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.next_below(i)]);
    }
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_val ? val_idx : train_idx).push_back(members[i]);
    }
  }
  if (train_idx.empty() || val_idx.empty()) {
    throw std::invalid_argument("split produced an empty train or validation set");
  }

  const int in_dim = 2 * node_count + 1;
  Eigen::MatrixXd x_train(in_dim, static_cast<Eigen::Index>(train_idx.size()));
  std::vector<int> y_train(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    fill_input_column(x_train, static_cast<Eigen::Index>(i), dataset[train_idx[i]],
                      node_count);
    y_train[i] = dataset[train_idx[i]].rounds;
  }
  Eigen::MatrixXd x_val(in_dim, static_cast<Eigen::Index>(val_idx.size()));
  std::vector<int> y_val(val_idx.size());
  for (std::size_t i = 0; i < val_idx.size(); ++i) {
    fill_input_column(x_val, static_cast<Eigen::Index>(i), dataset[val_idx[i]],
                      node_count);
    y_val[i] = dataset[val_idx[i]].rounds;
  }

  ClassifierModel model = make_classifier(node_count, config.hidden_dims, config.seed);
  Gradients grads = make_gradients(model);
  TrainWorkspace ws;
  ws.resize(model.layer_dims, config.batch_size);

  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;

  if (report) report->epochs.clear();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        cosine_annealed_lr(epoch, config.epochs, config.lr_initial, config.lr_final);
    RandomStream shuffle_rng = substream(config.seed, stream_tag::shuffle,
                                         static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const int batch = static_cast<int>(
          std::min<std::size_t>(config.batch_size, order.size() - start));
      if (static_cast<Eigen::Index>(batch) != ws.activations[0].cols()) {
        ws.resize(model.layer_dims, batch);
      }
      batch_labels.resize(batch);
      for (int c = 0; c < batch; ++c) {
        ws.activations[0].col(c) = x_train.col(static_cast<Eigen::Index>(order[start + c]));
        batch_labels[static_cast<std::size_t>(c)] = y_train[order[start + c]];
      }
      const double loss = forward_backward(model, ws, batch_labels, grads);
      loss_sum += loss * batch;
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        model.weights[l].noalias() -= lr * grads.weights[l];
        model.biases[l].noalias() -= lr * grads.biases[l];
      }
    }
    if (!model.all_finite()) {
      throw std::runtime_error("training diverged: non-finite parameters");
    }

    if (report) {
      EpochStats stats;
      stats.epoch = epoch + 1;
      stats.train_loss = loss_sum / static_cast<double>(order.size());
      stats.val_accuracy = batched_accuracy(model, x_val, y_val);
      report->epochs.push_back(stats);
    }
  }
  return model;
}

int predict_rounds(const ClassifierModel& model, NodeId src, NodeId dst,
                   Fidelity target_fidelity) {
  Eigen::VectorXd input(model.input_dim());
  input.setZero();
  const int n = model.node_count();
  if (src < 0 || dst < 0 || src >= n || dst >= n || src == dst) {
    throw std::invalid_argument("invalid hop for this model");
  }
  input(src) = 1.0;
  input(n + dst) = 1.0;
  input(2 * n) = target_fidelity.value();
  return argmax_lowest(model.logits(input)) + 1;
}

namespace {

constexpr char kModelMagic[8] = {'Q', 'P', 'S', 'M', 'D', 'L', '0', '1'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t size,
                    std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

template <typename T>
void write_raw(std::ostream& out, const T& value, std::uint64_t& hash) {
  hash = fnv1a(reinterpret_cast<const unsigned char*>(&value), sizeof(T), hash);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, std::uint64_t& hash) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated model file");
  hash = fnv1a(reinterpret_cast<const unsigned char*>(&value), sizeof(T), hash);
  return value;
}

}  // namespace

void save_model(const ClassifierModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  write_raw(out, static_cast<std::uint32_t>(model.layer_dims.size()), hash);
  for (int d : model.layer_dims) {
    write_raw(out, static_cast<std::int32_t>(d), hash);
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Eigen::MatrixXd& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        write_raw(out, w(r, c), hash);
      }
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
      write_raw(out, model.biases[l](r), hash);
    }
  }
  out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  char magic[sizeof(kModelMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a classifier model file: " + path);
  }
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto n_layers = read_raw<std::uint32_t>(in, hash);
  if (n_layers < 2 || n_layers > 64) {
    throw std::runtime_error("corrupt model file (layer count): " + path);
  }
  ClassifierModel model;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto d = read_raw<std::int32_t>(in, hash);
    if (d < 1) throw std::runtime_error("corrupt model file (layer dim): " + path);
    model.layer_dims.push_back(d);
  }
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    Eigen::MatrixXd w(model.layer_dims[l + 1], model.layer_dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = read_raw<double>(in, hash);
      }
    }
    Eigen::VectorXd b(model.layer_dims[l + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      b(r) = read_raw<double>(in, hash);
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  std::uint64_t stored = 0;
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (!in || stored != hash) {
    throw std::runtime_error("model file checksum mismatch: " + path);
  }
  return model;
}

void write_dataset_csv(const std::vector<TrainingSample>& samples,
                       std::ostream& out) {
  out << "src,dst,fidelity,rounds\n";
  for (const TrainingSample& s : samples) {
    out << s.src << ',' << s.dst << ',' << csv::format_double(s.fidelity) << ','
        << s.rounds << "\n";
  }
}

std::vector<TrainingSample> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "src,dst,fidelity,rounds") {
    throw std::runtime_error("unexpected dataset CSV header");
  }
  std::vector<TrainingSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 4) throw std::runtime_error("malformed dataset row");
    TrainingSample s;
    s.src = static_cast<NodeId>(csv::parse_int(fields[0]));
    s.dst = static_cast<NodeId>(csv::parse_int(fields[1]));
    s.fidelity = csv::parse_double(fields[2]);
    s.rounds = static_cast<int>(csv::parse_int(fields[3]));
    samples.push_back(s);
  }
  return samples;
}

void write_training_report_csv(const TrainingReport& report, std::ostream& out) {
  out << "epoch,train_loss,val_accuracy\n";
  for (const EpochStats& e : report.epochs) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ','
        << csv::format_double(e.val_accuracy) << "\n";
  }
}

}  // namespace qpsim
