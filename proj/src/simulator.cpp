#include "qpsim/simulator.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "qpsim/csv.hpp"

namespace qpsim {

std::string to_string(RequestOutcome outcome) {
  switch (outcome) {
    case RequestOutcome::Pending: return "pending";
    case RequestOutcome::Success: return "success";
    case RequestOutcome::BelowThreshold: return "below_threshold";
    case RequestOutcome::CascadeDepleted: return "cascade_depleted";
  }
  throw std::logic_error("unknown outcome");
}

double compute_latency(const EntanglementRequest& request) {
  if (request.outcome != RequestOutcome::Success || !request.fulfilled_at_us) {
    throw std::logic_error("latency is defined only for successful requests");
  }
  return *request.fulfilled_at_us - request.generated_at_us;
}

void SimConfig::validate() const {
  if (n_timeslots < 1) throw std::invalid_argument("need at least one time slot");
  if (!(slot_interval_us > 0.0)) throw std::invalid_argument("slot interval must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(purification_time_us > 0.0)) throw std::invalid_argument("purification time must be positive");
  if (!(entanglement_time_per_km_us > 0.0)) throw std::invalid_argument("entanglement time must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  if (candidate_paths < 1) throw std::invalid_argument("need at least one candidate path");
  for (int pairs : bell_pairs_per_rounds) {
    if (pairs < 2) throw std::invalid_argument("each round budget needs at least two pairs");
  }
  gate.validate();
}

SchedulingParams SimConfig::scheduling_params() const {
  SchedulingParams params;
  params.fidelity_threshold = fidelity_threshold;
  params.gamma = gamma;
  params.target_margin = target_margin;
  params.candidate_paths = candidate_paths;
  params.gate = gate;
  return params;
}

double mean_latency_us(const RunMetrics& metrics) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const SlotMetrics& slot : metrics.per_slot) {
    for (double l : slot.latencies_us) sum += l;
    count += slot.latencies_us.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double mean_fidelity(const RunMetrics& metrics) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const SlotMetrics& slot : metrics.per_slot) {
    for (double f : slot.fidelities) sum += f;
    count += slot.fidelities.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double mean_throughput(const RunMetrics& metrics) {
  if (metrics.per_slot.empty()) return 0.0;
  double sum = 0.0;
  for (const SlotMetrics& slot : metrics.per_slot) sum += slot.throughput;
  return sum / static_cast<double>(metrics.per_slot.size());
}

CascadeOutcome run_purification_cascade(const HopProfile& hop, int rounds,
                                        int pairs_prepared,
                                        RandomStream& fidelity_rng,
                                        RandomStream& coin_rng) {
  if (rounds < 1 || rounds > 3) {
    throw std::invalid_argument("cascade rounds must be in {1, 2, 3}");
  }
  if (pairs_prepared < 2) {
    throw std::invalid_argument("cascade needs at least two prepared pairs");
  }
  CascadeOutcome outcome;
  outcome.pairs_consumed = pairs_prepared;
  outcome.initial_fidelity = sample_initial_fidelity(hop, fidelity_rng);

  Fidelity f = outcome.initial_fidelity;
  int alive = pairs_prepared;
  for (int round = 0; round < rounds; ++round) {
    const double p = purify_success_probability(f);
    const int attempts = alive / 2;  // odd leftover pair is discarded
    int survivors = 0;
    for (int a = 0; a < attempts; ++a) {
      if (coin_rng.next_double() < p) ++survivors;
    }
    alive = survivors;
    f = purify_once(f);
  }
  if (alive >= 1) outcome.surviving_fidelity = f;
  return outcome;
}

double service_time_us(const SimConfig& config, const PurificationPlan& plan) {
  int max_rounds = 0;
  for (int r : plan.rounds_per_hop) max_rounds = std::max(max_rounds, r);
  // Hops purify simultaneously, so purification costs only the deepest hop.
  const double purification = config.purification_time_us * max_rounds;
  // (node count - 1) * mean hop distance reduces to the total path distance.
  const double entanglement =
      plan.path.total_distance_km * config.entanglement_time_per_km_us;
  return purification + entanglement;
}

namespace {

struct FixedPlanner {
  const Topology& topo;
  int rounds;
  std::map<std::pair<NodeId, NodeId>, PurificationPlan> cache;

  const PurificationPlan& plan(NodeId src, NodeId dst) {
    const auto key = std::make_pair(src, dst);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, plan_fixed(topo, src, dst, rounds)).first;
    }
    return it->second;
  }
};

void serve(EntanglementRequest& req, const SimConfig& config, const Topology& topo,
           double fulfil_time_us) {
  const PurificationPlan& plan = *req.plan;
  std::vector<Fidelity> hop_fidelities;
  hop_fidelities.reserve(plan.rounds_per_hop.size());
  bool depleted = false;
  for (std::size_t i = 0; i < plan.rounds_per_hop.size(); ++i) {
    const int hop_idx = plan.path.hop_indices[i];
    const int rounds = plan.rounds_per_hop[i];
    const int pairs = config.bell_pairs_per_rounds[static_cast<std::size_t>(rounds - 1)];
    RandomStream f_rng =
        substream(config.seed, stream_tag::initial_fidelity,
                  static_cast<std::uint64_t>(req.id), static_cast<std::uint64_t>(hop_idx));
    RandomStream coin_rng =
        substream(config.seed, stream_tag::cascade,
                  static_cast<std::uint64_t>(req.id), static_cast<std::uint64_t>(hop_idx));
    const CascadeOutcome cascade =
        run_purification_cascade(topo.hop(hop_idx), rounds, pairs, f_rng, coin_rng);
    req.pairs_consumed += cascade.pairs_consumed;
    if (cascade.surviving_fidelity) {
      hop_fidelities.push_back(*cascade.surviving_fidelity);
    } else {
      depleted = true;
    }
  }
  req.fulfilled_at_us = fulfil_time_us;
  if (depleted) {
    req.outcome = RequestOutcome::CascadeDepleted;
    return;
  }
  const Fidelity fidelity =
      chain_fidelity(ChainSpec{std::move(hop_fidelities), config.gate});
  req.final_fidelity = fidelity;
  req.outcome = fidelity >= config.fidelity_threshold
                    ? RequestOutcome::Success
                    : RequestOutcome::BelowThreshold;
}

}  // namespace

RunOutput run_simulation(const SimConfig& config, const Topology& topo,
                         PolicyKind policy, const ClassifierModel* model) {
  config.validate();
  if (policy_needs_model(policy)) {
    if (model == nullptr) {
      throw std::invalid_argument("semi-supervised policies require a trained model");
    }
    if (model->node_count() != topo.node_count()) {
      throw std::invalid_argument("model was trained for a different node count");
    }
  }

  std::optional<AdaptivePlanner> adaptive;
  std::optional<FixedPlanner> fixed;
  switch (policy) {
    case PolicyKind::SemiSupervisedMedium:
      adaptive.emplace(topo, *model, TargetRule::MinimumRequired,
                       config.scheduling_params());
      break;
    case PolicyKind::SemiSupervisedHigh:
      adaptive.emplace(topo, *model, TargetRule::UniformConservative,
                       config.scheduling_params());
      break;
    case PolicyKind::ShortestPathFixedOne:
    case PolicyKind::Fifo:
      fixed.emplace(FixedPlanner{topo, 1, {}});
      break;
    case PolicyKind::ShortestPathFixedTwo:
      fixed.emplace(FixedPlanner{topo, 2, {}});
      break;
  }

  RunOutput out;
  out.metrics.per_slot.reserve(static_cast<std::size_t>(config.n_timeslots));
  std::vector<std::size_t> queue;  // request indices, arrival order with carry-over first

  const auto n = static_cast<std::uint64_t>(topo.node_count());
  for (int slot = 0; slot < config.n_timeslots; ++slot) {
    const double slot_start = static_cast<double>(slot) * config.slot_interval_us;

    RandomStream arrivals_rng =
        substream(config.seed, stream_tag::arrivals, static_cast<std::uint64_t>(slot));
    const int arrivals = arrivals_rng.next_poisson(config.lambda);
    for (int i = 0; i < arrivals; ++i) {
      RandomStream pair_rng =
          substream(config.seed, stream_tag::endpoints,
                    static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(i));
      const auto src = static_cast<NodeId>(pair_rng.next_below(n));
      auto dst = static_cast<NodeId>(pair_rng.next_below(n - 1));
      if (dst >= src) ++dst;

      EntanglementRequest req;
      req.id = static_cast<std::int64_t>(out.requests.size());
      req.src = src;
      req.dst = dst;
      req.generated_at_us = slot_start;
      req.plan = adaptive ? adaptive->plan(src, dst) : fixed->plan(src, dst);
      queue.push_back(static_cast<std::size_t>(req.id));
      out.requests.push_back(std::move(req));
    }

    std::vector<PurificationPlan> plans;
    std::vector<double> generation_times;
    plans.reserve(queue.size());
    generation_times.reserve(queue.size());
    for (std::size_t idx : queue) {
      plans.push_back(*out.requests[idx].plan);
      generation_times.push_back(out.requests[idx].generated_at_us);
    }
    const std::vector<std::size_t> order =
        order_queue(policy, plans, generation_times, config.gamma);

    SlotMetrics slot_metrics;
    slot_metrics.slot_index = slot;
    double clock_us = 0.0;
    std::size_t served_here = 0;
    for (; served_here < order.size(); ++served_here) {
      EntanglementRequest& req = out.requests[queue[order[served_here]]];
      const double elapsed = service_time_us(config, *req.plan);
      // A request that cannot even fit an empty slot is served anyway rather
      // than carried forever (impossible under the default timing).
      if (clock_us + elapsed > config.slot_interval_us && clock_us > 0.0) break;
      serve(req, config, topo, slot_start + clock_us + elapsed);
      clock_us += elapsed;

      out.metrics.total_bell_pairs += req.pairs_consumed;
      ++out.metrics.total_served;
      if (req.final_fidelity) {
        slot_metrics.fidelities.push_back(req.final_fidelity->value());
      }
      if (req.outcome == RequestOutcome::Success) {
        ++slot_metrics.n_success;
        slot_metrics.latencies_us.push_back(compute_latency(req));
      }
    }

    std::vector<std::size_t> carried;
    carried.reserve(order.size() - served_here);
    for (std::size_t i = served_here; i < order.size(); ++i) {
      carried.push_back(queue[order[i]]);
    }
    queue = std::move(carried);

    slot_metrics.throughput =
        static_cast<double>(slot_metrics.n_success) / config.slot_interval_us;
    out.metrics.total_success += slot_metrics.n_success;
    out.metrics.per_slot.push_back(std::move(slot_metrics));
  }

  out.metrics.total_generated = static_cast<std::int64_t>(out.requests.size());
  out.metrics.total_unserved = static_cast<std::int64_t>(queue.size());
  out.metrics.utilization =
      out.metrics.total_success > 0
          ? static_cast<double>(out.metrics.total_bell_pairs) /
                static_cast<double>(out.metrics.total_success)
          : 0.0;
  return out;
}

namespace {

std::string join_dashed(const std::vector<NodeId>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) s += '-';
    s += std::to_string(values[i]);
  }
  return s;
}

std::string join_dashed_int(const std::vector<int>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) s += '-';
    s += std::to_string(values[i]);
  }
  return s;
}

}  // namespace

void write_trace_csv(const std::vector<EntanglementRequest>& requests,
                     std::ostream& out) {
  out << "id,src,dst,t_g,t_f,outcome,final_fidelity,latency,path,rounds,pairs_consumed\n";
  for (const EntanglementRequest& req : requests) {
    out << req.id << ',' << req.src << ',' << req.dst << ','
        << csv::format_double(req.generated_at_us) << ',';
    if (req.fulfilled_at_us) out << csv::format_double(*req.fulfilled_at_us);
    out << ',' << to_string(req.outcome) << ',';
    if (req.final_fidelity) out << csv::format_double(req.final_fidelity->value());
    out << ',';
    if (req.outcome == RequestOutcome::Success) {
      out << csv::format_double(compute_latency(req));
    }
    out << ',';
    if (req.plan) {
      out << join_dashed(req.plan->path.nodes) << ','
          << join_dashed_int(req.plan->rounds_per_hop);
    } else {
      out << ',';
    }
    out << ',' << req.pairs_consumed << "\n";
  }
}

void write_slot_csv(const RunMetrics& metrics, std::ostream& out) {
  out << "slot,n_success,throughput,mean_latency,mean_fidelity\n";
  for (const SlotMetrics& slot : metrics.per_slot) {
    out << slot.slot_index << ',' << slot.n_success << ','
        << csv::format_double(slot.throughput) << ',';
    if (!slot.latencies_us.empty()) {
      const double mean =
          std::accumulate(slot.latencies_us.begin(), slot.latencies_us.end(), 0.0) /
          static_cast<double>(slot.latencies_us.size());
      out << csv::format_double(mean);
    }
    out << ',';
    if (!slot.fidelities.empty()) {
      const double mean =
          std::accumulate(slot.fidelities.begin(), slot.fidelities.end(), 0.0) /
          static_cast<double>(slot.fidelities.size());
      out << csv::format_double(mean);
    }
    out << "\n";
  }
}

}  // namespace qpsim
