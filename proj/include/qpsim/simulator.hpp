#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qpsim/scheduling.hpp"
#include "qpsim/topology.hpp"

namespace qpsim {

enum class RequestOutcome { Pending, Success, BelowThreshold, CascadeDepleted };

std::string to_string(RequestOutcome outcome);

struct EntanglementRequest {
  std::int64_t id = 0;  // also the arrival sequence number
  NodeId src = 0;
  NodeId dst = 0;
  double generated_at_us = 0.0;
  std::optional<double> fulfilled_at_us;
  std::optional<PurificationPlan> plan;
  std::optional<Fidelity> final_fidelity;
  RequestOutcome outcome = RequestOutcome::Pending;
  std::int64_t pairs_consumed = 0;
};

/// Latency of a successful request; anything else has no defined latency.
double compute_latency(const EntanglementRequest& request);

struct SimConfig {
  int n_timeslots = 1000;
  double slot_interval_us = 500.0;
  double lambda = 2.0;  // mean new requests per slot
  Fidelity fidelity_threshold{0.83};
  double purification_time_us = 10.0;          // per round
  double entanglement_time_per_km_us = 10.0;
  double gamma = 0.3;
  double target_margin = 0.01;
  int candidate_paths = 3;
  std::array<int, 3> bell_pairs_per_rounds = {10, 30, 60};  // for 1/2/3 rounds
  GateParameters gate;
  std::uint64_t seed = 1;

  void validate() const;
  SchedulingParams scheduling_params() const;
};

struct SlotMetrics {
  int slot_index = 0;
  int n_success = 0;
  double throughput = 0.0;           // n_success / slot_interval
  std::vector<double> latencies_us;  // successful requests only
  std::vector<double> fidelities;    // every completed request
};

struct RunMetrics {
  std::vector<SlotMetrics> per_slot;
  std::int64_t total_generated = 0;
  std::int64_t total_served = 0;
  std::int64_t total_unserved = 0;
  std::int64_t total_success = 0;
  std::int64_t total_bell_pairs = 0;
  double utilization = 0.0;  // pairs per success; 0 when nothing succeeded
};

double mean_latency_us(const RunMetrics& metrics);
double mean_fidelity(const RunMetrics& metrics);
double mean_throughput(const RunMetrics& metrics);

struct CascadeOutcome {
  std::optional<Fidelity> surviving_fidelity;  // absent when depleted
  int pairs_consumed = 0;
  Fidelity initial_fidelity{};
};

/// Stochastic pairwise purification cascade over a batch of raw pairs that
/// share one initial-fidelity draw. Each round pairs up the survivors; every
/// attempt succeeds independently with the round's success probability,
/// failures discard both pairs, an odd leftover is discarded. The fidelity of
/// whatever survives is deterministic; only survival is random.
CascadeOutcome run_purification_cascade(const HopProfile& hop, int rounds,
                                        int pairs_prepared,
                                        RandomStream& fidelity_rng,
                                        RandomStream& coin_rng);

/// Wall time to serve a plan: purification runs in parallel across hops, then
/// swapping along the chain.
double service_time_us(const SimConfig& config, const PurificationPlan& plan);

struct RunOutput {
  RunMetrics metrics;
  std::vector<EntanglementRequest> requests;  // indexed by id
};

/// Time-slotted run: Poisson arrivals, carry-over ahead of new arrivals,
/// policy ordering once per slot, sequential service within the slot budget.
/// Deterministic under (config, topology, policy, model).
RunOutput run_simulation(const SimConfig& config, const Topology& topo,
                         PolicyKind policy,
                         const ClassifierModel* model = nullptr);

void write_trace_csv(const std::vector<EntanglementRequest>& requests,
                     std::ostream& out);
void write_slot_csv(const RunMetrics& metrics, std::ostream& out);

}  // namespace qpsim
