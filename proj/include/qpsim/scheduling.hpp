#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qpsim/classifier.hpp"
#include "qpsim/topology.hpp"

namespace qpsim {

/// The five evaluated schemes.
enum class PolicyKind {
  SemiSupervisedMedium,
  SemiSupervisedHigh,
  ShortestPathFixedOne,
  ShortestPathFixedTwo,
  Fifo,
};

std::string to_string(PolicyKind policy);
PolicyKind policy_from_string(const std::string& name);
bool policy_needs_model(PolicyKind policy);

/// Per-hop purification rounds for a chosen path.
struct PurificationPlan {
  Path path;
  std::vector<int> rounds_per_hop;  // aligned with path.hop_indices, in {1,2,3}
  bool max_effort_fallback = false;  // target was infeasible on every candidate

  int total_rounds() const {
    int sum = 0;
    for (int r : rounds_per_hop) sum += r;
    return sum;
  }
};

struct SchedulingParams {
  Fidelity fidelity_threshold{0.83};
  double gamma = 0.3;         // distance weight in the cost blend
  double target_margin = 0.01;  // added above the solved hop target
  int candidate_paths = 3;
  GateParameters gate;
};

/// Blended cost gamma*D' + (1-gamma)*R' with D (total distance) and R (total
/// rounds) min-max normalized over the supplied set. A degenerate axis
/// (max == min) contributes 0 for every plan.
std::vector<double> compute_costs(std::span<const PurificationPlan> plans,
                                  double gamma);

/// Shortest path with the same fixed round count on every hop.
PurificationPlan plan_fixed(const Topology& topo, NodeId src, NodeId dst,
                            int rounds);

struct AdaptivePlanResult {
  PurificationPlan plan;
  double cost = 0.0;  // normalized over this request's own candidate set
};

/// How the per-hop target fidelity is derived from the end-to-end threshold.
enum class TargetRule {
  // Per path: the other hops are assumed to sit at the path's highest
  // single-round hop fidelity, and the solver returns the minimum the
  // remaining hop must reach.
  MinimumRequired,
  // Worst case: one uniform target that would carry the threshold across the
  // network's longest shortest-path route, applied to every hop.
  UniformConservative,
};

/// Longest shortest-path hop count over all node pairs.
int routing_diameter_hops(const Topology& topo);

/// Candidate paths are the (up to) k shortest; each gets a target hop fidelity
/// from the rule plus the margin, per-hop rounds from the classifier, and a
/// joint normalized cost. Returns the cheapest plan (ties: shorter distance,
/// then lexicographic node sequence). When no candidate has a reachable
/// target, falls back to three rounds on every hop of the shortest candidate.
AdaptivePlanResult plan_adaptive(const Topology& topo, const ClassifierModel& model,
                                 NodeId src, NodeId dst, TargetRule rule,
                                 const SchedulingParams& params);

/// Caches plans per (src, dst); topology and model are fixed for a run.
class AdaptivePlanner {
 public:
  AdaptivePlanner(const Topology& topo, const ClassifierModel& model,
                  TargetRule rule, SchedulingParams params)
      : topo_(topo), model_(model), rule_(rule), params_(params) {}

  const PurificationPlan& plan(NodeId src, NodeId dst);

 private:
  const Topology& topo_;
  const ClassifierModel& model_;
  TargetRule rule_;
  SchedulingParams params_;
  std::map<std::pair<NodeId, NodeId>, PurificationPlan> cache_;
};

/// Stable ascending orderings; each returns a permutation of [0, n).
std::vector<std::size_t> order_by_cost(std::span<const PurificationPlan> plans,
                                       double gamma);
std::vector<std::size_t> order_by_distance(std::span<const PurificationPlan> plans);
std::vector<std::size_t> order_by_generation_time(std::span<const double> t_g);

/// Policy-dispatched queue ordering over the current snapshot. Plans and
/// generation times are aligned with queue positions (arrival order).
std::vector<std::size_t> order_queue(PolicyKind policy,
                                     std::span<const PurificationPlan> plans,
                                     std::span<const double> generation_times,
                                     double gamma);

}  // namespace qpsim
