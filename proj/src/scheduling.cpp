#include "qpsim/scheduling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace qpsim {

std::string to_string(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::SemiSupervisedMedium: return "semi_medium";
    case PolicyKind::SemiSupervisedHigh: return "semi_high";
    case PolicyKind::ShortestPathFixedOne: return "fixed1";
    case PolicyKind::ShortestPathFixedTwo: return "fixed2";
    case PolicyKind::Fifo: return "fifo";
  }
  throw std::logic_error("unknown policy");
}

PolicyKind policy_from_string(const std::string& name) {
  if (name == "semi_medium") return PolicyKind::SemiSupervisedMedium;
  if (name == "semi_high") return PolicyKind::SemiSupervisedHigh;
  if (name == "fixed1") return PolicyKind::ShortestPathFixedOne;
  if (name == "fixed2") return PolicyKind::ShortestPathFixedTwo;
  if (name == "fifo") return PolicyKind::Fifo;
  throw std::invalid_argument("unknown policy name: " + name);
}

bool policy_needs_model(PolicyKind policy) {
  return policy == PolicyKind::SemiSupervisedMedium ||
         policy == PolicyKind::SemiSupervisedHigh;
}

std::vector<double> compute_costs(std::span<const PurificationPlan> plans,
                                  double gamma) {
  std::vector<double> costs(plans.size(), 0.0);
  if (plans.empty()) return costs;
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  int r_min = std::numeric_limits<int>::max();
  int r_max = std::numeric_limits<int>::min();
  for (const PurificationPlan& p : plans) {
    d_min = std::min(d_min, p.path.total_distance_km);
    d_max = std::max(d_max, p.path.total_distance_km);
    r_min = std::min(r_min, p.total_rounds());
    r_max = std::max(r_max, p.total_rounds());
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const double d_norm =
        d_max > d_min
            ? (plans[i].path.total_distance_km - d_min) / (d_max - d_min)
            : 0.0;
    const double r_norm =
        r_max > r_min
            ? static_cast<double>(plans[i].total_rounds() - r_min) / (r_max - r_min)
            : 0.0;
    costs[i] = gamma * d_norm + (1.0 - gamma) * r_norm;
  }
  return costs;
}

PurificationPlan plan_fixed(const Topology& topo, NodeId src, NodeId dst,
                            int rounds) {
  if (rounds < 1 || rounds > 3) {
    throw std::invalid_argument("fixed rounds must be in {1, 2, 3}");
  }
  PurificationPlan plan;
  plan.path = k_shortest_paths(topo, src, dst, 1).front();
  plan.rounds_per_hop.assign(plan.path.hop_indices.size(), rounds);
  return plan;
}

namespace {

// Fidelity of the path's best hop after a single purification round from its
// mean initial fidelity: the "highest hop fidelity" the surrounding hops are
// assumed to hold when solving for the minimum target.
Fidelity best_reachable_hop_fidelity(const Topology& topo, const Path& path) {
  double best = 0.0;
  for (int hop_idx : path.hop_indices) {
    const double reachable =
        purify_once(Fidelity(topo.hop(hop_idx).mean_initial_fidelity())).value();
    best = std::max(best, reachable);
  }
  return Fidelity(best);
}

}  // namespace

int routing_diameter_hops(const Topology& topo) {
  int diameter = 0;
  for (NodeId src = 0; src < topo.node_count(); ++src) {
    for (NodeId dst = src + 1; dst < topo.node_count(); ++dst) {
      diameter = std::max(
          diameter, k_shortest_paths(topo, src, dst, 1).front().hop_count());
    }
  }
  return diameter;
}

AdaptivePlanResult plan_adaptive(const Topology& topo, const ClassifierModel& model,
                                 NodeId src, NodeId dst, TargetRule rule,
                                 const SchedulingParams& params) {
  const std::vector<Path> candidates =
      k_shortest_paths(topo, src, dst, params.candidate_paths);
  const int conservative_hops = rule == TargetRule::UniformConservative
                                    ? routing_diameter_hops(topo)
                                    : 0;

  std::vector<PurificationPlan> plans;
  plans.reserve(candidates.size());
  for (const Path& path : candidates) {
    Fidelity solved{};
    try {
      if (rule == TargetRule::MinimumRequired) {
        solved = solve_target_hop_fidelity_min(
            params.fidelity_threshold, path.hop_count(),
            best_reachable_hop_fidelity(topo, path), params.gate);
      } else {
        solved = solve_target_hop_fidelity_uniform(params.fidelity_threshold,
                                                   conservative_hops, params.gate);
      }
    } catch (const InfeasibleTargetError&) {
      continue;  // this candidate cannot meet the threshold
    }
    const Fidelity target(std::min(solved.value() + params.target_margin, 1.0));

    PurificationPlan plan;
    plan.path = path;
    plan.rounds_per_hop.reserve(path.hop_indices.size());
    for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
      plan.rounds_per_hop.push_back(
          predict_rounds(model, path.nodes[i], path.nodes[i + 1], target));
    }
    plans.push_back(std::move(plan));
  }

  if (plans.empty()) {
    // Maximum effort: no reachable target on any candidate.
    AdaptivePlanResult result;
    result.plan.path = candidates.front();
    result.plan.rounds_per_hop.assign(result.plan.path.hop_indices.size(), 3);
    result.plan.max_effort_fallback = true;
    result.cost = 0.0;
    return result;
  }

  const std::vector<double> costs = compute_costs(plans, params.gamma);
  std::size_t best = 0;
  for (std::size_t i = 1; i < plans.size(); ++i) {
    if (costs[i] != costs[best]) {
      if (costs[i] < costs[best]) best = i;
      continue;
    }
    if (plans[i].path.total_distance_km != plans[best].path.total_distance_km) {
      if (plans[i].path.total_distance_km < plans[best].path.total_distance_km) best = i;
      continue;
    }
    if (plans[i].path.nodes < plans[best].path.nodes) best = i;
  }
  return {plans[best], costs[best]};
}

const PurificationPlan& AdaptivePlanner::plan(NodeId src, NodeId dst) {
  const auto key = std::make_pair(src, dst);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, plan_adaptive(topo_, model_, src, dst, rule_, params_).plan)
             .first;
  }
  return it->second;
}

std::vector<std::size_t> order_by_cost(std::span<const PurificationPlan> plans,
                                       double gamma) {
  const std::vector<double> costs = compute_costs(plans, gamma);
  std::vector<std::size_t> order(plans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
  return order;
}

std::vector<std::size_t> order_by_distance(std::span<const PurificationPlan> plans) {
  std::vector<std::size_t> order(plans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return plans[a].path.total_distance_km < plans[b].path.total_distance_km;
  });
  return order;
}

std::vector<std::size_t> order_by_generation_time(std::span<const double> t_g) {
  std::vector<std::size_t> order(t_g.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t_g[a] < t_g[b]; });
  return order;
}

std::vector<std::size_t> order_queue(PolicyKind policy,
                                     std::span<const PurificationPlan> plans,
                                     std::span<const double> generation_times,
                                     double gamma) {
  switch (policy) {
    case PolicyKind::SemiSupervisedMedium:
    case PolicyKind::SemiSupervisedHigh:
      return order_by_cost(plans, gamma);
    case PolicyKind::ShortestPathFixedOne:
    case PolicyKind::ShortestPathFixedTwo:
      return order_by_distance(plans);
    case PolicyKind::Fifo:
      return order_by_generation_time(generation_times);
  }
  throw std::logic_error("unknown policy");
}

}  // namespace qpsim
