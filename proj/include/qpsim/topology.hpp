#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qpsim/purification.hpp"
#include "qpsim/rng.hpp"

namespace qpsim {

using NodeId = int;

/// An undirected link between neighbouring nodes. The hop weight determines
/// the mean fidelity of the raw Bell pairs the hop generates (mean = 1 - w).
struct HopProfile {
  NodeId a = 0;  // endpoints stored with a < b
  NodeId b = 0;
  double weight = 0.0;
  double distance_km = 1.0;
  double fidelity_stddev = 0.01;

  double mean_initial_fidelity() const { return 1.0 - weight; }
};

struct WattsStrogatzParams {
  int nodes = 10;
  int degree = 4;  // ring-lattice degree, must be even and < nodes
  double rewire_prob = 0.3;
  std::vector<double> weight_choices = {0.05, 0.1, 0.15, 0.2, 0.25};
  double hop_distance_km = 1.0;
  double fidelity_stddev = 0.01;
};

/// Immutable connected graph over which requests are routed. At most one hop
/// per node pair, no self-loops.
class Topology {
 public:
  Topology(int node_count, std::vector<HopProfile> hops);

  int node_count() const { return node_count_; }
  const std::vector<HopProfile>& hops() const { return hops_; }
  const std::vector<NodeId>& neighbors(NodeId node) const;

  /// Index into hops() for the pair, or -1 when not adjacent.
  int hop_index(NodeId u, NodeId v) const;
  const HopProfile& hop(int index) const { return hops_.at(index); }

 private:
  int node_count_ = 0;
  std::vector<HopProfile> hops_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<int> hop_lookup_;  // node_count^2 entries, -1 when absent
};

/// A simple path through the topology.
struct Path {
  std::vector<NodeId> nodes;     // length >= 2
  std::vector<int> hop_indices;  // aligned with consecutive node pairs
  double total_distance_km = 0.0;

  int hop_count() const { return static_cast<int>(hop_indices.size()); }
};

/// Builds a Path from a node sequence, validating adjacency.
Path make_path(const Topology& topo, const std::vector<NodeId>& nodes);

/// Watts-Strogatz small-world construction: ring lattice of the given degree,
/// each edge rewired with probability rewire_prob (no self-loops, no duplicate
/// edges, edge count preserved). Regenerates with a salted seed until the
/// graph is connected. Hop weights are drawn uniformly from weight_choices.
Topology generate_watts_strogatz(const WattsStrogatzParams& params,
                                 std::uint64_t seed);

/// Gaussian initial-fidelity draw for a batch of raw pairs on a hop,
/// clamped into [0, 1].
Fidelity sample_initial_fidelity(const HopProfile& hop, RandomStream& rng);

/// Up to k loopless shortest paths by total distance (Yen-style enumeration),
/// ties broken by lexicographic node sequence. Throws NoPathError when src and
/// dst are disconnected.
std::vector<Path> k_shortest_paths(const Topology& topo, NodeId src, NodeId dst,
                                   int k);

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain-text edge list: header "nodes <n>", then one "a b weight distance"
/// line per hop.
void write_edge_list(const Topology& topo, std::ostream& out);
Topology read_edge_list(std::istream& in);

}  // namespace qpsim
