#include "qpsim/topology.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "qpsim/csv.hpp"

namespace qpsim {

Topology::Topology(int node_count, std::vector<HopProfile> hops)
    : node_count_(node_count), hops_(std::move(hops)) {
  if (node_count_ < 2) {
    throw std::invalid_argument("topology needs at least two nodes");
  }
  adjacency_.assign(node_count_, {});
  hop_lookup_.assign(static_cast<std::size_t>(node_count_) * node_count_, -1);
  for (std::size_t i = 0; i < hops_.size(); ++i) {
    HopProfile& h = hops_[i];
    if (h.a > h.b) std::swap(h.a, h.b);
    if (h.a < 0 || h.b >= node_count_ || h.a == h.b) {
      throw std::invalid_argument("hop endpoints out of range or self-loop");
    }
    const std::size_t fwd = static_cast<std::size_t>(h.a) * node_count_ + h.b;
    const std::size_t rev = static_cast<std::size_t>(h.b) * node_count_ + h.a;
    if (hop_lookup_[fwd] != -1) {
      throw std::invalid_argument("duplicate hop between a node pair");
    }
    hop_lookup_[fwd] = hop_lookup_[rev] = static_cast<int>(i);
    adjacency_[h.a].push_back(h.b);
    adjacency_[h.b].push_back(h.a);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());

  // Every routable pair must exist: reject disconnected graphs outright.
  std::vector<char> seen(node_count_, 0);
  std::queue<NodeId> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  if (reached != node_count_) {
    throw std::invalid_argument("topology is not connected");
  }
}

const std::vector<NodeId>& Topology::neighbors(NodeId node) const {
  return adjacency_.at(node);
}

int Topology::hop_index(NodeId u, NodeId v) const {
  if (u < 0 || v < 0 || u >= node_count_ || v >= node_count_) return -1;
  return hop_lookup_[static_cast<std::size_t>(u) * node_count_ + v];
}

Path make_path(const Topology& topo, const std::vector<NodeId>& nodes) {
  if (nodes.size() < 2) {
    throw std::invalid_argument("a path needs at least two nodes");
  }
  Path path;
  path.nodes = nodes;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const int hop = topo.hop_index(nodes[i], nodes[i + 1]);
    if (hop < 0) {
      throw std::invalid_argument("consecutive path nodes are not adjacent");
    }
    path.hop_indices.push_back(hop);
    path.total_distance_km += topo.hop(hop).distance_km;
  }
  return path;
}

namespace {

struct EdgeList {
  int nodes = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;

  bool has_edge(NodeId u, NodeId v) const {
    for (const auto& [a, b] : edges) {
      if ((a == u && b == v) || (a == v && b == u)) return true;
    }
    return false;
  }

  int degree(NodeId u) const {
    int d = 0;
    for (const auto& [a, b] : edges) {
      if (a == u || b == u) ++d;
    }
    return d;
  }
};

bool edge_list_connected(const EdgeList& g) {
  std::vector<std::vector<NodeId>> adj(g.nodes);
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(g.nodes, 0);
  std::queue<NodeId> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == g.nodes;
}

EdgeList small_world_edges(int n, int k, double beta, RandomStream& rng) {
  EdgeList g;
  g.nodes = n;
  // Ring lattice: node i linked to its k/2 clockwise neighbours.
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= k / 2; ++j) {
      g.edges.emplace_back(i, (i + j) % n);
    }
  }
  // Rewire the far endpoint of each lattice edge with probability beta,
  // keeping the near endpoint; skip when the node is already fully connected.
  for (auto& [u, v] : g.edges) {
    if (rng.next_double() >= beta) continue;
    if (g.degree(u) >= n - 1) continue;
    NodeId w;
    do {
      w = static_cast<NodeId>(rng.next_below(static_cast<std::uint64_t>(n)));
    } while (w == u || g.has_edge(u, w));
    v = w;
  }
  return g;
}

}  // namespace

Topology generate_watts_strogatz(const WattsStrogatzParams& params,
                                 std::uint64_t seed) {
  const int n = params.nodes;
  const int k = params.degree;
  if (n < 3) throw std::invalid_argument("Watts-Strogatz needs at least 3 nodes");
  if (k < 2 || k % 2 != 0 || k >= n) {
    throw std::invalid_argument("Watts-Strogatz degree must be even, >= 2 and < nodes");
  }
  if (!(params.rewire_prob >= 0.0 && params.rewire_prob <= 1.0)) {
    throw std::invalid_argument("rewiring probability must be in [0, 1]");
  }
  if (params.weight_choices.empty()) {
    throw std::invalid_argument("hop weight selection list must be non-empty");
  }

  constexpr int max_attempts = 1000;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    RandomStream rng = substream(seed, stream_tag::topology,
                                 static_cast<std::uint64_t>(attempt));
    EdgeList g = small_world_edges(n, k, params.rewire_prob, rng);
    if (!edge_list_connected(g)) continue;

    std::vector<HopProfile> hops;
    hops.reserve(g.edges.size());
    for (const auto& [a, b] : g.edges) {
      HopProfile hop;
      hop.a = std::min(a, b);
      hop.b = std::max(a, b);
      hop.weight = params.weight_choices[rng.next_below(params.weight_choices.size())];
      hop.distance_km = params.hop_distance_km;
      hop.fidelity_stddev = params.fidelity_stddev;
      hops.push_back(hop);
    }
    return Topology(n, std::move(hops));
  }
  throw std::runtime_error("failed to generate a connected topology");
}

Fidelity sample_initial_fidelity(const HopProfile& hop, RandomStream& rng) {
  const double draw =
      rng.next_normal(hop.mean_initial_fidelity(), hop.fidelity_stddev);
  return Fidelity(std::clamp(draw, 0.0, 1.0));
}

namespace {

// Shortest path from src to dst over the given usable hops/nodes; among
// equal-distance paths returns the lexicographically smallest node sequence.
// Walks greedily over distances-to-destination computed by Dijkstra.
bool lex_shortest_path(const Topology& topo, NodeId src, NodeId dst,
                       const std::vector<char>& node_blocked,
                       const std::vector<char>& hop_blocked,
                       std::vector<NodeId>& out_nodes, double& out_dist) {
  const int n = topo.node_count();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist_to_dst(n, inf);
  dist_to_dst[dst] = 0.0;
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.emplace(0.0, dst);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist_to_dst[u]) continue;
    for (NodeId v : topo.neighbors(u)) {
      if (node_blocked[v]) continue;
      const int hop = topo.hop_index(u, v);
      if (hop_blocked[hop]) continue;
      const double nd = d + topo.hop(hop).distance_km;
      if (nd < dist_to_dst[v]) {
        dist_to_dst[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  if (dist_to_dst[src] == inf) return false;

  out_dist = dist_to_dst[src];
  out_nodes.clear();
  out_nodes.push_back(src);
  NodeId cur = src;
  while (cur != dst) {
    NodeId next = -1;
    for (NodeId v : topo.neighbors(cur)) {  // neighbours are sorted
      if (node_blocked[v]) continue;
      const int hop = topo.hop_index(cur, v);
      if (hop_blocked[hop]) continue;
      if (dist_to_dst[v] == inf) continue;
      const double via = topo.hop(hop).distance_km + dist_to_dst[v];
      if (std::abs(via - dist_to_dst[cur]) < 1e-9) {
        next = v;
        break;
      }
    }
    if (next < 0) return false;  // should not happen on a reachable pair
    out_nodes.push_back(next);
    cur = next;
  }
  return true;
}

bool path_less(const Path& lhs, const Path& rhs) {
  if (lhs.total_distance_km != rhs.total_distance_km) {
    return lhs.total_distance_km < rhs.total_distance_km;
  }
  return lhs.nodes < rhs.nodes;
}

}  // namespace

std::vector<Path> k_shortest_paths(const Topology& topo, NodeId src, NodeId dst,
                                   int k) {
  if (src == dst) throw std::invalid_argument("source equals destination");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (src < 0 || dst < 0 || src >= topo.node_count() || dst >= topo.node_count()) {
    throw std::invalid_argument("node id out of range");
  }

  const int n = topo.node_count();
  std::vector<char> no_nodes(n, 0);
  std::vector<char> no_hops(topo.hops().size(), 0);

  std::vector<NodeId> nodes;
  double dist = 0.0;
  if (!lex_shortest_path(topo, src, dst, no_nodes, no_hops, nodes, dist)) {
    throw NoPathError("no path between the requested nodes");
  }

  std::vector<Path> accepted;
  accepted.push_back(make_path(topo, nodes));

  // Yen's loopless enumeration with (distance, node-sequence) ordering.
  std::set<std::vector<NodeId>> candidate_keys;
  std::vector<Path> candidates;
  while (static_cast<int>(accepted.size()) < k) {
    const Path& last = accepted.back();
    for (std::size_t spur = 0; spur + 1 < last.nodes.size(); ++spur) {
      std::vector<NodeId> root(last.nodes.begin(),
                               last.nodes.begin() + spur + 1);

      std::vector<char> node_blocked(n, 0);
      std::vector<char> hop_blocked(topo.hops().size(), 0);
      for (const Path& p : accepted) {
        if (p.nodes.size() > spur &&
            std::equal(root.begin(), root.end(), p.nodes.begin())) {
          if (p.nodes.size() > spur + 1) {
            hop_blocked[p.hop_indices[spur]] = 1;
          }
        }
      }
      for (std::size_t i = 0; i < spur; ++i) node_blocked[last.nodes[i]] = 1;

      std::vector<NodeId> spur_nodes;
      double spur_dist = 0.0;
      if (!lex_shortest_path(topo, last.nodes[spur], dst, node_blocked,
                             hop_blocked, spur_nodes, spur_dist)) {
        continue;
      }
      root.insert(root.end(), spur_nodes.begin() + 1, spur_nodes.end());
      if (candidate_keys.insert(root).second) {
        candidates.push_back(make_path(topo, root));
      }
    }
    if (candidates.empty()) break;
    const auto best = std::min_element(candidates.begin(), candidates.end(),
                                       path_less);
    accepted.push_back(*best);
    candidate_keys.erase(best->nodes);
    candidates.erase(best);
  }
  return accepted;
}

void write_edge_list(const Topology& topo, std::ostream& out) {
  out << "nodes " << topo.node_count() << "\n";
  for (const HopProfile& hop : topo.hops()) {
    out << hop.a << ' ' << hop.b << ' ' << csv::format_double(hop.weight) << ' '
        << csv::format_double(hop.distance_km) << "\n";
  }
}

Topology read_edge_list(std::istream& in) {
  std::string header;
  int n = 0;
  if (!(in >> header >> n) || header != "nodes") {
    throw std::runtime_error("edge list must start with a 'nodes <n>' header");
  }
  std::vector<HopProfile> hops;
  HopProfile hop;
  while (in >> hop.a >> hop.b >> hop.weight >> hop.distance_km) {
    hops.push_back(hop);
  }
  if (!in.eof() && in.fail()) {
    throw std::runtime_error("malformed edge list line");
  }
  return Topology(n, std::move(hops));
}

}  // namespace qpsim
