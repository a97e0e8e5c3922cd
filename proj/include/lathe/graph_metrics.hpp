#pragma once

// Edge pre-distances, 2-packings of edge collections in trees and forests, and
// the t-hop classification of structure-learning errors.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "lathe/errors.hpp"
#include "lathe/tree_model.hpp"

namespace lathe {

/// Acyclic undirected graph on nodes 0..p-1; may be disconnected.
class Forest {
 public:
  Forest(std::size_t p, std::vector<Edge> edges) : p_(p), edges_(std::move(edges)), adjacency_(p) {
    UnionFind uf(p_);
    for (const Edge& e : edges_) {
      if (e.v >= p_) throw invalid_argument("forest edge endpoint out of range");
      if (e.u == e.v) throw invalid_argument("self-loop in forest");
      if (!uf.unite(e.u, e.v)) throw invalid_argument("forest edge list contains a cycle or duplicate");
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    std::sort(edges_.begin(), edges_.end());
  }
  Forest(const TreeTopology& t) : Forest(t.num_nodes(), t.edges()) {}  // NOLINT(implicit)

  std::size_t num_nodes() const { return p_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Node> neighbors(Node v) const { return adjacency_.at(v); }
  bool has_edge(Edge e) const { return std::binary_search(edges_.begin(), edges_.end(), e); }

  std::size_t max_degree() const {
    std::size_t d = 0;
    for (const auto& nb : adjacency_) d = std::max(d, nb.size());
    return d;
  }

  /// Multi-source BFS hop counts; kUnreachable outside the sources' components.
  std::vector<std::size_t> distances_from(std::span<const Node> sources) const {
    std::vector<std::size_t> dist(p_, kUnreachable);
    std::queue<Node> q;
    for (Node s : sources) {
      if (s >= p_) throw invalid_argument("node " + std::to_string(s) + " not in graph");
      if (dist[s] != 0) {
        dist[s] = 0;
        q.push(s);
      }
    }
    while (!q.empty()) {
      Node x = q.front();
      q.pop();
      for (Node y : adjacency_[x])
        if (dist[y] == kUnreachable) {
          dist[y] = dist[x] + 1;
          q.push(y);
        }
    }
    return dist;
  }

  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<Node>> components() const {
    std::vector<std::vector<Node>> out;
    std::vector<bool> seen(p_, false);
    for (Node s = 0; s < p_; ++s) {
      if (seen[s]) continue;
      std::vector<Node> comp{s};
      seen[s] = true;
      for (std::size_t h = 0; h < comp.size(); ++h)
        for (Node y : adjacency_[comp[h]])
          if (!seen[y]) {
            seen[y] = true;
            comp.push_back(y);
          }
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
    return out;
  }

 private:
  std::size_t p_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Node>> adjacency_;
};

/// min over endpoints u of e, v of f of the hop count from u to v.
inline std::size_t edge_geodesic_predistance(const Forest& g, Edge e, Edge f) {
  const Node src[2] = {e.u, e.v};
  if (f.v >= g.num_nodes()) throw invalid_argument("edge endpoint not in graph");
  const auto dist = g.distances_from(src);
  return std::min(dist[f.u], dist[f.v]);
}

// ---------------------------------------------------------------------------
// Packing

struct PackingStep {
  Edge selected;
  Node deepest = 0;
  std::size_t depth = 0;
  std::vector<Edge> deleted;  // other remaining edges removed with it
};

struct PackingComponent {
  Node root = 0;
  std::size_t num_nodes = 0;
  std::size_t selected = 0;
};

struct PackingResult {
  std::vector<Edge> selected;
  std::size_t r = 2;
  std::vector<PackingStep> trace;
  std::vector<PackingComponent> components;

  std::size_t size() const { return selected.size(); }
};

/// Lower bound (|V| - 1)/(2d - 1) on the greedy 2-packing of a component's edges.
inline double greedy_packing_bound(std::size_t component_nodes, std::size_t max_degree) {
  if (component_nodes < 2 || max_degree == 0) return 0.0;
  return static_cast<double>(component_nodes - 1) / static_cast<double>(2 * max_degree - 1);
}

/// Each component is rooted at its smallest node. Repeatedly take the
/// remaining edge of C whose deeper endpoint is deepest (ties to the smaller
/// node id) and drop every remaining edge within pre-distance 1 of it.
inline PackingResult greedy_2packing(const Forest& g, std::span<const Edge> collection) {
  const std::size_t p = g.num_nodes();
  for (const Edge& e : collection)
    if (e.v >= p || !g.has_edge(e))
      throw invalid_argument("edge {" + std::to_string(e.u) + "," + std::to_string(e.v) +
                             "} is not in the graph");

  std::vector<std::size_t> depth(p, kUnreachable);
  std::vector<std::size_t> comp_of(p, 0);
  PackingResult out;
  const auto comps = g.components();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Node root = comps[c].front();
    const Node src[1] = {root};
    const auto d = g.distances_from(src);
    for (Node v : comps[c]) {
      depth[v] = d[v];
      comp_of[v] = c;
    }
    out.components.push_back({root, comps[c].size(), 0});
  }

  struct Item {
    Edge e;
    Node child;
    std::size_t depth;
  };
  std::vector<Item> remaining;
  for (const Edge& e : collection) {
    const Node child = depth[e.u] > depth[e.v] ? e.u : e.v;
    remaining.push_back({e, child, depth[child]});
  }
  std::sort(remaining.begin(), remaining.end(), [](const Item& a, const Item& b) { return a.e < b.e; });
  remaining.erase(std::unique(remaining.begin(), remaining.end(),
                              [](const Item& a, const Item& b) { return a.e == b.e; }),
                  remaining.end());

  while (!remaining.empty()) {
    auto best = std::min_element(remaining.begin(), remaining.end(), [](const Item& a, const Item& b) {
      if (a.depth != b.depth) return a.depth > b.depth;
      return a.child < b.child;
    });
    const Item pick = *best;
    const Node src[2] = {pick.e.u, pick.e.v};
    const auto dist = g.distances_from(src);
    PackingStep step{pick.e, pick.child, pick.depth, {}};
    std::vector<Item> keep;
    for (const Item& it : remaining) {
      if (std::min(dist[it.e.u], dist[it.e.v]) <= 1) {
        if (it.e != pick.e) step.deleted.push_back(it.e);
      } else {
        keep.push_back(it);
      }
    }
    remaining = std::move(keep);
    out.selected.push_back(pick.e);
    ++out.components[comp_of[pick.child]].selected;
    out.trace.push_back(std::move(step));
  }
  return out;
}

inline constexpr std::size_t kBruteForcePackingLimit = 20;

/// Exact r-packing number: largest subset of C with pairwise pre-distance >= r.
inline std::size_t packing_number_bruteforce(std::span<const Edge> collection, const Forest& g,
                                             std::size_t r) {
  std::vector<Edge> c(collection.begin(), collection.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  if (c.size() > kBruteForcePackingLimit)
    throw too_large("brute-force packing limited to " + std::to_string(kBruteForcePackingLimit) +
                    " edges, got " + std::to_string(c.size()));
  const std::size_t k = c.size();
  std::vector<std::uint32_t> conflict(k, 0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const std::size_t d = edge_geodesic_predistance(g, c[a], c[b]);
      if (d != kUnreachable && d < r) {
        conflict[a] |= std::uint32_t{1} << b;
        conflict[b] |= std::uint32_t{1} << a;
      }
    }
  std::size_t best = 0;
  // All subsets, skipping any containing a conflicting pair.
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << k); ++mask) {
    bool ok = true;
    for (std::size_t a = 0; a < k && ok; ++a)
      if ((mask >> a) & 1) ok = (conflict[a] & mask) == 0;
    if (ok) best = std::max<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
  }
  return best;
}

inline void write_packing_trace(std::ostream& os, const PackingResult& res, Node label_offset = 0) {
  auto show = [&](Edge e) { os << '{' << e.u + label_offset << ',' << e.v + label_offset << '}'; };
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const auto& s = res.trace[i];
    os << "step " << i + 1 << ": select ";
    show(s.selected);
    os << " (depth " << s.depth << "), delete";
    if (s.deleted.empty()) os << " none";
    for (const Edge& e : s.deleted) {
      os << ' ';
      show(e);
    }
    os << '\n';
  }
  os << "packing size " << res.size() << '\n';
}

// ---------------------------------------------------------------------------
// t-hop errors

struct HopErrorHistogram {
  std::map<std::size_t, std::size_t> counts;  // true-tree distance -> wrong edges

  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& [t, c] : counts) s += c;
    return s;
  }
  bool empty() const { return counts.empty(); }
};

inline HopErrorHistogram t_hop_classify(const TreeTopology& learned, const TreeTopology& truth) {
  if (learned.num_nodes() != truth.num_nodes())
    throw invalid_argument("learned and true trees have different node sets");
  HopErrorHistogram h;
  for (const Edge& e : learned.edges())
    if (!truth.has_edge(e)) ++h.counts[truth.path_length(e.u, e.v)];
  return h;
}

}  // namespace lathe
