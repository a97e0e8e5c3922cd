#pragma once

// Tree topologies and the homogeneous zero-field Ising tree distribution.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lathe/errors.hpp"
#include "lathe/rng.hpp"

namespace lathe {

using Node = std::uint32_t;

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Unordered node pair, stored with u < v.
struct Edge {
  Node u = 0;
  Node v = 0;

  constexpr Edge() = default;
  constexpr Edge(Node a, Node b) : u(a < b ? a : b), v(a < b ? b : a) {}

  constexpr bool touches(Node x) const { return u == x || v == x; }
  constexpr Node other(Node x) const { return x == u ? v : u; }

  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Edge& e) {
  return os << '{' << e.u << ',' << e.v << '}';
}

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

/// Undirected tree on nodes 0..p-1. Validated at construction: p-1 edges,
/// no self-loops or duplicates, connected and acyclic.
class TreeTopology {
 public:
  TreeTopology(std::size_t p, std::vector<Edge> edges) : p_(p), edges_(std::move(edges)) {
    if (p_ == 0) throw invalid_size("tree needs at least one node");
    if (edges_.size() != p_ - 1)
      throw invalid_argument("tree on " + std::to_string(p_) + " nodes needs " +
                             std::to_string(p_ - 1) + " edges, got " +
                             std::to_string(edges_.size()));
    adjacency_.resize(p_);
    UnionFind uf(p_);
    for (const Edge& e : edges_) {
      if (e.v >= p_) throw invalid_argument("edge endpoint out of range");
      if (e.u == e.v) throw invalid_argument("self-loop in tree");
      // With exactly p-1 edges, any duplicate or cycle shows up as a failed union.
      if (!uf.unite(e.u, e.v)) throw invalid_argument("edge list contains a cycle or duplicate");
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    std::sort(edges_.begin(), edges_.end());
  }

  std::size_t num_nodes() const { return p_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Node> neighbors(Node v) const { return adjacency_.at(v); }
  std::size_t degree(Node v) const { return adjacency_.at(v).size(); }

  std::size_t max_degree() const {
    std::size_t d = 0;
    for (const auto& nb : adjacency_) d = std::max(d, nb.size());
    return d;
  }

  bool has_edge(Edge e) const { return std::binary_search(edges_.begin(), edges_.end(), e); }

  /// The small-degree condition p >= 82 d. Checked, never enforced.
  bool satisfies_degree_assumption() const { return p_ >= 82 * max_degree(); }

  /// Hop counts from `source` to every node.
  std::vector<std::size_t> distances_from(Node source) const {
    std::vector<std::size_t> dist(p_, kUnreachable);
    std::queue<Node> q;
    dist.at(source) = 0;
    q.push(source);
    while (!q.empty()) {
      Node x = q.front();
      q.pop();
      for (Node y : adjacency_[x]) {
        if (dist[y] == kUnreachable) {
          dist[y] = dist[x] + 1;
          q.push(y);
        }
      }
    }
    return dist;
  }

  std::size_t path_length(Node a, Node b) const {
    if (a >= p_ || b >= p_) throw invalid_argument("node out of range");
    return distances_from(a)[b];
  }

  friend bool operator==(const TreeTopology& a, const TreeTopology& b) {
    return a.p_ == b.p_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t p_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Node>> adjacency_;
};

// ---------------------------------------------------------------------------
// Builders

inline TreeTopology build_chain(std::size_t p) {
  if (p < 2) throw invalid_size("chain needs p >= 2");
  std::vector<Edge> edges;
  edges.reserve(p - 1);
  for (Node i = 0; i + 1 < p; ++i) edges.emplace_back(i, i + 1);
  return TreeTopology(p, std::move(edges));
}

/// Backbone chain 0..p/2-1 with leaf p/2+i hanging off backbone node i.
inline TreeTopology build_hmm(std::size_t p) {
  if (p < 4 || p % 2 != 0) throw invalid_size("HMM topology needs even p >= 4");
  const Node half = static_cast<Node>(p / 2);
  std::vector<Edge> edges;
  edges.reserve(p - 1);
  for (Node i = 0; i + 1 < half; ++i) edges.emplace_back(i, i + 1);
  for (Node i = 0; i < half; ++i) edges.emplace_back(i, half + i);
  return TreeTopology(p, std::move(edges));
}

/// Complete binary tree with 2^levels - 1 nodes; node k has children 2k+1, 2k+2.
inline TreeTopology build_binary_tree(std::size_t levels) {
  if (levels < 1 || levels > 30) throw invalid_size("binary tree needs 1 <= levels <= 30");
  const std::size_t p = (std::size_t{1} << levels) - 1;
  std::vector<Edge> edges;
  edges.reserve(p - 1);
  for (Node k = 1; k < p; ++k) edges.emplace_back((k - 1) / 2, k);
  return TreeTopology(p, std::move(edges));
}

/// Decode a Prüfer sequence (length p-2, entries < p) into its labeled tree.
inline TreeTopology decode_pruefer(std::size_t p, std::span<const Node> code) {
  if (p < 2 || code.size() != p - 2) throw invalid_argument("Pruefer code must have length p-2");
  std::vector<std::size_t> degree(p, 1);
  for (Node c : code) {
    if (c >= p) throw invalid_argument("Pruefer entry out of range");
    ++degree[c];
  }
  std::priority_queue<Node, std::vector<Node>, std::greater<>> leaves;
  for (Node v = 0; v < p; ++v)
    if (degree[v] == 1) leaves.push(v);
  std::vector<Edge> edges;
  edges.reserve(p - 1);
  for (Node c : code) {
    Node leaf = leaves.top();
    leaves.pop();
    edges.emplace_back(leaf, c);
    if (--degree[c] == 1) leaves.push(c);
  }
  Node a = leaves.top();
  leaves.pop();
  Node b = leaves.top();
  edges.emplace_back(a, b);
  return TreeTopology(p, std::move(edges));
}

/// Uniform labeled tree (Cayley) via a uniform Prüfer sequence.
inline TreeTopology build_random_tree(std::size_t p, RngSeed seed) {
  if (p < 2) throw invalid_size("random tree needs p >= 2");
  Rng rng = make_rng(seed);
  std::vector<Node> code(p - 2);
  for (Node& c : code) c = static_cast<Node>(uniform_below(rng, p));
  return decode_pruefer(p, code);
}

// ---------------------------------------------------------------------------
// Serialization: header "p=<count>", then one "u v" pair per line.

inline void write_edge_list(std::ostream& os, const TreeTopology& t) {
  os << "p=" << t.num_nodes() << '\n';
  for (const Edge& e : t.edges()) os << e.u << ' ' << e.v << '\n';
}

inline TreeTopology read_edge_list(std::istream& is) {
  std::string line;
  std::size_t p = 0;
  bool have_header = false;
  std::vector<Edge> edges;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (!have_header) {
      if (line.rfind("p=", 0) != 0) throw invalid_argument("edge list must start with p=<count>");
      p = std::stoul(line.substr(2));
      have_header = true;
      continue;
    }
    std::istringstream ls(line);
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0)
      throw invalid_argument("malformed edge line: " + line);
    edges.emplace_back(static_cast<Node>(u), static_cast<Node>(v));
  }
  if (!have_header) throw invalid_argument("empty edge list");
  return TreeTopology(p, std::move(edges));
}

// ---------------------------------------------------------------------------
// Model and sampling

/// Homogeneous zero-field Ising model on a tree. rho is the stored parameter;
/// theta = (1 - rho) / 2 is always derived from it.
class IsingTreeModel {
 public:
  IsingTreeModel(TreeTopology topology, double rho) : topology_(std::move(topology)), rho_(rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw domain_error("rho must lie in (0,1)");
    // BFS from node 0 fixes the ancestral sampling order.
    const std::size_t p = topology_.num_nodes();
    parent_.assign(p, 0);
    std::vector<bool> seen(p, false);
    order_.reserve(p);
    order_.push_back(0);
    seen[0] = true;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      Node x = order_[head];
      for (Node y : topology_.neighbors(x)) {
        if (!seen[y]) {
          seen[y] = true;
          parent_[y] = x;
          order_.push_back(y);
        }
      }
    }
  }

  const TreeTopology& topology() const { return topology_; }
  std::size_t num_nodes() const { return topology_.num_nodes(); }
  double rho() const { return rho_; }
  double theta() const { return (1.0 - rho_) / 2.0; }

  std::span<const Node> sampling_order() const { return order_; }
  Node parent(Node v) const { return parent_.at(v); }

 private:
  TreeTopology topology_;
  double rho_;
  std::vector<Node> order_;
  std::vector<Node> parent_;
};

/// m samples over an ordered node list; entries are +1/-1, stored column-major
/// (one contiguous column of length m per node).
class SampleBlock {
 public:
  SampleBlock() = default;
  SampleBlock(std::vector<Node> nodes, std::size_t m)
      : nodes_(std::move(nodes)), m_(m), data_(nodes_.size() * m, 1) {}
  SampleBlock(std::vector<Node> nodes, std::size_t m, std::vector<std::int8_t> column_major)
      : nodes_(std::move(nodes)), m_(m), data_(std::move(column_major)) {
    if (data_.size() != nodes_.size() * m_) throw invalid_argument("sample block size mismatch");
    for (std::int8_t x : data_)
      if (x != 1 && x != -1) throw invalid_argument("sample entries must be +1 or -1");
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t num_samples() const { return m_; }
  std::size_t num_columns() const { return nodes_.size(); }

  std::int8_t at(std::size_t sample, std::size_t col) const { return data_[col * m_ + sample]; }
  std::int8_t& at(std::size_t sample, std::size_t col) { return data_[col * m_ + sample]; }

  std::span<const std::int8_t> column(std::size_t col) const {
    return std::span<const std::int8_t>(data_).subspan(col * m_, m_);
  }
  std::span<std::int8_t> column(std::size_t col) {
    return std::span<std::int8_t>(data_).subspan(col * m_, m_);
  }

  friend bool operator==(const SampleBlock&, const SampleBlock&) = default;

 private:
  std::vector<Node> nodes_;
  std::size_t m_ = 0;
  std::vector<std::int8_t> data_;
};

/// m i.i.d. full vectors by ancestral sampling from node 0: the root is a fair
/// coin, every other node copies its parent and flips with probability theta.
inline SampleBlock sample_vectors(const IsingTreeModel& model, std::size_t m, RngSeed seed) {
  if (m < 1) throw invalid_argument("sample count must be >= 1");
  const std::size_t p = model.num_nodes();
  std::vector<Node> nodes(p);
  std::iota(nodes.begin(), nodes.end(), Node{0});
  SampleBlock block(std::move(nodes), m);
  Rng rng = make_rng(seed);
  const BernoulliThreshold flip(model.theta());
  auto order = model.sampling_order();
  {
    auto root = block.column(order[0]);
    for (auto& x : root) x = fair_coin(rng) ? 1 : -1;
  }
  for (std::size_t k = 1; k < order.size(); ++k) {
    const Node v = order[k];
    auto parent = block.column(model.parent(v));
    auto child = block.column(v);
    for (std::size_t s = 0; s < m; ++s)
      child[s] = static_cast<std::int8_t>(flip(rng) ? -parent[s] : parent[s]);
  }
  return block;
}

/// m i.i.d. draws of the marginal on `nodes`: full vectors are drawn and
/// projected. The caller's ledger charges |nodes| scalars per draw.
inline SampleBlock sample_subvector(const IsingTreeModel& model, std::span<const Node> nodes,
                                    std::size_t m, RngSeed seed) {
  if (nodes.empty()) throw invalid_argument("sub-vector node set is empty");
  for (Node v : nodes)
    if (v >= model.num_nodes()) throw invalid_argument("sub-vector node out of range");
  SampleBlock full = sample_vectors(model, m, seed);
  std::vector<std::int8_t> data;
  data.reserve(nodes.size() * m);
  for (Node v : nodes) {
    auto col = full.column(v);
    data.insert(data.end(), col.begin(), col.end());
  }
  return SampleBlock(std::vector<Node>(nodes.begin(), nodes.end()), m, std::move(data));
}

/// rho^{|Path(u,v)|} by correlation decay.
inline double exact_correlation(const IsingTreeModel& model, Node u, Node v) {
  if (u == v) throw invalid_argument("exact_correlation needs distinct nodes");
  return std::pow(model.rho(), static_cast<double>(model.topology().path_length(u, v)));
}

}  // namespace lathe
