#pragma once

// Empirical pairwise correlations with heterogeneous per-pair counts, and the
// maximum-weight spanning tree learners built on them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lathe/errors.hpp"
#include "lathe/tree_model.hpp"

namespace lathe {

namespace detail {

// One bit per sample, set for -1. Disagreements between two columns are then
// popcount(a ^ b) and the product sum is m - 2 * disagreements.
inline std::vector<std::vector<std::uint64_t>> pack_columns(const SampleBlock& block) {
  const std::size_t m = block.num_samples();
  const std::size_t words = (m + 63) / 64;
  std::vector<std::vector<std::uint64_t>> packed(block.num_columns(),
                                                 std::vector<std::uint64_t>(words, 0));
  for (std::size_t c = 0; c < block.num_columns(); ++c) {
    auto col = block.column(c);
    auto& bits = packed[c];
    for (std::size_t s = 0; s < m; ++s)
      if (col[s] < 0) bits[s >> 6] |= std::uint64_t{1} << (s & 63);
  }
  return packed;
}

inline std::int64_t disagreements(std::span<const std::uint64_t> a,
                                  std::span<const std::uint64_t> b) {
  std::int64_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

}  // namespace detail

/// Running sums of X_u X_v and joint sample counts for every unordered pair of
/// a fixed node universe. Integer storage, so accumulation is exact and
/// merging is associative and commutative.
class CorrelationAccumulator {
 public:
  CorrelationAccumulator() = default;
  explicit CorrelationAccumulator(std::size_t p) : p_(p), sum_(p * p, 0), count_(p * p, 0) {}

  std::size_t universe() const { return p_; }

  void accumulate(const SampleBlock& block) {
    for (Node v : block.nodes())
      if (v >= p_) throw invalid_argument("sample block node " + std::to_string(v) +
                                          " outside universe of " + std::to_string(p_));
    const std::size_t m = block.num_samples();
    if (m == 0) return;
    const auto packed = detail::pack_columns(block);
    const auto& nodes = block.nodes();
    const auto mm = static_cast<std::int64_t>(m);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        if (nodes[a] == nodes[b]) continue;
        const std::size_t idx = index(nodes[a], nodes[b]);
        sum_[idx] += mm - 2 * detail::disagreements(packed[a], packed[b]);
        count_[idx] += mm;
      }
    }
  }

  void merge(const CorrelationAccumulator& other) {
    if (other.p_ != p_) throw invalid_argument("cannot merge accumulators over different universes");
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] += other.sum_[i];
      count_[i] += other.count_[i];
    }
  }

  std::int64_t sum(Node u, Node v) const { return sum_[checked_index(u, v)]; }
  std::int64_t count(Node u, Node v) const { return count_[checked_index(u, v)]; }

  /// sum / count, in [-1, 1]. Throws no_data when the pair was never observed.
  double correlation(Node u, Node v) const {
    const std::size_t idx = checked_index(u, v);
    if (count_[idx] == 0)
      throw no_data("pair (" + std::to_string(u) + "," + std::to_string(v) + ") has no samples");
    return static_cast<double>(sum_[idx]) / static_cast<double>(count_[idx]);
  }

  friend bool operator==(const CorrelationAccumulator&, const CorrelationAccumulator&) = default;

 private:
  std::size_t index(Node u, Node v) const {
    return u < v ? std::size_t{u} * p_ + v : std::size_t{v} * p_ + u;
  }
  std::size_t checked_index(Node u, Node v) const {
    if (u >= p_ || v >= p_ || u == v) throw invalid_argument("invalid node pair");
    return index(u, v);
  }

  std::size_t p_ = 0;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> count_;
};

inline void accumulate(CorrelationAccumulator& acc, const SampleBlock& block) {
  acc.accumulate(block);
}

inline double empirical_correlation(const CorrelationAccumulator& acc, Node u, Node v) {
  return acc.correlation(u, v);
}

/// A spanning tree over `nodes` (global labels) plus the weight each edge had
/// when Kruskal selected it.
struct LearnedTree {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<double> weights;

  /// Only valid when `nodes` is the full universe 0..p-1.
  TreeTopology topology() const { return TreeTopology(nodes.size(), edges); }

  std::vector<Edge> sorted_edges() const {
    auto e = edges;
    std::sort(e.begin(), e.end());
    return e;
  }
};

/// Kruskal on the complete graph over `nodes`. Heavier edges first; equal
/// weights are taken in lexicographic (min id, max id) order.
template <class WeightFn>
LearnedTree max_spanning_tree(std::span<const Node> nodes, WeightFn&& weight) {
  struct Candidate {
    double w;
    Edge e;
  };
  std::vector<Node> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw invalid_argument("duplicate node in spanning tree node set");

  std::vector<Candidate> cand;
  cand.reserve(sorted.size() * (sorted.size() - (sorted.empty() ? 0 : 1)) / 2);
  for (std::size_t a = 0; a < sorted.size(); ++a)
    for (std::size_t b = a + 1; b < sorted.size(); ++b)
      cand.push_back({static_cast<double>(weight(sorted[a], sorted[b])), Edge(sorted[a], sorted[b])});
  std::sort(cand.begin(), cand.end(), [](const Candidate& x, const Candidate& y) {
    if (x.w != y.w) return x.w > y.w;
    return x.e < y.e;
  });

  // Union-find over local positions.
  auto local = [&](Node v) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
  };
  UnionFind uf(sorted.size());
  LearnedTree out;
  out.nodes = sorted;
  for (const auto& c : cand) {
    if (out.edges.size() + 1 >= sorted.size()) break;
    if (uf.unite(local(c.e.u), local(c.e.v))) {
      out.edges.push_back(c.e);
      out.weights.push_back(c.w);
    }
  }
  return out;
}

/// SCL: maximum spanning tree with empirical correlations as weights.
inline LearnedTree scl_mst(const CorrelationAccumulator& acc, std::span<const Node> nodes) {
  return max_spanning_tree(nodes, [&](Node u, Node v) { return acc.correlation(u, v); });
}

inline LearnedTree scl_mst(const CorrelationAccumulator& acc) {
  std::vector<Node> all(acc.universe());
  std::iota(all.begin(), all.end(), Node{0});
  return scl_mst(acc, all);
}

/// Plug-in mutual information (nats) from a 2x2 table of counts.
inline double plugin_mutual_information(std::int64_t n_pp, std::int64_t n_pm, std::int64_t n_mp,
                                        std::int64_t n_mm) {
  const double n = static_cast<double>(n_pp + n_pm + n_mp + n_mm);
  if (n == 0) return 0.0;
  const double row[2] = {static_cast<double>(n_pp + n_pm), static_cast<double>(n_mp + n_mm)};
  const double col[2] = {static_cast<double>(n_pp + n_mp), static_cast<double>(n_pm + n_mm)};
  const double cell[2][2] = {{static_cast<double>(n_pp), static_cast<double>(n_pm)},
                             {static_cast<double>(n_mp), static_cast<double>(n_mm)}};
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      if (cell[a][b] > 0) mi += cell[a][b] / n * std::log(cell[a][b] * n / (row[a] * col[b]));
  return mi;
}

/// Classical Chow-Liu on jointly observed samples: maximum spanning tree with
/// plug-in empirical mutual information weights, same tie-break as scl_mst.
inline LearnedTree cl_mst_mutual_information(const SampleBlock& block) {
  if (block.num_samples() == 0) throw no_data("Chow-Liu needs at least one sample");
  const auto packed = detail::pack_columns(block);
  const auto m = static_cast<std::int64_t>(block.num_samples());
  const auto& nodes = block.nodes();
  std::vector<std::int64_t> minus(nodes.size(), 0);
  for (std::size_t c = 0; c < nodes.size(); ++c)
    for (auto w : packed[c]) minus[c] += std::popcount(w);

  std::vector<Node> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> col_of(sorted.empty() ? 0 : sorted.back() + 1, 0);
  for (std::size_t c = 0; c < nodes.size(); ++c) col_of[nodes[c]] = c;

  return max_spanning_tree(sorted, [&](Node u, Node v) {
    const std::size_t a = col_of[u], b = col_of[v];
    std::int64_t n_mm = 0;
    for (std::size_t w = 0; w < packed[a].size(); ++w) n_mm += std::popcount(packed[a][w] & packed[b][w]);
    const std::int64_t n_mp = minus[a] - n_mm;  // u = -1, v = +1
    const std::int64_t n_pm = minus[b] - n_mm;  // u = +1, v = -1
    const std::int64_t n_pp = m - n_mm - n_mp - n_pm;
    return plugin_mutual_information(n_pp, n_pm, n_mp, n_mm);
  });
}

}  // namespace lathe
