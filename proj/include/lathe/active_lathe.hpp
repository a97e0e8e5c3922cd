#pragma once

// Two-phase active structure learning for homogeneous Ising trees: an
// iterative global SCL phase that picks the fraction of the budget to spend on
// full vectors, followed by local refinement of the unconfident part of the
// tree using sub-vector samples.

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lathe/errors.hpp"
#include "lathe/estimation.hpp"
#include "lathe/rng.hpp"
#include "lathe/tree_model.hpp"

namespace lathe {

// ---------------------------------------------------------------------------
// Global-phase fraction table

/// A global-phase fraction stored in per-mille so the floors in the sample
/// schedule are exact integer arithmetic.
struct AlphaLevel {
  int permille = 0;

  constexpr double value() const { return permille / 1000.0; }
  /// floor(alpha * n)
  constexpr std::uint64_t floor_times(std::uint64_t n) const {
    return static_cast<std::uint64_t>(permille) * n / 1000;
  }
  friend constexpr auto operator<=>(const AlphaLevel&, const AlphaLevel&) = default;
};

inline constexpr std::array<AlphaLevel, 7> kAlphaLevels = {
    AlphaLevel{800}, AlphaLevel{850}, AlphaLevel{900}, AlphaLevel{950},
    AlphaLevel{985}, AlphaLevel{995}, AlphaLevel{1000}};

/// Table lookup on half-open intervals [lo, hi). rho_hat <= 0 falls back to
/// the fully passive alpha = 1; rho_hat >= 1 maps to the last row.
constexpr AlphaLevel alpha_lookup(double rho_hat) {
  if (!(rho_hat > 0.0)) return AlphaLevel{1000};
  if (rho_hat < 0.02) return AlphaLevel{1000};
  if (rho_hat < 0.07) return AlphaLevel{995};
  if (rho_hat < 0.16) return AlphaLevel{985};
  if (rho_hat < 0.34) return AlphaLevel{950};
  if (rho_hat < 0.53) return AlphaLevel{900};
  if (rho_hat < 0.76) return AlphaLevel{850};
  return AlphaLevel{800};
}

/// Mean empirical correlation over the learned tree's edges.
inline double estimate_rho(const LearnedTree& tree, const CorrelationAccumulator& acc) {
  if (tree.edges.empty()) throw invalid_argument("rho estimate needs a tree with >= 2 nodes");
  double total = 0.0;
  for (const Edge& e : tree.edges) total += acc.correlation(e.u, e.v);
  return total / static_cast<double>(tree.edges.size());
}

// ---------------------------------------------------------------------------
// Sampling oracle and budget

template <class O>
concept SamplingOracle = requires(O& o, std::span<const Node> nodes, std::size_t m, RngSeed seed) {
  { o.num_nodes() } -> std::convertible_to<std::size_t>;
  { o.draw(nodes, m, seed) } -> std::same_as<SampleBlock>;
};

/// Oracle backed by exact sampling from a model.
class IsingOracle {
 public:
  explicit IsingOracle(const IsingTreeModel& model) : model_(&model) {}
  std::size_t num_nodes() const { return model_->num_nodes(); }
  SampleBlock draw(std::span<const Node> nodes, std::size_t m, RngSeed seed) const {
    return sample_subvector(*model_, nodes, m, seed);
  }

 private:
  const IsingTreeModel* model_;
};

struct Acquisition {
  std::string stage;
  std::vector<Node> nodes;
  std::uint64_t samples = 0;
  std::uint64_t scalars() const { return samples * nodes.size(); }
};

/// Scalar-sample budget n * p. Every acquisition of m draws over a subset S is
/// charged m * |S| before the draw happens; overdraw throws.
class BudgetLedger {
 public:
  BudgetLedger(std::uint64_t n, std::uint64_t p) : total_(n * p) {}

  std::uint64_t total() const { return total_; }
  std::uint64_t spent() const { return spent_; }
  std::uint64_t remaining() const { return total_ - spent_; }
  const std::vector<Acquisition>& log() const { return log_; }

  void charge(std::string stage, std::span<const Node> nodes, std::uint64_t samples) {
    const std::uint64_t cost = samples * nodes.size();
    if (cost > remaining())
      throw ledger_violation("stage '" + stage + "' asks for " + std::to_string(cost) +
                             " scalars with " + std::to_string(remaining()) + " left");
    spent_ += cost;
    log_.push_back({std::move(stage), std::vector<Node>(nodes.begin(), nodes.end()), samples});
  }

  template <SamplingOracle O>
  SampleBlock acquire(O& oracle, std::string stage, std::span<const Node> nodes,
                      std::uint64_t samples, RngSeed seed) {
    charge(std::move(stage), nodes, samples);
    return oracle.draw(nodes, samples, seed);
  }

 private:
  std::uint64_t total_;
  std::uint64_t spent_ = 0;
  std::vector<Acquisition> log_;
};

// ---------------------------------------------------------------------------
// Global learning phase

struct GlobalIteration {
  AlphaLevel alpha;              // fraction whose samples this iteration completed
  double rho_hat = 0.0;          // estimate from the refitted tree
  std::uint64_t vector_samples;  // cumulative full-vector samples
};

struct GlobalPhaseResult {
  LearnedTree tree;
  CorrelationAccumulator acc;
  AlphaLevel alpha;  // alpha of the last iteration whose samples were acquired
  double rho_hat = 0.0;
  std::vector<GlobalIteration> trace;
  std::uint64_t vector_samples = 0;
};

inline std::vector<Node> all_nodes(std::size_t p) {
  std::vector<Node> v(p);
  std::iota(v.begin(), v.end(), Node{0});
  return v;
}

/// Starting at alpha = 0.8, top the full-vector sample count up to
/// floor(alpha_i n), refit SCL on everything so far, re-estimate rho, and look
/// up the next alpha. Stops once the table no longer asks for more.
template <SamplingOracle O>
GlobalPhaseResult global_phase(O& oracle, std::uint64_t n, BudgetLedger& ledger, RngSeed seed) {
  const std::size_t p = oracle.num_nodes();
  if (p < 2) throw invalid_argument("global phase needs p >= 2");
  if (AlphaLevel{800}.floor_times(n) < 1)
    throw invalid_argument("n must be >= 2 so the first global iteration draws a sample");

  const auto nodes = all_nodes(p);
  GlobalPhaseResult out;
  out.acc = CorrelationAccumulator(p);
  AlphaLevel previous{0};
  AlphaLevel current{800};
  std::uint64_t iteration = 0;
  while (current > previous) {
    const std::uint64_t m = current.floor_times(n) - previous.floor_times(n);
    if (m > 0)
      out.acc.accumulate(ledger.acquire(oracle, "global", nodes, m, seed.derive({0, iteration})));
    out.vector_samples += m;
    out.tree = scl_mst(out.acc, nodes);
    out.rho_hat = estimate_rho(out.tree, out.acc);
    out.trace.push_back({current, out.rho_hat, out.vector_samples});
    previous = current;
    current = alpha_lookup(out.rho_hat);
    ++iteration;
  }
  out.alpha = previous;
  return out;
}

// ---------------------------------------------------------------------------
// Confidence classification

/// The (i,j,k)-confident event with j as the middle node:
/// rho_ik <= rho_ij (11 + 9 rho)/20 and rho_ik <= rho_jk (11 + 9 rho)/20.
inline bool confident_event(const CorrelationAccumulator& acc, Node i, Node j, Node k,
                            double rho_hat) {
  const double factor = (11.0 + 9.0 * rho_hat) / 20.0;
  const double r_ik = acc.correlation(i, k);
  const double r_ij = acc.correlation(i, j);
  const double r_jk = acc.correlation(j, k);
  return r_ik <= r_ij * factor && r_ik <= r_jk * factor;
}

struct ConfidenceSets {
  std::vector<Edge> confident_edges;
  std::vector<Edge> unconfident_edges;
  std::vector<Node> unconfident_nodes;

  std::size_t p_tilde() const { return unconfident_nodes.size(); }
};

/// Tests every pair of learned-tree edges sharing a node (once per unordered
/// pair, shared node in the middle). A failed test marks both edges and all
/// three nodes unconfident.
inline ConfidenceSets classify_confidence(const LearnedTree& tree, const CorrelationAccumulator& acc,
                                          double rho_hat) {
  const std::size_t p = acc.universe();
  std::vector<std::vector<Node>> adj(p);
  for (const Edge& e : tree.edges) {
    adj.at(e.u).push_back(e.v);
    adj.at(e.v).push_back(e.u);
  }
  std::vector<Edge> bad;
  std::vector<bool> bad_node(p, false);
  for (Node j = 0; j < p; ++j) {
    auto& nb = adj[j];
    std::sort(nb.begin(), nb.end());
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (confident_event(acc, nb[a], j, nb[b], rho_hat)) continue;
        bad.emplace_back(nb[a], j);
        bad.emplace_back(j, nb[b]);
        bad_node[nb[a]] = bad_node[j] = bad_node[nb[b]] = true;
      }
    }
  }
  std::sort(bad.begin(), bad.end());
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());

  ConfidenceSets out;
  out.unconfident_edges = bad;
  for (const Edge& e : tree.sorted_edges())
    if (!std::binary_search(bad.begin(), bad.end(), e)) out.confident_edges.push_back(e);
  for (Node v = 0; v < p; ++v)
    if (bad_node[v]) out.unconfident_nodes.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Local refinement

struct RefinementResult {
  std::vector<Edge> edges;  // final spanning tree edges, sorted
  std::uint64_t subvector_samples = 0;
  std::vector<std::vector<Node>> components;
};

/// Connected components of the graph (unconfident nodes, unconfident edges).
inline std::vector<std::vector<Node>> unconfident_components(const ConfidenceSets& conf,
                                                             std::size_t p) {
  UnionFind uf(p);
  for (const Edge& e : conf.unconfident_edges) uf.unite(e.u, e.v);
  std::vector<std::vector<Node>> groups;
  std::vector<std::size_t> slot(p, kUnreachable);
  for (Node v : conf.unconfident_nodes) {
    const std::size_t r = uf.find(v);
    if (slot[r] == kUnreachable) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(v);
  }
  return groups;
}

/// Spends the remaining budget on floor((1-alpha) n p / p~) sub-vector samples of
/// the unconfident nodes, then relearns each unconfident component with SCL on
/// the pooled global + refinement samples and swaps its edges in.
template <SamplingOracle O>
RefinementResult local_refinement(O& oracle, const LearnedTree& tree, const ConfidenceSets& conf,
                                  CorrelationAccumulator& acc, AlphaLevel alpha, std::uint64_t n,
                                  BudgetLedger& ledger, RngSeed seed) {
  const std::size_t p = oracle.num_nodes();
  RefinementResult out;
  out.edges = tree.sorted_edges();
  const std::size_t p_tilde = conf.p_tilde();
  if (p_tilde == 0 || alpha.permille >= 1000) return out;
  if (p_tilde == 1) throw std::logic_error("a single unconfident node cannot occur");

  const std::uint64_t m =
      static_cast<std::uint64_t>(1000 - alpha.permille) * n * p / (1000 * std::uint64_t{p_tilde});
  if (m > 0) {
    acc.accumulate(ledger.acquire(oracle, "refine", conf.unconfident_nodes, m, seed.derive({1})));
  }
  out.subvector_samples = m;

  out.components = unconfident_components(conf, p);
  std::vector<Edge> kept = conf.confident_edges;
  for (const auto& comp : out.components) {
    const LearnedTree relearned = scl_mst(acc, comp);
    kept.insert(kept.end(), relearned.edges.begin(), relearned.edges.end());
  }
  std::sort(kept.begin(), kept.end());
  // Replacing a subtree's edges by any spanning tree of its nodes keeps a
  // spanning tree; TreeTopology's validation double-checks it.
  if (kept.size() + 1 != p) throw std::logic_error("refined edge set is not a spanning tree");
  (void)TreeTopology(p, kept);
  out.edges = std::move(kept);
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct ActiveResult {
  TreeTopology tree;
  std::vector<GlobalIteration> trace;
  AlphaLevel alpha;
  double rho_hat = 0.0;
  ConfidenceSets confidence;
  std::vector<std::uint64_t> node_scalar_counts;  // scalar samples seen by each node
  std::uint64_t global_vector_samples = 0;
  std::uint64_t refinement_samples = 0;
  BudgetLedger ledger;
};

using ConfidenceClassifier =
    std::function<ConfidenceSets(const LearnedTree&, const CorrelationAccumulator&, double)>;

template <SamplingOracle O>
ActiveResult active_lathe(O& oracle, std::size_t p, std::uint64_t n, RngSeed seed,
                          const ConfidenceClassifier& classify = classify_confidence) {
  if (p != oracle.num_nodes()) throw invalid_argument("p does not match the oracle");
  if (n < 1) throw invalid_argument("n must be >= 1");
  BudgetLedger ledger(n, p);
  GlobalPhaseResult global = global_phase(oracle, n, ledger, seed.derive({0}));
  ConfidenceSets conf = classify(global.tree, global.acc, global.rho_hat);
  RefinementResult refined = local_refinement(oracle, global.tree, conf, global.acc, global.alpha,
                                              n, ledger, seed.derive({1}));
  if (ledger.spent() > ledger.total()) throw ledger_violation("budget exceeded");

  std::vector<std::uint64_t> counts(p, 0);
  for (const auto& a : ledger.log())
    for (Node v : a.nodes) counts[v] += a.samples;

  return ActiveResult{.tree = TreeTopology(p, refined.edges),
                      .trace = std::move(global.trace),
                      .alpha = global.alpha,
                      .rho_hat = global.rho_hat,
                      .confidence = std::move(conf),
                      .node_scalar_counts = std::move(counts),
                      .global_vector_samples = global.vector_samples,
                      .refinement_samples = refined.subvector_samples,
                      .ledger = std::move(ledger)};
}

/// Passive SCL baseline: all n * p scalars spent on n full vectors up front.
template <SamplingOracle O>
LearnedTree passive_scl(O& oracle, std::uint64_t n, RngSeed seed, BudgetLedger* ledger = nullptr) {
  const std::size_t p = oracle.num_nodes();
  BudgetLedger local(n, p);
  BudgetLedger& book = ledger ? *ledger : local;
  const auto nodes = all_nodes(p);
  CorrelationAccumulator acc(p);
  acc.accumulate(book.acquire(oracle, "passive", nodes, n, seed));
  return scl_mst(acc, nodes);
}

}  // namespace lathe
