#include <gtest/gtest.h>

#include <map>

#include "lathe/active_lathe.hpp"

using namespace lathe;

namespace {

// Blocks whose pairwise product sums are exactly `constant` per call: the
// constant all-(+1) rows add 1 to every pair, the remaining rows repeat a
// 4-row Hadamard pattern that adds 0 to every pair (p <= 3).
class ScriptedOracle {
 public:
  ScriptedOracle(std::size_t p, std::vector<std::size_t> constants) : p_(p), constants_(std::move(constants)) {}
  std::size_t num_nodes() const { return p_; }
  SampleBlock draw(std::span<const Node> nodes, std::size_t m, RngSeed) {
    const std::size_t c = constants_.at(calls_++);
    EXPECT_EQ((m - c) % 4, 0u);
    std::vector<std::int8_t> data;
    for (Node v : nodes) {
      const unsigned code = v + 1;
      for (std::size_t s = 0; s < m; ++s) {
        if (s < c) {
          data.push_back(1);
        } else {
          const unsigned row = static_cast<unsigned>((s - c) % 4);
          data.push_back(std::popcount(row & code) % 2 ? -1 : 1);
        }
      }
    }
    return SampleBlock(std::vector<Node>(nodes.begin(), nodes.end()), m, std::move(data));
  }
  std::size_t calls() const { return calls_; }

 private:
  std::size_t p_;
  std::vector<std::size_t> constants_;
  std::size_t calls_ = 0;
};

static_assert(SamplingOracle<ScriptedOracle>);
static_assert(SamplingOracle<IsingOracle>);

SampleBlock pair_block(Node u, Node v, std::size_t m, std::int64_t sum) {
  const auto agree = static_cast<std::size_t>((static_cast<std::int64_t>(m) + sum) / 2);
  std::vector<std::int8_t> data(2 * m, 1);
  for (std::size_t s = agree; s < m; ++s) data[m + s] = -1;
  return SampleBlock({u, v}, m, std::move(data));
}

// Accumulator with correlation c[u][v] (per mille, 1000 samples per pair).
CorrelationAccumulator with_correlations(std::size_t p, const std::map<std::pair<Node, Node>, int>& c) {
  CorrelationAccumulator acc(p);
  for (const auto& [k, permille] : c) acc.accumulate(pair_block(k.first, k.second, 1000, permille));
  return acc;
}

LearnedTree tree_of(std::size_t p, std::vector<Edge> edges) {
  LearnedTree t;
  t.nodes.resize(p);
  std::iota(t.nodes.begin(), t.nodes.end(), Node{0});
  t.edges = std::move(edges);
  return t;
}

}  // namespace

TEST(AlphaTable, Rows) {
  EXPECT_EQ(alpha_lookup(0.9).permille, 800);
  EXPECT_EQ(alpha_lookup(0.76).permille, 800);
  EXPECT_EQ(alpha_lookup(0.7599).permille, 850);
  EXPECT_EQ(alpha_lookup(0.53).permille, 850);
  EXPECT_EQ(alpha_lookup(0.34).permille, 900);
  EXPECT_EQ(alpha_lookup(0.16).permille, 950);
  EXPECT_EQ(alpha_lookup(0.07).permille, 985);
  EXPECT_EQ(alpha_lookup(0.02).permille, 995);
  EXPECT_EQ(alpha_lookup(0.019).permille, 1000);
  EXPECT_EQ(alpha_lookup(-0.1).permille, 1000);
  EXPECT_EQ(alpha_lookup(0.0).permille, 1000);
  EXPECT_EQ(alpha_lookup(1.0).permille, 800);
  EXPECT_EQ(alpha_lookup(1.5).permille, 800);
}

TEST(AlphaTable, NonIncreasingAndInPsi) {
  int prev = 1000;
  for (int i = 1; i < 1000; ++i) {
    const int a = alpha_lookup(i / 1000.0).permille;
    EXPECT_LE(a, prev);
    EXPECT_NE(std::find(kAlphaLevels.begin(), kAlphaLevels.end(), AlphaLevel{a}), kAlphaLevels.end());
    prev = a;
  }
}

TEST(AlphaLevelType, ExactFloors) {
  EXPECT_EQ(AlphaLevel{950}.floor_times(1000), 950u);
  EXPECT_EQ(AlphaLevel{800}.floor_times(7), 5u);
  EXPECT_EQ(AlphaLevel{995}.floor_times(999), 994u);
}

TEST(EstimateRho, MeanOfEdges) {
  const auto acc = with_correlations(3, {{{0, 1}, 600}, {{1, 2}, 800}, {{0, 2}, 500}});
  EXPECT_NEAR(estimate_rho(tree_of(3, {{0, 1}, {1, 2}}), acc), 0.7, 1e-15);
  const IsingTreeModel m(build_chain(100), 0.9);
  CorrelationAccumulator big(100);
  big.accumulate(sample_vectors(m, 10000, RngSeed(1)));
  EXPECT_NEAR(estimate_rho(tree_of(100, m.topology().edges()), big), 0.9, 0.01);
}

TEST(Ledger, ChargesAndRejectsOverdraw) {
  BudgetLedger ledger(10, 4);
  const std::vector<Node> two = {0, 1};
  ledger.charge("a", two, 15);
  EXPECT_EQ(ledger.spent(), 30u);
  EXPECT_EQ(ledger.remaining(), 10u);
  EXPECT_THROW(ledger.charge("b", two, 6), ledger_violation);
  EXPECT_EQ(ledger.spent(), 30u);
  ledger.charge("c", two, 5);
  EXPECT_EQ(ledger.remaining(), 0u);
  ASSERT_EQ(ledger.log().size(), 2u);
  EXPECT_EQ(ledger.log()[1].scalars(), 10u);
}

TEST(GlobalPhase, ScriptedTraceStopsAtPointNineFive) {
  // rho_hat: 280/800 = 0.35 -> 0.9; 280/900 = 0.311 -> 0.95; 282/950 -> 0.95, stop.
  ScriptedOracle oracle(3, {280, 0, 2});
  BudgetLedger ledger(1000, 3);
  const auto g = global_phase(oracle, 1000, ledger, RngSeed(1));
  ASSERT_EQ(g.trace.size(), 3u);
  EXPECT_EQ(g.trace[0].alpha.permille, 800);
  EXPECT_EQ(g.trace[1].alpha.permille, 900);
  EXPECT_EQ(g.trace[2].alpha.permille, 950);
  EXPECT_NEAR(g.trace[0].rho_hat, 0.35, 1e-15);
  EXPECT_EQ(g.alpha.permille, 950);
  EXPECT_EQ(g.vector_samples, 950u);
  EXPECT_EQ(oracle.calls(), 3u);
  EXPECT_EQ(ledger.spent(), 950u * 3);
}

TEST(GlobalPhase, HighRhoSingleIteration) {
  const IsingTreeModel m(build_chain(50), 0.9);
  IsingOracle oracle(m);
  BudgetLedger ledger(2000, 50);
  const auto g = global_phase(oracle, 2000, ledger, RngSeed(3));
  EXPECT_EQ(g.trace.size(), 1u);
  EXPECT_EQ(g.alpha.permille, 800);
  EXPECT_EQ(g.vector_samples, 1600u);
}

TEST(GlobalPhase, TinyRhoSpendsEverything) {
  const IsingTreeModel m(build_chain(3), 0.001);
  IsingOracle oracle(m);
  int reached_one = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    BudgetLedger ledger(100000, 3);
    const auto g = global_phase(oracle, 100000, ledger, RngSeed(s));
    EXPECT_LE(g.trace.size(), 7u);
    if (g.alpha.permille == 1000) {
      ++reached_one;
      EXPECT_EQ(ledger.remaining(), 0u);
    }
  }
  EXPECT_GT(reached_one, 0);
}

TEST(GlobalPhase, RejectsTooSmallN) {
  const IsingTreeModel m(build_chain(4), 0.5);
  IsingOracle oracle(m);
  BudgetLedger ledger(1, 4);
  EXPECT_THROW(global_phase(oracle, 1, ledger, RngSeed(1)), invalid_argument);
}

TEST(ConfidentEvent, Cases) {
  // Exact correlations at rho = 0.9.
  auto acc = with_correlations(3, {{{0, 1}, 900}, {{1, 2}, 900}, {{0, 2}, 810}});
  EXPECT_TRUE(confident_event(acc, 0, 1, 2, 0.9));
  auto flat = with_correlations(3, {{{0, 1}, 500}, {{1, 2}, 500}, {{0, 2}, 500}});
  EXPECT_FALSE(confident_event(flat, 0, 1, 2, 0.5));
  auto zero = with_correlations(3, {{{0, 1}, 500}, {{1, 2}, 400}, {{0, 2}, 0}});
  EXPECT_TRUE(confident_event(zero, 0, 1, 2, 0.5));
  CorrelationAccumulator missing(3);
  EXPECT_THROW(confident_event(missing, 0, 1, 2, 0.5), no_data);
}

TEST(ConfidentEvent, SymmetricInOuterNodes) {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    auto r = [&] { return static_cast<int>(uniform_below(rng, 1001)) & ~1; };
    auto acc = with_correlations(3, {{{0, 1}, r()}, {{1, 2}, r()}, {{0, 2}, r()}});
    const double rho = uniform01(rng);
    EXPECT_EQ(confident_event(acc, 0, 1, 2, rho), confident_event(acc, 2, 1, 0, rho));
  }
}

TEST(Classify, ChainWithOneFailingTriple) {
  const auto acc = with_correlations(4, {{{0, 1}, 500}, {{1, 2}, 500}, {{2, 3}, 500},
                                         {{0, 2}, 450}, {{1, 3}, 100}, {{0, 3}, 0}});
  const auto c = classify_confidence(tree_of(4, {{0, 1}, {1, 2}, {2, 3}}), acc, 0.5);
  EXPECT_EQ(c.unconfident_edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(c.confident_edges, (std::vector<Edge>{{2, 3}}));
  EXPECT_EQ(c.unconfident_nodes, (std::vector<Node>{0, 1, 2}));
  EXPECT_EQ(c.p_tilde(), 3u);
}

TEST(Classify, StarLeavesThirdEdgeConfident) {
  const auto acc = with_correlations(4, {{{0, 1}, 600}, {{0, 2}, 600}, {{0, 3}, 600},
                                         {{1, 2}, 580}, {{1, 3}, 100}, {{2, 3}, 100}});
  const auto c = classify_confidence(tree_of(4, {{0, 1}, {0, 2}, {0, 3}}), acc, 0.6);
  EXPECT_EQ(c.unconfident_edges, (std::vector<Edge>{{0, 1}, {0, 2}}));
  EXPECT_EQ(c.confident_edges, (std::vector<Edge>{{0, 3}}));
  EXPECT_EQ(c.unconfident_nodes, (std::vector<Node>{0, 1, 2}));
}

TEST(Classify, AllPassAndPartitionInvariants) {
  const IsingTreeModel m(build_random_tree(30, RngSeed(8)), 0.8);
  for (std::uint64_t s = 0; s < 20; ++s) {
    CorrelationAccumulator acc(30);
    acc.accumulate(sample_vectors(m, 60 + 40 * s, RngSeed(s)));
    const auto t = scl_mst(acc);
    const auto c = classify_confidence(t, acc, estimate_rho(t, acc));
    EXPECT_EQ(c.confident_edges.size() + c.unconfident_edges.size(), 29u);
    std::vector<Node> ends;
    for (const Edge& e : c.unconfident_edges) {
      ends.push_back(e.u);
      ends.push_back(e.v);
    }
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    EXPECT_EQ(ends, c.unconfident_nodes);
    EXPECT_NE(c.p_tilde(), 1u);
  }
  CorrelationAccumulator exact(30);
  exact.accumulate(sample_vectors(m, 200000, RngSeed(99)));
  const auto t = scl_mst(exact);
  EXPECT_EQ(classify_confidence(t, exact, 0.8).p_tilde(), 0u);
}

TEST(Refinement, NoUnconfidentNodesIsIdentity) {
  const IsingTreeModel m(build_chain(8), 0.8);
  IsingOracle oracle(m);
  BudgetLedger ledger(100, 8);
  auto g = global_phase(oracle, 100, ledger, RngSeed(2));
  const auto before = ledger.spent();
  const auto r = local_refinement(oracle, g.tree, ConfidenceSets{g.tree.sorted_edges(), {}, {}}, g.acc,
                                  g.alpha, 100, ledger, RngSeed(3));
  EXPECT_EQ(r.edges, g.tree.sorted_edges());
  EXPECT_EQ(r.subvector_samples, 0u);
  EXPECT_EQ(ledger.spent(), before);
}

TEST(Refinement, SingleUnconfidentNodeIsALogicError) {
  const IsingTreeModel m(build_chain(4), 0.8);
  IsingOracle oracle(m);
  BudgetLedger ledger(100, 4);
  auto g = global_phase(oracle, 100, ledger, RngSeed(2));
  ConfidenceSets c{g.tree.sorted_edges(), {}, {2}};
  EXPECT_THROW(local_refinement(oracle, g.tree, c, g.acc, AlphaLevel{800}, 100, ledger, RngSeed(3)),
               std::logic_error);
}

TEST(Refinement, ThreeNodeComponentSampleCounts) {
  const std::size_t p = 100;
  const std::uint64_t n = 1000;
  const IsingTreeModel m(build_chain(p), 0.9);
  IsingOracle oracle(m);
  // Mark the first two adjacent learned edges unconfident, whatever the tree is.
  ConfidenceClassifier stub = [](const LearnedTree& t, const CorrelationAccumulator&, double) {
    const auto edges = t.sorted_edges();
    for (const Edge& a : edges)
      for (const Edge& b : edges)
        if (a < b && (b.touches(a.u) || b.touches(a.v))) {
          ConfidenceSets c;
          c.unconfident_edges = {a, b};
          for (const Edge& e : edges)
            if (e != a && e != b) c.confident_edges.push_back(e);
          std::vector<Node> nodes = {a.u, a.v, b.u, b.v};
          std::sort(nodes.begin(), nodes.end());
          nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
          c.unconfident_nodes = nodes;
          return c;
        }
    return ConfidenceSets{};
  };
  const auto r = active_lathe(oracle, p, n, RngSeed(4), stub);
  ASSERT_EQ(r.alpha.permille, 800);
  EXPECT_EQ(r.refinement_samples, 6666u);
  for (Node v : r.confidence.unconfident_nodes) {
    EXPECT_EQ(r.node_scalar_counts[v], 7466u);
    EXPECT_GE(r.node_scalar_counts[v], 1400u);
  }
  EXPECT_LE(r.ledger.spent(), r.ledger.total());
  EXPECT_EQ(r.ledger.total() - r.ledger.spent(), 2u);  // floor leftover, <= p~
}

TEST(Refinement, RelearnsWrongEdgeInsideComponent) {
  // Global data wrongly prefers {0,2}; refinement sees true chain data for {0,1,2}.
  const IsingTreeModel m(build_chain(4), 0.6);
  IsingOracle oracle(m);
  auto acc = with_correlations(4, {{{0, 1}, 300}, {{1, 2}, 500}, {{0, 2}, 520},
                                   {{2, 3}, 600}, {{1, 3}, 200}, {{0, 3}, 100}});
  const auto t = scl_mst(acc);
  ASSERT_EQ(t.sorted_edges(), (std::vector<Edge>{{0, 2}, {1, 2}, {2, 3}}));
  ConfidenceSets c{{{2, 3}}, {{0, 2}, {1, 2}}, {0, 1, 2}};
  BudgetLedger ledger(100000, 4);
  ledger.charge("global", std::vector<Node>{0, 1, 2, 3}, 80000);
  const auto r = local_refinement(oracle, t, c, acc, AlphaLevel{800}, 100000, ledger, RngSeed(6));
  EXPECT_EQ(r.edges, m.topology().edges());
  EXPECT_EQ(r.components.size(), 1u);
}

TEST(Pipeline, AllPassStubEqualsGlobalScl) {
  const IsingTreeModel m(build_random_tree(40, RngSeed(12)), 0.5);
  for (std::uint64_t s = 0; s < 10; ++s) {
    IsingOracle oracle(m);
    const ConfidenceClassifier all_pass = [](const LearnedTree& t, const CorrelationAccumulator&, double) {
      return ConfidenceSets{t.sorted_edges(), {}, {}};
    };
    const auto r = active_lathe(oracle, 40, 50, RngSeed(s), all_pass);
    BudgetLedger ledger(50, 40);
    const auto g = global_phase(oracle, 50, ledger, RngSeed(s).derive({0}));
    EXPECT_EQ(r.tree.edges(), g.tree.sorted_edges());
  }
}

TEST(Pipeline, BudgetAndSampleFloorAcrossTrials) {
  const std::size_t p = 200;
  const IsingTreeModel m(build_chain(p), 0.9);
  ASSERT_TRUE(m.topology().satisfies_degree_assumption());
  const std::size_t d = m.topology().max_degree();
  int refined = 0;
  for (std::uint64_t s = 0; s < 150; ++s) {
    const std::uint64_t n = 40 + s % 5 * 30;
    IsingOracle oracle(m);
    const auto r = active_lathe(oracle, p, n, RngSeed(77, s));
    EXPECT_LE(r.ledger.spent(), n * p);
    EXPECT_LE(r.trace.size(), 7u);
    const std::size_t pt = r.confidence.p_tilde();
    if (pt > 0 && pt < 26 * d) {
      ++refined;
      for (Node v : r.confidence.unconfident_nodes)
        EXPECT_GE(static_cast<double>(r.node_scalar_counts[v]), (3.0 - 2.0 * r.alpha.value()) * n);
    }
  }
  EXPECT_GT(refined, 0);
}

TEST(Pipeline, Deterministic) {
  const IsingTreeModel m(build_hmm(40), 0.7);
  IsingOracle oracle(m);
  const auto a = active_lathe(oracle, 40, 80, RngSeed(9));
  const auto b = active_lathe(oracle, 40, 80, RngSeed(9));
  EXPECT_EQ(a.tree, b.tree);
  EXPECT_EQ(a.node_scalar_counts, b.node_scalar_counts);
}

TEST(Passive, SpendsWholeBudget) {
  const IsingTreeModel m(build_chain(20), 0.5);
  IsingOracle oracle(m);
  BudgetLedger ledger(300, 20);
  const auto t = passive_scl(oracle, 300, RngSeed(1), &ledger);
  EXPECT_EQ(ledger.spent(), ledger.total());
  EXPECT_EQ(t.edges.size(), 19u);
}
