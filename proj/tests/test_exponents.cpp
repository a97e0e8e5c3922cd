#include <gtest/gtest.h>

#include <cmath>

#include "lathe/exponents.hpp"
#include "oracles.hpp"

using namespace lathe;

TEST(Passive, FrozenValues) {
  EXPECT_NEAR(k_passive(0.5), oracle::kPassive05, 1e-12);
  EXPECT_NEAR(k_passive(0.7), oracle::kPassive07, 1e-12);
  EXPECT_NEAR(k_passive(0.8), oracle::kPassive08, 1e-12);
  EXPECT_NEAR(k_passive(0.9), oracle::kPassive09, 1e-12);
  EXPECT_NEAR(k_passive(0.5), 0.034067, 1e-6);
  EXPECT_NEAR(k_passive(0.8), 0.040822, 1e-6);
}

TEST(Passive, VanishesAtEndsAndPositiveInside) {
  EXPECT_LT(k_passive(1e-6), 1e-6);
  EXPECT_LT(k_passive(1 - 1e-9), 1e-4);
  for (double r : default_grid()) EXPECT_GT(k_passive(r), 0.0);
  EXPECT_THROW(k_passive(0.0), domain_error);
  EXPECT_THROW(k_passive(1.0), domain_error);
}

TEST(TildeTheta, RecursionMatchesClosedForm) {
  EXPECT_DOUBLE_EQ(tilde_theta(1, 0.13), 0.13);
  EXPECT_NEAR(tilde_theta(2, 0.1), 0.18, 1e-15);
  for (double theta : {0.01, 0.1, 0.25, 0.4, 0.49})
    for (int t = 1; t <= 64; ++t)
      EXPECT_NEAR(tilde_theta(t, theta), (1 - std::pow(1 - 2 * theta, t)) / 2, 1e-12);
  double prev = 0;
  for (int t = 1; t < 200; ++t) {
    const double v = tilde_theta(t, 0.05);
    EXPECT_GE(v, prev);
    EXPECT_LT(v, 0.5);
    prev = v;
  }
  EXPECT_NEAR(prev, 0.5, 1e-6);
  EXPECT_THROW(tilde_theta(0, 0.1), domain_error);
  EXPECT_THROW(tilde_theta(2, 0.5), domain_error);
}

TEST(THop, FrozenValues) {
  EXPECT_NEAR(k_t_hop(3, 0.8), oracle::kHop3_08, 1e-12);
  EXPECT_NEAR(k_t_hop(4, 0.8), oracle::kHop4_08, 1e-12);
  EXPECT_NEAR(k_t_hop(3, 0.9), oracle::kHop3_09, 1e-12);
  EXPECT_THROW(k_t_hop(1, 0.5), domain_error);
}

TEST(THop, TwoHopIsPassiveAndIncreasingInT) {
  for (double r : default_grid()) {
    EXPECT_NEAR(k_t_hop(2, r), k_passive(r), 1e-12);
    EXPECT_GT(k_t_hop(3, r), k_t_hop(2, r));
    EXPECT_GT(k_t_hop(4, r), k_t_hop(3, r));
  }
}

TEST(BinaryKl, Values) {
  EXPECT_DOUBLE_EQ(binary_kl(0.3, 0.3), 0.0);
  EXPECT_NEAR(binary_kl(0.25, 0.12), oracle::kKl025_012, 1e-14);
  EXPECT_NEAR(binary_kl(0.25, 0.12), 0.063600, 1e-5);
  EXPECT_NEAR(binary_kl(5 * 0.05 / 6, 0.05), oracle::kKlFiveSixths005, 1e-15);
  EXPECT_DOUBLE_EQ(binary_kl(0.0, 0.5), std::log(2.0));
  EXPECT_TRUE(std::isinf(binary_kl(0.5, 0.0)));
  EXPECT_GT(binary_kl(0.2, 0.3), 0.0);
}

TEST(PathModel, Marginals) {
  for (double r : {0.1, 0.5, 0.9}) {
    const ThreeNodePathModel m(r);
    double total = 0;
    for (double q : m.prob) total += q;
    EXPECT_NEAR(total, 1.0, 1e-15);
    EXPECT_NEAR(m.expect(pair_moment_function(1, 0, 0)), r, 1e-15);
    EXPECT_NEAR(m.expect(pair_moment_function(0, 0, 1)), r, 1e-15);
    EXPECT_NEAR(m.expect(pair_moment_function(0, 1, 0)), r * r, 1e-15);
  }
}

TEST(Tilt, SatisfiedConstraintIsFree) {
  const ThreeNodePathModel m(0.6);
  Dist8 minus_one;
  minus_one.fill(-1.0);
  const auto s = min_kl_tilted(m, minus_one);
  EXPECT_EQ(s.lambda, 0.0);
  EXPECT_EQ(s.divergence, 0.0);
  EXPECT_EQ(s.q, m.prob);
  // x_i x_j - c x_i x_k with c = 1/rho: E_P = rho - rho = 0.
  const auto s2 = min_kl_tilted(m, pair_moment_function(1.0, -1.0 / 0.6, 0.0));
  EXPECT_EQ(s2.divergence, 0.0);
}

TEST(Tilt, InfeasibleFamilyIsSignalled) {
  const ThreeNodePathModel m(0.6);
  Dist8 one;
  one.fill(1.0);
  EXPECT_THROW(min_kl_tilted(m, one), infeasible);
}

TEST(Tilt, KktConditions) {
  for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (const auto& sol : {k2_conf_solution(r), k2_unconf_solution(r)}) {
      double total = 0;
      for (double q : sol.q) total += q;
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_LT(std::abs(sol.residual), 1e-10);
      EXPECT_GE(sol.lambda, 0.0);
      EXPECT_LT(sol.lambda * std::abs(sol.residual), 1e-8);
      EXPECT_TRUE(sol.converged);
      EXPECT_GT(sol.divergence, 0.0);
    }
  }
}

TEST(Tilt, MatchesProjectedGradientOracle) {
  for (double r : {0.1, 0.2, 0.5, 0.6, 0.9}) {
    const ThreeNodePathModel m(r);
    const Dist8 gc = pair_moment_function(1.0, -(13.0 + 7.0 * r) / 20.0, 0.0);
    const Dist8 gu = pair_moment_function((19.0 + 21.0 * r) / 40.0, -1.0, 0.0);
    EXPECT_NEAR(min_kl_tilted(m, gc).divergence, oracle::projected_gradient_min_kl(m.prob, gc), 1e-6) << r;
    EXPECT_NEAR(min_kl_tilted(m, gu).divergence, oracle::projected_gradient_min_kl(m.prob, gu), 1e-6) << r;
  }
}

TEST(K2, ConstraintViolatedByModelOnGrid) {
  for (double r : default_grid()) {
    EXPECT_GT(r, r * r * (13 + 7 * r) / 20);
    EXPECT_LT(r * r, r * (19 + 21 * r) / 40);
    EXPECT_GT(k2_conf(r), 0.0);
    EXPECT_GT(k2_unconf(r), 0.0);
  }
}

TEST(CRho, Table) {
  EXPECT_EQ(c_rho_lookup(0.9), 1.4);
  EXPECT_EQ(c_rho_lookup(0.8), 1.4);
  EXPECT_EQ(c_rho_lookup(0.5), 1.19);
  EXPECT_EQ(c_rho_lookup(0.6), 1.29);
  EXPECT_EQ(c_rho_lookup(0.4), 1.19);
  EXPECT_EQ(c_rho_lookup(0.2), 1.08);
  EXPECT_EQ(c_rho_lookup(0.1), 1.03);
  EXPECT_EQ(c_rho_lookup(0.03), 1.01);
  EXPECT_EQ(c_rho_lookup(0.01), 1.0);
  EXPECT_THROW(c_rho_lookup(1.0), domain_error);
}

TEST(Grid, DefaultShape) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 197u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_DOUBLE_EQ(g.back(), 0.99);
  EXPECT_NE(std::find(g.begin(), g.end(), 0.8), g.end());
  EXPECT_NE(std::find(g.begin(), g.end(), 0.6), g.end());
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_THROW(make_grid(0.0, 0.5, 0.1), invalid_argument);
}

TEST(Bounds, AnchorsAndAllPass) {
  EXPECT_NEAR(0.8 * k_t_hop(3, 0.8) / k_passive(0.8), oracle::kRatio08, 1e-12);
  EXPECT_NEAR(0.8 * k_t_hop(3, 0.9) / k_passive(0.9), oracle::kRatio09, 1e-12);
  const double t = 0.05;
  EXPECT_NEAR(125 * binary_kl(5 * t / 6, t) / k_passive(0.9), oracle::kDeviationRatio09, 1e-9);
  const auto report = verify_bounds(default_grid());
  for (const auto& [name, s] : report.summary) {
    EXPECT_GT(s.points, 0u) << name;
    EXPECT_EQ(s.failures, 0u) << name << " worst margin " << s.worst_margin << " at " << s.worst_rho;
  }
  EXPECT_EQ(report.summary.size(), bound_check_names().size());
  EXPECT_TRUE(report.all_pass());
}

TEST(Bounds, MarginRequirementCanFail) {
  EXPECT_FALSE(verify_bounds(default_grid(), 10.0).all_pass());
}

TEST(Curves, PassiveShapePeaksInTheMiddle) {
  const auto c = make_curve("k-passive", default_grid());
  const auto peak = std::max_element(c.value.begin(), c.value.end()) - c.value.begin();
  EXPECT_GT(c.rho[peak], 0.55);
  EXPECT_LT(c.rho[peak], 0.85);
  EXPECT_THROW(make_curve("nope", default_grid()), invalid_argument);
}
