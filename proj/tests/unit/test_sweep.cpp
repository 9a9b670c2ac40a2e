#include <gtest/gtest.h>

#include <random>

#include "coinfect/sweep.hpp"
#include "support/sampling.hpp"

using namespace coinfect;
using coinfect::testing::reference_rates;

namespace {

ModelParams chain_rates() {
  auto m = reference_rates();
  m.eta2 = 0.03;
  return m;
}

TransitionDiagram synthetic(std::vector<Label> labels, std::vector<double> y0) {
  TransitionDiagram d;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d.k_values.push_back(1.0 + i);
    d.labels.push_back({labels[i]});
    d.points.push_back(StatePoint(y0[i], 0, 0, 0));
  }
  return d;
}

}  // namespace

TEST(Gamma, Edges) {
  EXPECT_TRUE(is_gamma_edge(Label::E2, Label::E3));
  EXPECT_TRUE(is_gamma_edge(Label::E8, Label::E6));
  EXPECT_TRUE(is_gamma_edge(Label::E7, Label::E5));
  EXPECT_FALSE(is_gamma_edge(Label::E2, Label::E6));
  EXPECT_FALSE(is_gamma_edge(Label::E6, Label::E5));
  EXPECT_FALSE(is_gamma_edge(Label::E1, Label::E2));
}

TEST(VerifyGammaEdges, Synthetic) {
  const auto bad = verify_gamma_edges(synthetic({Label::E2, Label::E6}, {1, 2}));
  EXPECT_FALSE(bad.ok);
  ASSERT_TRUE(bad.first_violation.has_value());
  EXPECT_EQ(bad.first_violation->first, Label::E2);
  EXPECT_EQ(bad.first_violation->second, Label::E6);
  EXPECT_TRUE(verify_gamma_edges(synthetic({Label::E5, Label::E5}, {1, 1})).ok);
  EXPECT_TRUE(verify_gamma_edges(synthetic({Label::E2, Label::E3, Label::E6}, {1, 2, 3})).ok);
}

TEST(Sweep, FullChainScenario) {
  const auto d = sweep_carrying_capacity(chain_rates(), log_grid(1, 200, 400));
  const std::vector<Label> chain = {Label::E2, Label::E3, Label::E6, Label::E8, Label::E7, Label::E5};
  EXPECT_EQ(d.runs(), chain);
  EXPECT_EQ(d.scenario, Scenario::III);
  EXPECT_TRUE(verify_gamma_edges(d).ok);
  EXPECT_TRUE(monotonicity_report(d).ok);
  ASSERT_EQ(d.thresholds.size(), 5u);
  // Analytic thresholds: S2 = sigma1, S2 = sigma1', S6 = S8, S7 = S8, S7 = sigma3.
  const double b = 4, g1 = 0.9, g2 = 0.25 * 0.2 - 0.03 * 3, S8 = (0.4 - 0.03) / (0.1 - 0.015);
  const std::vector<double> expected = {2.0 / 0.75, 2.0 / (0.75 - 3 * 0.1 / 1.6), S8 * b * 0.4 / g1,
                                        -S8 * b * 0.03 / g2, -5 * b * 0.03 / g2};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(d.thresholds[i].k_star / expected[i] - 1.0, 0.0, 1e-6) << i;
    EXPECT_GE(d.thresholds[i].labels_at_k_star.size(), 2u) << i;
    const double gap = coincidence_gap(chain_rates(), refine_threshold(chain_rates(), d.thresholds[i], 1e-14).k_star,
                                       d.thresholds[i].before, d.thresholds[i].after);
    EXPECT_LE(gap, 1e-7) << i;
  }
}

TEST(Sweep, ScenarioTwo) {
  auto m = reference_rates();
  m.eta2 = 0.01;
  const auto d = sweep_carrying_capacity(m, log_grid(1, 1000, 200));
  EXPECT_EQ(d.scenario, Scenario::II);
  EXPECT_EQ(d.runs().back(), Label::E8);
  // Plateau: Y0 is constant on the final run.
  const double last = d.points.back()[0];
  EXPECT_NEAR(last, (0.4 - 0.01) / (0.1 - 0.005), 1e-12);
}

TEST(Sweep, ScenarioOneAndBelowFirstThreshold) {
  auto m = reference_rates();
  m.alpha3 = 0.05;  // sigma3 = 20, strain 1 never displaced
  m.eta1 = 0.01;
  const auto d = sweep_carrying_capacity(m, log_grid(1, 1e4, 100));
  EXPECT_EQ(d.runs(), (std::vector<Label>{Label::E2, Label::E3}));
  EXPECT_EQ(d.scenario, Scenario::I);

  const auto low = sweep_carrying_capacity(reference_rates(), log_grid(1, 2.5, 20));
  EXPECT_EQ(low.runs(), std::vector<Label>{Label::E2});
  EXPECT_EQ(low.scenario, Scenario::Unknown);
  EXPECT_TRUE(low.thresholds.empty());

  // Starting past the first threshold still counts as the same chain.
  const auto late = sweep_carrying_capacity(m, log_grid(10, 1e4, 50));
  EXPECT_EQ(late.runs(), std::vector<Label>{Label::E3});
  EXPECT_EQ(late.scenario, Scenario::I);
}

TEST(Sweep, ReferenceRatesSkipE8) {
  // Here E6 hands over to E5 directly when S6 reaches sigma3; that pair is
  // not an edge of the path, so the check reports it.
  const auto d = sweep_carrying_capacity(reference_rates(), log_grid(1, 200, 400));
  EXPECT_EQ(d.runs(), (std::vector<Label>{Label::E2, Label::E3, Label::E6, Label::E5}));
  const auto g = verify_gamma_edges(d);
  EXPECT_FALSE(g.ok);
  EXPECT_EQ(g.first_violation->first, Label::E6);
  EXPECT_EQ(g.first_violation->second, Label::E5);
  EXPECT_EQ(d.scenario, Scenario::Unknown);
  EXPECT_TRUE(monotonicity_report(d).ok);
  // The two points still coincide at the threshold K = 5 * 1.6 / 0.9.
  ASSERT_EQ(d.thresholds.size(), 3u);
  EXPECT_NEAR(d.thresholds[2].k_star, 5 * 1.6 / 0.9, 1e-5);
}

TEST(Sweep, RefinementFindsSkippedLabel) {
  // A grid that jumps from E2 straight into E6.
  const std::vector<double> grid = {2.0, 5.0};
  SweepOptions no;
  no.refine = false;
  EXPECT_FALSE(verify_gamma_edges(sweep_carrying_capacity(reference_rates(), grid, no)).ok);
  const auto d = sweep_carrying_capacity(reference_rates(), grid);
  EXPECT_TRUE(verify_gamma_edges(d).ok);
  EXPECT_GT(d.refined_points, 0u);
}

TEST(Sweep, ThreadCountDoesNotChangeResult) {
  SweepOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = sweep_carrying_capacity(chain_rates(), log_grid(1, 100, 150), one);
  const auto b = sweep_carrying_capacity(chain_rates(), log_grid(1, 100, 150), four);
  EXPECT_EQ(a.k_values, b.k_values);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

TEST(Sweep, InadmissibleGridPointIsReported) {
  const auto d = sweep_carrying_capacity(reference_rates(), {-1.0, 2.0, 3.0});
  ASSERT_EQ(d.failures.size(), 1u);
  EXPECT_EQ(d.failures[0].code, ErrorCode::InadmissibleGridPoint);
  EXPECT_EQ(d.size(), 2u);
}

TEST(LocateThresholds, FirstThreshold) {
  const auto ts = locate_thresholds(reference_rates(), 1, 3, 1e-8);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_NEAR(ts[0].k_star * 0.75 / 2.0 - 1.0, 0.0, 1e-8);
  try {
    locate_thresholds(reference_rates(), 10, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoTransitionInRange);
  }
}

TEST(Monotonicity, Synthetic) {
  auto d = synthetic({Label::E2, Label::E2, Label::E3, Label::E3}, {1, 1.5, 2, 2});
  EXPECT_TRUE(monotonicity_report(d).ok);
  d.points[3][0] = 2.1;
  auto r = monotonicity_report(d);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.violations[0].kind, "not_constant");
  d.points[3][0] = 1.9;
  r = monotonicity_report(d);
  EXPECT_EQ(r.violations[0].kind, "decrease");
}

TEST(Monotonicity, RandomRates) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = coinfect::testing::random_rates(rng, 0.01, 100, 1.0);
    SweepOptions o;
    o.locate = false;
    const auto d = sweep_carrying_capacity(m, log_grid(1, 1e5, 200), o);
    const auto r = monotonicity_report(d);
    EXPECT_LE(r.max_decrease, 1e-9);
  }
}
