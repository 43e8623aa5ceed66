#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace bnmc {
namespace {

using testing::bind;
using testing::query;

TEST(BoundedVariance, SingleRootStopsAtThreshold) {
  const auto net = testing::single_root();
  const std::vector<Query> q{query(net, "X", 1)};
  const auto r = run_bounded_variance(net, q, net.empty_assignment(), {0.05, 0.05}, StreamSeeds::derive(1, 1));
  EXPECT_EQ(r.iterations, 4452u);
  EXPECT_EQ(r.evidence.count, 4452u);
  EXPECT_EQ(r.queries[0].stream.count, 4452u);
  EXPECT_EQ(r.queries[0].stream.phi, 0.3);
  EXPECT_EQ(r.evidence.phi, 1.0);
  EXPECT_EQ(r.queries[0].posterior, 0.3);
  EXPECT_TRUE(r.queries[0].reliable);
  EXPECT_EQ(r.queries[0].stream.status, StreamStatus::completed);
  EXPECT_EQ(r.queries[0].stream.completion, 1.0);
  EXPECT_LE(r.queries[0].stream.delta, 0.05);
}

TEST(BoundedVariance, ChainCoverage) {
  const auto net = testing::chain();
  const auto evidence = bind(net, {{"B", 1}});
  const std::vector<Query> q{query(net, "A", 1), query(net, "A", 0)};
  const double exact[] = {0.27 / 0.41, 0.14 / 0.41};
  int misses = 0, completed = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(seed, 2));
    for (std::size_t i = 0; i < 2; ++i) {
      ASSERT_TRUE(r.queries[i].reliable);
      ++completed;
      misses += within_relative_error(r.queries[i].posterior, exact[i], 0.1) ? 0 : 1;
    }
  }
  // at most delta + 3 standard deviations of the binomial
  EXPECT_LE(misses / double(completed), 0.05 + 3 * std::sqrt(0.05 * 0.95 / completed));
}

TEST(BoundedVariance, JointEstimateIsUnbiased) {
  // G = 1 given F = 1: the query stream clamps G and F, so its weight depends on the sampled H
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "G", 1)};
  const double exact = marginal(net, bind(net, {{"G", 1}, {"F", 1}}));
  const int runs = 1000;
  double sum = 0.0, sq = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(seed, 1));
    ASSERT_EQ(r.queries[0].stream.status, StreamStatus::completed);
    const double phi = r.queries[0].stream.phi;
    sum += phi;
    sq += phi * phi;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sq / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, exact, 4 * se);
}

TEST(BoundedVariance, StratifiedCoverage) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 1), query(net, "H", 2)};
  const double exact[] = {0.6, 0.3, 0.1};
  BvOptions options;
  options.stratification = StratificationPlan::uniform(3);
  int misses = 0, completed = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(seed, 3), options);
    for (std::size_t i = 0; i < 3; ++i) {
      if (!r.queries[i].reliable) {
        continue;
      }
      ++completed;
      misses += within_relative_error(r.queries[i].posterior, exact[i], 0.1) ? 0 : 1;
    }
  }
  ASSERT_GT(completed, 300);
  EXPECT_LE(misses / double(completed), 0.05 + 3 * std::sqrt(0.05 * 0.95 / completed));
}

TEST(BoundedVariance, ZetaWithinUnitInterval) {
  RandomStream rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = BeliefNetwork::validate(random_network({8, 3, 2, 3, 1.0, 0.02}, rng));
    const auto cases = generate_cases(net, 1, {0.2, 0.5}, rng);
    BvOptions options;
    options.max_iterations = 2000;
    std::size_t calls = 0;
    options.observer = [&](std::size_t stream, double zeta) {
      EXPECT_LE(stream, 1u);
      EXPECT_GE(zeta, 0.0);
      EXPECT_LE(zeta, 1.0);
      ++calls;
    };
    const std::vector<Query> q{cases[0].query};
    const auto r = run_bounded_variance(net, q, cases[0].evidence, {0.1, 0.05}, StreamSeeds::derive(trial, 1), options);
    EXPECT_EQ(calls, r.evidence.count + r.queries[0].stream.count);
  }
}

TEST(BoundedVariance, SameSeedsSameResult) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 1), query(net, "H", 2)};
  const auto a = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(9, 3));
  const auto b = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(9, 3));
  const auto c = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(10, 3));
  ASSERT_EQ(a.queries.size(), 3u);
  bool differs = false;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.queries[i].posterior, b.queries[i].posterior);
    EXPECT_EQ(a.queries[i].stream.count, b.queries[i].stream.count);
    differs = differs || a.queries[i].posterior != c.queries[i].posterior;
  }
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_TRUE(differs);
}

TEST(BoundedVariance, InstanceAccounting) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 2)};
  const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(2, 2));
  std::uint64_t draws = r.evidence.count;
  for (const auto& report : r.queries) {
    draws += report.stream.count;
    EXPECT_LE(report.stream.count, r.iterations);
  }
  EXPECT_EQ(r.instances_generated, draws);
  EXPECT_EQ(r.instances_rescored, 0u);
  EXPECT_LE(r.evidence.count, r.iterations);
}

TEST(BoundedVariance, RescoreKeepsAccuracyAndAccounts) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "G", 1), query(net, "H", 0)};
  const auto g1 = posterior(net, bind(net, {{"G", 1}}), evidence).posterior;
  BvOptions options;
  options.rescore = true;
  int misses = 0;
  std::uint64_t rescored = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(seed, 2), options);
    misses += within_relative_error(r.queries[0].posterior, g1, 0.1) ? 0 : 1;
    misses += within_relative_error(r.queries[1].posterior, 0.6, 0.1) ? 0 : 1;
    std::uint64_t draws = r.evidence.count + r.queries[0].stream.count + r.queries[1].stream.count;
    EXPECT_EQ(r.instances_generated + r.instances_rescored, draws);
    rescored += r.instances_rescored;
  }
  EXPECT_GT(rescored, 0u);  // G is a root: reuse is a pure rescore
  EXPECT_LE(misses / 400.0, 0.05 + 3 * std::sqrt(0.05 * 0.95 / 400));
}

TEST(BoundedVariance, StratifiedDrawsOneQueryPerIteration) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 1), query(net, "H", 2)};
  BvOptions options;
  options.stratification = StratificationPlan::uniform(3, StratificationMode::proportional, 200);
  const auto r = run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(4, 3), options);
  std::uint64_t query_draws = 0;
  for (const auto& report : r.queries) {
    query_draws += report.stream.count;
  }
  EXPECT_LE(query_draws, r.iterations);
  const double exact[] = {0.6, 0.3, 0.1};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(r.queries[i].reliable);
    EXPECT_NEAR(r.queries[i].posterior, exact[i], 0.3 * exact[i]);
  }
  options.stratification = StratificationPlan::uniform(2);
  EXPECT_THROW(run_bounded_variance(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(4, 3), options), Error);
}

TEST(BoundedVariance, ZeroProbabilityEvidenceIsIncomplete) {
  // Pr[B = 1] = 0 although B = 1 has a nonzero upper bound
  const auto net = BeliefNetwork::validate({{
      testing::binary("A", {}, {1.0, 0.0}),
      testing::binary("B", {"A"}, {1.0, 0.0, 0.0, 1.0}),
      testing::binary("C", {}, {0.5, 0.5}),
  }});
  BvOptions options;
  options.max_iterations = 500;
  const std::vector<Query> q{query(net, "C", 1)};
  const auto r =
      run_bounded_variance(net, q, bind(net, {{"B", 1}}), {0.1, 0.05}, StreamSeeds::derive(1, 1), options);
  EXPECT_EQ(r.iterations, 500u);
  EXPECT_EQ(r.evidence.status, StreamStatus::incomplete);
  EXPECT_EQ(r.evidence.phi, 0.0);
  EXPECT_TRUE(std::isnan(r.queries[0].posterior));
  EXPECT_FALSE(r.queries[0].reliable);
  EXPECT_EQ(r.evidence.delta, 1.0);
}

TEST(BoundedVariance, UnreachableStreams) {
  const auto net = BeliefNetwork::validate({{
      testing::binary("A", {}, {0.5, 0.5}),
      testing::binary("B", {"A"}, {1.0, 0.0, 1.0, 0.0}),
      testing::binary("C", {"A"}, {0.4, 0.6, 0.8, 0.2}),
  }});
  const std::vector<Query> q{query(net, "B", 1), query(net, "A", 1)};
  const auto r = run_bounded_variance(net, q, bind(net, {{"C", 1}}), {0.1, 0.05}, StreamSeeds::derive(3, 2));
  EXPECT_EQ(r.queries[0].stream.status, StreamStatus::unreachable);
  EXPECT_EQ(r.queries[0].posterior, 0.0);
  EXPECT_TRUE(r.queries[0].reliable);
  EXPECT_EQ(r.queries[0].stream.count, 0u);
  EXPECT_TRUE(r.queries[1].reliable);
  EXPECT_NEAR(r.queries[1].posterior, 0.1 / 0.4, 0.25 * 0.1 / 0.4);

  const std::vector<Query> q2{query(net, "A", 1)};
  const auto none = run_bounded_variance(net, q2, bind(net, {{"B", 1}}), {0.1, 0.05}, StreamSeeds::derive(3, 1));
  EXPECT_EQ(none.evidence.status, StreamStatus::unreachable);
  EXPECT_TRUE(std::isnan(none.queries[0].posterior));
  EXPECT_EQ(none.iterations, 0u);
}

TEST(BoundedVariance, CapReportsPartialProgress) {
  const auto net = testing::chain();
  BvOptions options;
  options.max_iterations = 100;
  const std::vector<Query> q{query(net, "A", 1)};
  const auto r = run_bounded_variance(net, q, bind(net, {{"B", 1}}), {0.05, 0.05}, StreamSeeds::derive(1, 1), options);
  EXPECT_EQ(r.iterations, 100u);
  EXPECT_EQ(r.queries[0].stream.status, StreamStatus::incomplete);
  EXPECT_FALSE(r.queries[0].reliable);
  EXPECT_GT(r.queries[0].stream.completion, 0.0);
  EXPECT_LT(r.queries[0].stream.completion, 1.0);
  EXPECT_NEAR(r.queries[0].stream.completion, r.queries[0].stream.sum / r.threshold, 1e-15);
  EXPECT_NEAR(r.queries[0].stream.delta, invert_failure(r.queries[0].stream.sum, 0.05), 1e-15);
}

TEST(BoundedVariance, RankStopEndsEarly) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 1), query(net, "H", 2)};
  BvOptions options;
  options.rank_stop = RankStopRule{0.05, 1};
  const auto ranked = run_bounded_variance(net, q, evidence, {0.05, 0.05}, StreamSeeds::derive(5, 3), options);
  const auto full = run_bounded_variance(net, q, evidence, {0.05, 0.05}, StreamSeeds::derive(5, 3));
  ASSERT_TRUE(ranked.rank.has_value());
  EXPECT_TRUE(ranked.rank->decided);
  EXPECT_EQ(ranked.rank->leader, 0u);
  EXPECT_LT(ranked.iterations, full.iterations);
  EXPECT_FALSE(full.rank.has_value());
  options.rank_stop = RankStopRule{0.05, 3};
  EXPECT_THROW(run_bounded_variance(net, q, evidence, {0.05, 0.05}, StreamSeeds::derive(5, 3), options), Error);
}

TEST(BoundedVariance, InvalidQueries) {
  const auto net = testing::chain();
  const std::vector<Query> none;
  EXPECT_THROW(run_bounded_variance(net, none, net.empty_assignment(), {}, StreamSeeds::derive(1, 0)), Error);
  const std::vector<Query> on_evidence{query(net, "B", 1)};
  EXPECT_THROW(run_bounded_variance(net, on_evidence, bind(net, {{"B", 1}}), {}, StreamSeeds::derive(1, 1)), Error);
  const std::vector<Query> bad_state{{0, 5}};
  EXPECT_THROW(run_bounded_variance(net, bad_state, net.empty_assignment(), {}, StreamSeeds::derive(1, 1)), Error);
  const std::vector<Query> ok{query(net, "A", 1)};
  EXPECT_THROW(run_bounded_variance(net, ok, net.empty_assignment(), {0.0, 0.05}, StreamSeeds::derive(1, 1)), Error);
}

}  // namespace
}  // namespace bnmc
