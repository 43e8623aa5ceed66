#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace bnmc {
namespace {

using testing::bind;
using testing::query;

TEST(AaEstimator, Upsilon) {
  EXPECT_NEAR(aa_upsilon({0.1, 0.05}), 2119.7241, 1e-4);
  EXPECT_NEAR(aa_upsilon({0.05, 0.05}), 8478.8963, 1e-4);
  EXPECT_NEAR(aa_upsilon({0.1, 0.05}, 3.0), 1.5 * aa_upsilon({0.1, 0.05}), 1e-9);
  EXPECT_THROW((void)aa_upsilon({0.1, 0.05}, 1.0), Error);
}

TEST(AaEstimator, SingleRootIsExact) {
  const auto net = testing::single_root();
  const std::vector<Query> q{query(net, "X", 1)};
  const auto r = run_aa(net, q, net.empty_assignment(), {0.05, 0.05}, StreamSeeds::derive(1, 1));
  const auto& s = r.plan.queries[0];
  // step 1 at epsilon 1/2, delta 0.05/3: threshold 82.5304
  EXPECT_EQ(s.step1_samples, 83u);
  EXPECT_EQ(s.rough_phi, 0.3);
  EXPECT_EQ(s.pairs, 1414u);
  EXPECT_EQ(s.variance_sum, 0.0);
  EXPECT_DOUBLE_EQ(s.rho_hat, 0.05 * 0.3);
  EXPECT_EQ(s.final_samples, 1414u);
  EXPECT_EQ(s.step3_draws, 1414u);
  EXPECT_EQ(s.phi, 0.3);
  EXPECT_EQ(s.status, StreamStatus::completed);
  EXPECT_EQ(s.completion, 1.0);
  EXPECT_EQ(r.plan.evidence.phi, 1.0);
  EXPECT_EQ(r.plan.evidence.final_samples, 424u);
  EXPECT_EQ(r.estimates[0].posterior, 0.3);
  EXPECT_TRUE(r.estimates[0].reliable);
}

TEST(AaEstimator, PairedVarianceIsUnbiased) {
  // omega is 0.9 w.p. 0.3 and 0.2 w.p. 0.7: variance 0.271 - 0.41^2 = 0.1029
  const auto net = testing::chain();
  const std::vector<Query> q{query(net, "A", 1)};
  const int runs = 1000;
  double sum = 0.0, sq = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    const auto r = run_aa(net, q, bind(net, {{"B", 1}}), {0.1, 0.05}, StreamSeeds::derive(seed, 1));
    const auto& e = r.plan.evidence;
    ASSERT_EQ(e.pairs_done, e.pairs);
    const double v = e.variance_sum / static_cast<double>(e.pairs);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sq / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, 0.1029, 4 * se);
}

TEST(AaEstimator, ChainCoverage) {
  const auto net = testing::chain();
  const auto evidence = bind(net, {{"B", 1}});
  const std::vector<Query> q{query(net, "A", 1), query(net, "A", 0)};
  const double exact[] = {0.27 / 0.41, 0.14 / 0.41};
  int misses = 0, completed = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = run_aa(net, q, evidence, {0.1, 0.05}, StreamSeeds::derive(seed, 2));
    for (std::size_t i = 0; i < 2; ++i) {
      ASSERT_TRUE(r.estimates[i].reliable);
      ++completed;
      misses += within_relative_error(r.estimates[i].posterior, exact[i], 0.1) ? 0 : 1;
    }
  }
  EXPECT_LE(misses / double(completed), 0.05 + 3 * std::sqrt(0.05 * 0.95 / completed));
}

TEST(AaEstimator, SizingIdentities) {
  const auto net = testing::two_hypothesis();
  const auto evidence = bind(net, {{"F", 1}});
  const std::vector<Query> q{query(net, "H", 0), query(net, "H", 2)};
  const AccuracyParams params{0.1, 0.05};
  const auto r = run_aa(net, q, evidence, params, StreamSeeds::derive(8, 2));
  const double y = aa_upsilon(params);
  for (const auto* s : {&r.plan.evidence, &r.plan.queries[0], &r.plan.queries[1]}) {
    EXPECT_EQ(s->pairs, detail::ceil_count(y * params.epsilon / s->rough_phi));
    EXPECT_GE(s->rho_hat, params.epsilon * s->rough_phi);
    EXPECT_EQ(s->final_samples, detail::ceil_count(y * s->rho_hat / (s->rough_phi * s->rough_phi)));
    EXPECT_EQ(s->step3_draws, s->final_samples);
    EXPECT_EQ(s->status, StreamStatus::completed);
  }
  EXPECT_EQ(aa_budget(r.plan), r.instances_generated);
  EXPECT_LE(r.iterations, AaOptions{}.max_iterations);
}

TEST(AaEstimator, SkipStep3ReusesSamples) {
  const auto net = testing::single_root();
  const std::vector<Query> q{query(net, "X", 1)};
  AaOptions options;
  options.skip_step3 = true;
  const auto r = run_aa(net, q, net.empty_assignment(), {0.05, 0.05}, StreamSeeds::derive(1, 1), options);
  const auto& s = r.plan.queries[0];
  // 83 + 2 * 1414 samples already exceed N' = 1414
  EXPECT_TRUE(s.skipped_step3);
  EXPECT_EQ(s.step3_draws, 0u);
  EXPECT_EQ(s.reused, s.final_samples);
  EXPECT_EQ(s.phi, 0.3);
  EXPECT_EQ(r.estimates[0].posterior, 0.3);
  EXPECT_LT(aa_budget(r.plan), run_aa(net, q, net.empty_assignment(), {0.05, 0.05}, StreamSeeds::derive(1, 1))
                                   .instances_generated);
}

TEST(AaEstimator, BudgetIsTotal) {
  const auto net = testing::chain();
  const std::vector<Query> q{query(net, "A", 1)};
  for (const std::uint64_t cap : {50u, 500u, 3000u}) {
    AaOptions options;
    options.max_iterations = cap;
    const auto r = run_aa(net, q, bind(net, {{"B", 1}}), {0.05, 0.05}, StreamSeeds::derive(2, 1), options);
    EXPECT_LE(r.iterations, cap);
    EXPECT_FALSE(r.estimates[0].reliable);
    EXPECT_LT(r.plan.queries[0].completion, 1.0);
    EXPECT_GE(r.plan.queries[0].completion, 0.0);
  }
}

TEST(AaEstimator, UnreachableQuery) {
  const auto net = BeliefNetwork::validate({{
      testing::binary("A", {}, {0.5, 0.5}),
      testing::binary("B", {"A"}, {1.0, 0.0, 1.0, 0.0}),
  }});
  const std::vector<Query> q{query(net, "B", 1)};
  const auto r = run_aa(net, q, net.empty_assignment(), {0.1, 0.05}, StreamSeeds::derive(2, 1));
  EXPECT_EQ(r.plan.queries[0].status, StreamStatus::unreachable);
  EXPECT_EQ(r.estimates[0].posterior, 0.0);
  EXPECT_TRUE(r.estimates[0].reliable);
}

TEST(AaEstimator, Deterministic) {
  const auto net = testing::two_hypothesis();
  const std::vector<Query> q{query(net, "H", 1)};
  const auto a = run_aa(net, q, bind(net, {{"F", 1}}), {0.1, 0.05}, StreamSeeds::derive(6, 1));
  const auto b = run_aa(net, q, bind(net, {{"F", 1}}), {0.1, 0.05}, StreamSeeds::derive(6, 1));
  EXPECT_EQ(a.estimates[0].posterior, b.estimates[0].posterior);
  EXPECT_EQ(a.instances_generated, b.instances_generated);
}

}  // namespace
}  // namespace bnmc
