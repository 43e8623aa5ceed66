#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "bnmc/errors.hpp"
#include "bnmc/random.hpp"
#include "bnmc/stopping_rules.hpp"

namespace bnmc {

enum class StratificationMode { uniform, proportional };

/// Frequencies with which each query stream is chosen per iteration.
struct StratificationPlan {
  std::vector<double> frequencies;
  std::uint64_t refresh_interval = 1000;
  StratificationMode mode = StratificationMode::uniform;

  static StratificationPlan uniform(std::size_t query_count,
                                    StratificationMode mode = StratificationMode::uniform,
                                    std::uint64_t refresh_interval = 1000) {
    if (query_count == 0) {
      throw Error(ErrorCode::invalid_argument, "stratification needs at least one query");
    }
    return {std::vector<double>(query_count, 1.0 / static_cast<double>(query_count)), refresh_interval, mode};
  }

  void check() const {
    double sum = 0.0;
    for (const double f : frequencies) {
      if (!(f >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "stratification frequencies must be nonnegative");
      }
      sum += f;
    }
    if (frequencies.empty() || std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::invalid_argument, "stratification frequencies must sum to 1");
    }
  }
};

/// Draws a query index among the `eligible` ones with probability proportional to its frequency.
/**
 * When every eligible frequency is zero the draw is uniform over the
 * eligible indices. Returns frequencies.size() if nothing is eligible.
 */
inline std::size_t next_query(const StratificationPlan& plan, const std::vector<bool>& eligible, RandomStream& rng) {
  const auto n = plan.frequencies.size();
  double mass = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (eligible[i]) {
      mass += plan.frequencies[i];
      ++count;
    }
  }
  if (count == 0) {
    return n;
  }
  if (!(mass > 0.0)) {
    auto pick = rng.below(count);
    for (std::size_t i = 0; i < n; ++i) {
      if (eligible[i] && pick-- == 0) {
        return i;
      }
    }
  }
  const double u = rng.uniform() * mass;
  double cumulative = 0.0;
  std::size_t last = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!eligible[i] || plan.frequencies[i] <= 0.0) {
      continue;
    }
    last = i;
    cumulative += plan.frequencies[i];
    if (u < cumulative) {
      return i;
    }
  }
  return last;
}

inline std::size_t next_query(const StratificationPlan& plan, RandomStream& rng) {
  return next_query(plan, std::vector<bool>(plan.frequencies.size(), true), rng);
}

/// Recomputes frequencies from current marginal estimates.
/**
 * Proportional plans take f_i = m_i / sum(m); all-zero marginals fall back to
 * uniform. Uniform plans are returned unchanged.
 */
inline StratificationPlan refresh(const StratificationPlan& plan, std::span<const double> marginals) {
  if (marginals.size() != plan.frequencies.size()) {
    throw Error(ErrorCode::invalid_argument, "marginal count does not match the plan");
  }
  StratificationPlan next = plan;
  if (plan.mode == StratificationMode::uniform) {
    return next;
  }
  double total = 0.0;
  for (const double m : marginals) {
    if (!(m >= 0.0)) {
      throw Error(ErrorCode::invalid_argument, "marginals must be nonnegative");
    }
    total += m;
  }
  const auto n = static_cast<double>(marginals.size());
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    next.frequencies[i] = total > 0.0 ? marginals[i] / total : 1.0 / n;
  }
  return next;
}

/// Current estimate and attained stopping-rule sum of one query stream.
struct RankCandidate {
  double phi = 0.0;
  double attained_sum = 0.0;
};

struct RankDecision {
  std::size_t leader = 0;
  std::size_t runner_up = 0;
  double epsilon = 0.0;  // (phi_leader - phi_runner) / (phi_leader + phi_runner)
  double leader_delta = 1.0;
  double runner_up_delta = 1.0;
  double failure = 1.0;  // leader_delta + runner_up_delta, capped at 1
  bool decided = false;
};

/// Most-probable-hypothesis test between the `top_m`-th and next ranked streams.
/**
 * The separation point between the two estimates fixes a shared epsilon;
 * each stream's failure probability is the stopping-rule failure at which
 * its attained sum would have sufficed for that epsilon. The ordering is
 * declared once the summed failure is at most `threshold`.
 */
inline RankDecision rank_stop(std::span<const RankCandidate> candidates, double threshold, std::size_t top_m = 1) {
  if (candidates.size() < 2 || top_m == 0 || top_m >= candidates.size()) {
    throw Error(ErrorCode::invalid_argument, "rank stop needs more streams than top_m >= 1");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a].phi > candidates[b].phi; });
  RankDecision decision;
  decision.leader = order[top_m - 1];
  decision.runner_up = order[top_m];
  const auto& lead = candidates[decision.leader];
  const auto& next = candidates[decision.runner_up];
  if (!(lead.phi > next.phi)) {
    return decision;
  }
  decision.epsilon = (lead.phi - next.phi) / (lead.phi + next.phi);
  decision.leader_delta = invert_failure(lead.attained_sum, decision.epsilon);
  decision.runner_up_delta = invert_failure(next.attained_sum, decision.epsilon);
  decision.failure = std::min(1.0, decision.leader_delta + decision.runner_up_delta);
  decision.decided = decision.leader_delta + decision.runner_up_delta <= threshold;
  return decision;
}

}  // namespace bnmc
