#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"
#include "bnmc/random.hpp"
#include "bnmc/sampler.hpp"
#include "bnmc/stopping_rules.hpp"
#include "bnmc/stratification.hpp"

/**
 * \file
 * \brief Bounded variance estimator.
 *
 * One stream estimates Pr[E = e] with only the evidence clamped; one stream
 * per query estimates Pr[X_i = x_i, E = e] with the query clamped as well.
 * Each stream accumulates normalized weights zeta = omega / Pi, where Pi is
 * the product of the clamped states' upper bounds, and stops once the sum
 * reaches the stopping-rule threshold. The estimate is Pi * S / T and the
 * posterior is the ratio of a query estimate to the evidence estimate.
 */

namespace bnmc {

enum class StreamStatus {
  completed,    // attained sum reached the threshold
  incomplete,   // iteration cap (or an early rank decision) came first
  unreachable,  // some clamped state has upper bound 0; the exact probability is 0
  no_mass,      // a rough estimate came out 0, so later stages could not be sized
};

inline std::string_view to_string(StreamStatus status) {
  switch (status) {
    case StreamStatus::completed: return "completed";
    case StreamStatus::incomplete: return "incomplete";
    case StreamStatus::unreachable: return "unreachable";
    case StreamStatus::no_mass: return "no_mass";
  }
  return "unknown";
}

/// Query-specific clamp set W_i = E u {X_i = x_i} and its normalizer Pi_i.
struct QueryTask {
  Query query;
  Assignment clamp;
  double normalizer = 0.0;
};

/// Running stopping-rule sum S and sample count T of one stream.
struct RunningEstimate {
  double sum = 0.0;
  std::uint64_t count = 0;
  bool done = false;

  void add(double zeta, double threshold) {
    sum += zeta;
    ++count;
    done = sum >= threshold;
  }
};

struct StreamReport {
  double normalizer = 0.0;  // Pi
  double sum = 0.0;         // S, in units of zeta
  std::uint64_t count = 0;  // T
  StreamStatus status = StreamStatus::incomplete;
  double phi = 0.0;         // Pi * S / T
  double delta = 1.0;       // failure probability attained at the requested epsilon
  double completion = 0.0;  // min(1, S / S*)
};

struct QueryReport {
  Query query;
  StreamReport stream;
  double posterior = 0.0;       // phi_i / phi_E, clamped to 1
  bool reliable = false;        // both streams completed (or the query is unreachable)
  bool clamped = false;         // the raw ratio exceeded 1
  double combined_delta = 1.0;  // delta_E + delta_i, capped at 1
};

struct RankStopRule {
  double threshold = 0.05;
  std::size_t top_m = 1;
};

struct BvOptions {
  std::uint64_t max_iterations = 50'000;
  bool rescore = false;
  std::optional<StratificationPlan> stratification;
  std::optional<RankStopRule> rank_stop;
  // called with (stream, zeta) for every contribution; stream 0 is the evidence stream, i + 1 query i
  std::function<void(std::size_t, double)> observer;
};

struct BvResult {
  double threshold = 0.0;
  StreamReport evidence;
  std::vector<QueryReport> queries;
  std::uint64_t iterations = 0;
  std::uint64_t instances_generated = 0;
  std::uint64_t instances_rescored = 0;
  std::optional<RankDecision> rank;
};

/// Builds W_i and Pi_i for one query.
inline QueryTask make_task(const BeliefNetwork& network, Query query, const Assignment& evidence) {
  network.check(evidence);
  if (query.node >= network.size() || query.state >= network.node(query.node).state_count()) {
    throw Error(ErrorCode::invalid_argument, "query refers to a node or state outside the network");
  }
  if (evidence.is_bound(query.node)) {
    throw Error(ErrorCode::invalid_argument, "query node '" + network.node(query.node).name + "' is evidence");
  }
  QueryTask task{query, evidence, 0.0};
  task.clamp.bind(query.node, query.state);
  task.normalizer = ClampedSampler(network, task.clamp).normalizer();
  return task;
}

namespace detail {

struct Stream {
  ClampedSampler sampler;
  RandomStream rng;
  RunningEstimate running;

  [[nodiscard]] bool active() const { return sampler.reachable() && !running.done; }

  [[nodiscard]] double phi() const {
    return running.count == 0 ? 0.0
                              : sampler.normalizer() * (running.sum / static_cast<double>(running.count));
  }
};

struct StreamSet {
  Stream evidence;
  std::vector<Stream> queries;
  std::vector<Query> targets;
  RandomStream schedule;

  [[nodiscard]] std::uint64_t generated() const {
    auto total = evidence.sampler.generated();
    for (const auto& q : queries) {
      total += q.sampler.generated();
    }
    return total;
  }

  [[nodiscard]] std::uint64_t rescored() const {
    auto total = evidence.sampler.rescored();
    for (const auto& q : queries) {
      total += q.sampler.rescored();
    }
    return total;
  }

  // phi_i / phi_E, falling back to phi_i while the evidence estimate is 0
  [[nodiscard]] std::vector<double> current_marginals() const {
    const double pe = evidence.phi();
    std::vector<double> marginals;
    for (const auto& q : queries) {
      marginals.push_back(pe > 0.0 ? q.phi() / pe : q.phi());
    }
    return marginals;
  }
};

inline StreamSet make_streams(const BeliefNetwork& network, std::span<const Query> queries,
                              const Assignment& evidence, const StreamSeeds& seeds, bool rescore) {
  if (queries.empty()) {
    throw Error(ErrorCode::invalid_argument, "at least one query is required");
  }
  if (seeds.queries.size() < queries.size()) {
    throw Error(ErrorCode::invalid_argument, "one seed per query stream is required");
  }
  network.check(evidence);
  StreamSet set{{ClampedSampler(network, evidence), RandomStream(seeds.evidence), {}},
                {},
                {queries.begin(), queries.end()},
                RandomStream(seeds.schedule)};
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto task = make_task(network, queries[i], evidence);
    set.queries.push_back({ClampedSampler(network, std::move(task.clamp)), RandomStream(seeds.queries[i]), {}});
    if (rescore) {
      set.queries.back().sampler.set_pivot(queries[i].node, evidence);
    }
  }
  return set;
}

struct LoopOutcome {
  std::uint64_t iterations = 0;
  std::optional<RankDecision> rank;
};

inline void step_query(StreamSet& set, std::size_t i, bool evidence_drawn, bool rescore, double threshold,
                       const BvOptions& options) {
  auto& stream = set.queries[i];
  const auto& target = set.targets[i];
  const auto& outer = set.evidence.sampler.instance();
  if (rescore && evidence_drawn && outer[target.node] == target.state) {
    stream.sampler.adopt(outer, stream.rng);
  } else {
    stream.sampler.generate(stream.rng);
  }
  const double zeta = stream.sampler.normalized_weight();
  stream.running.add(zeta, threshold);
  if (options.observer) {
    options.observer(i + 1, zeta);
  }
}

// One pass draws an evidence sample (while that stream is open) and then
// either one sample per open query stream or, when stratified, one sample for
// a query drawn from the plan.
inline LoopOutcome run_loop(StreamSet& set, double threshold, std::uint64_t max_iterations,
                            const BvOptions& options) {
  LoopOutcome outcome;
  std::optional<StratificationPlan> plan = options.stratification;
  if (plan) {
    if (plan->frequencies.size() != set.queries.size()) {
      throw Error(ErrorCode::invalid_argument, "stratification plan size does not match the query count");
    }
    plan->check();
  }
  if (options.rank_stop && set.queries.size() <= options.rank_stop->top_m) {
    throw Error(ErrorCode::invalid_argument, "rank stop needs more query streams than top_m");
  }

  const auto any_active = [&] {
    if (set.evidence.active()) {
      return true;
    }
    return std::any_of(set.queries.begin(), set.queries.end(), [](const Stream& s) { return s.active(); });
  };

  std::vector<bool> eligible(set.queries.size());
  while (outcome.iterations < max_iterations && any_active()) {
    ++outcome.iterations;
    bool evidence_drawn = false;
    if (set.evidence.active()) {
      set.evidence.sampler.generate(set.evidence.rng);
      const double zeta = set.evidence.sampler.normalized_weight();
      set.evidence.running.add(zeta, threshold);
      evidence_drawn = true;
      if (options.observer) {
        options.observer(0, zeta);
      }
    }

    if (plan) {
      for (std::size_t i = 0; i < set.queries.size(); ++i) {
        eligible[i] = set.queries[i].active();
      }
      const auto pick = next_query(*plan, eligible, set.schedule);
      if (pick < set.queries.size()) {
        step_query(set, pick, evidence_drawn, options.rescore, threshold, options);
      }
      if (plan->mode == StratificationMode::proportional && plan->refresh_interval > 0 &&
          outcome.iterations % plan->refresh_interval == 0) {
        plan = refresh(*plan, set.current_marginals());
      }
    } else {
      for (std::size_t i = 0; i < set.queries.size(); ++i) {
        if (set.queries[i].active()) {
          step_query(set, i, evidence_drawn, options.rescore, threshold, options);
        }
      }
    }

    if (options.rank_stop) {
      const bool sampled = std::all_of(set.queries.begin(), set.queries.end(),
                                       [](const Stream& s) { return s.running.count > 0; });
      if (sampled) {
        std::vector<RankCandidate> candidates;
        for (const auto& q : set.queries) {
          candidates.push_back({q.phi(), q.running.sum});
        }
        auto decision = rank_stop(candidates, options.rank_stop->threshold, options.rank_stop->top_m);
        if (decision.decided) {
          outcome.rank = decision;
          break;
        }
      }
    }
  }
  return outcome;
}

inline StreamReport report_stream(const Stream& stream, double threshold, double epsilon) {
  StreamReport report;
  report.normalizer = stream.sampler.normalizer();
  report.sum = stream.running.sum;
  report.count = stream.running.count;
  if (!stream.sampler.reachable()) {
    report.status = StreamStatus::unreachable;
    report.delta = 0.0;
    report.completion = 1.0;
    return report;
  }
  report.status = stream.running.done ? StreamStatus::completed : StreamStatus::incomplete;
  report.phi = stream.phi();
  report.delta = invert_failure(report.sum, epsilon);
  report.completion = std::min(1.0, report.sum / threshold);
  return report;
}

inline QueryReport report_query(const Query& query, const StreamReport& evidence, StreamReport stream) {
  QueryReport report{query, stream};
  report.combined_delta = std::min(1.0, evidence.delta + stream.delta);
  if (evidence.status == StreamStatus::unreachable || !(evidence.phi > 0.0)) {
    report.posterior = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  if (stream.status == StreamStatus::unreachable) {
    report.posterior = 0.0;
    report.reliable = true;
    return report;
  }
  double ratio = stream.phi / evidence.phi;
  if (ratio > 1.0) {
    ratio = 1.0;
    report.clamped = true;
  }
  report.posterior = ratio;
  report.reliable = evidence.status == StreamStatus::completed && stream.status == StreamStatus::completed;
  return report;
}

inline BvResult summarize(const StreamSet& set, const LoopOutcome& outcome, double threshold, double epsilon) {
  BvResult result;
  result.threshold = threshold;
  result.iterations = outcome.iterations;
  result.rank = outcome.rank;
  result.evidence = report_stream(set.evidence, threshold, epsilon);
  for (std::size_t i = 0; i < set.queries.size(); ++i) {
    result.queries.push_back(
        report_query(set.targets[i], result.evidence, report_stream(set.queries[i], threshold, epsilon)));
  }
  result.instances_generated = set.generated();
  result.instances_rescored = set.rescored();
  return result;
}

}  // namespace detail

/// Runs the bounded variance estimator for every query under shared evidence.
/**
 * Streams stop independently; the run ends when all of them have stopped,
 * when `max_iterations` passes have been made, or when a configured rank
 * rule declares the most probable hypotheses. Unfinished streams are
 * reported as incomplete with the failure probability their attained sum
 * supports at the requested epsilon.
 */
inline BvResult run_bounded_variance(const BeliefNetwork& network, std::span<const Query> queries,
                                     const Assignment& evidence, AccuracyParams params, const StreamSeeds& seeds,
                                     const BvOptions& options = {}) {
  params.check();
  auto set = detail::make_streams(network, queries, evidence, seeds, options.rescore);
  const double threshold = bv_threshold(params);
  const auto outcome = detail::run_loop(set, threshold, options.max_iterations, options);
  return detail::summarize(set, outcome, threshold, params.epsilon);
}

}  // namespace bnmc
