#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bnmc/bounded_variance.hpp"
#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"
#include "bnmc/random.hpp"
#include "bnmc/sampler.hpp"
#include "bnmc/stopping_rules.hpp"

/**
 * \file
 * \brief Three-step AA estimator.
 *
 * Step 1 runs the bounded variance estimator at epsilon = 1/2 and delta / 3
 * for rough estimates. Step 2 draws N = Y epsilon / phi independent pairs
 * per stream and accumulates (w1 - w2)^2 / 2, giving the variance estimate
 * rho = max(a / N, epsilon phi). Step 3 averages N' = Y rho / phi^2 fresh
 * weights, with Y = c 4 lambda ln(2 / delta) / epsilon^2.
 *
 * Weights are accumulated in normalized units (zeta = omega / Pi) and scaled
 * back by Pi and Pi^2, which is the same arithmetic in omega units but keeps
 * zero-variance streams exact.
 */

namespace bnmc {

struct AaOptions {
  std::uint64_t max_iterations = 50'000;  // total passes over all three steps
  bool skip_step3 = false;                // count step 1-2 samples toward N'
  bool rescore = false;                   // forwarded to step 1
  double c = StoppingConstants::aa_c;
  std::optional<StratificationPlan> stratification;  // forwarded to step 1
};

/// Per-stream sizing and outcome of an AA run.
struct AaStream {
  double normalizer = 0.0;
  StreamStatus status = StreamStatus::incomplete;
  double rough_phi = 0.0;             // step 1 estimate
  std::uint64_t step1_samples = 0;
  double step1_sum = 0.0;             // zeta units
  std::uint64_t pairs = 0;            // N
  std::uint64_t pairs_done = 0;
  double variance_sum = 0.0;          // a, omega units
  double rho_hat = 0.0;
  std::uint64_t final_samples = 0;    // N'
  std::uint64_t reused = 0;           // step 1-2 samples counted toward N' (skip_step3)
  std::uint64_t step3_draws = 0;      // samples step 3 actually drew
  std::uint64_t step3_planned = 0;
  bool skipped_step3 = false;
  double phi = 0.0;
  double completion = 0.0;
};

struct AaPlan {
  double upsilon = 0.0;
  AaStream evidence;
  std::vector<AaStream> queries;
};

struct AaEstimate {
  Query query;
  double posterior = 0.0;
  bool reliable = false;
  bool clamped = false;
};

struct AaResult {
  AaPlan plan;
  std::vector<AaEstimate> estimates;
  std::uint64_t iterations = 0;
  std::uint64_t instances_generated = 0;
  std::uint64_t instances_rescored = 0;
};

/// Y = c 4 lambda ln(2 / delta) / epsilon^2.
inline double aa_upsilon(AccuracyParams params, double c = StoppingConstants::aa_c) {
  params.check();
  if (!(c > 1.0)) {
    throw Error(ErrorCode::invalid_argument, "the AA constant c must exceed 1");
  }
  return c * 4.0 * StoppingConstants::lambda * std::log(2.0 / params.delta) / (params.epsilon * params.epsilon);
}

/// Total samples across the three steps.
inline std::uint64_t aa_budget(const AaPlan& plan) {
  const auto stream_total = [](const AaStream& s) { return s.step1_samples + 2 * s.pairs_done + s.step3_draws; };
  std::uint64_t total = stream_total(plan.evidence);
  for (const auto& q : plan.queries) {
    total += stream_total(q);
  }
  return total;
}

namespace detail {

struct AaWork {
  AaStream* plan = nullptr;
  Stream* stream = nullptr;
  double sum = 0.0;  // zeta units, every sample drawn so far
  std::uint64_t count = 0;
  double pair_sum = 0.0;  // zeta units
  double variance = 0.0;  // zeta^2 units
  double step3_sum = 0.0;
  bool open = false;
};

}  // namespace detail

/// Runs the AA estimator for every query under shared evidence.
inline AaResult run_aa(const BeliefNetwork& network, std::span<const Query> queries, const Assignment& evidence,
                       AccuracyParams params, const StreamSeeds& seeds, const AaOptions& options = {}) {
  params.check();
  const double epsilon = params.epsilon;
  AaResult result;
  result.plan.upsilon = aa_upsilon(params, options.c);
  const double y = result.plan.upsilon;

  // step 1
  const AccuracyParams rough{0.5, params.delta / 3.0};
  const double rough_threshold = bv_threshold(rough);
  auto set = detail::make_streams(network, queries, evidence, seeds, options.rescore);
  BvOptions step1;
  step1.max_iterations = options.max_iterations;
  step1.rescore = options.rescore;
  step1.stratification = options.stratification;
  const auto outcome = detail::run_loop(set, rough_threshold, options.max_iterations, step1);
  result.iterations = outcome.iterations;

  result.plan.queries.resize(set.queries.size());
  std::vector<detail::AaWork> work;
  const auto enrol = [&](AaStream& plan, detail::Stream& stream) {
    plan.normalizer = stream.sampler.normalizer();
    plan.step1_samples = stream.running.count;
    plan.step1_sum = stream.running.sum;
    plan.rough_phi = stream.phi();
    detail::AaWork w{&plan, &stream, stream.running.sum, stream.running.count};
    if (!stream.sampler.reachable()) {
      plan.status = StreamStatus::unreachable;
      plan.completion = 1.0;
    } else if (!stream.running.done) {
      plan.status = StreamStatus::incomplete;
      plan.completion = 0.0;
    } else if (!(plan.rough_phi > 0.0)) {
      plan.status = StreamStatus::no_mass;
    } else {
      plan.pairs = std::max<std::uint64_t>(1, detail::ceil_count(y * epsilon / plan.rough_phi));
      w.open = true;
    }
    work.push_back(w);
  };
  enrol(result.plan.evidence, set.evidence);
  for (std::size_t i = 0; i < set.queries.size(); ++i) {
    enrol(result.plan.queries[i], set.queries[i]);
  }

  const auto budget_left = [&] { return options.max_iterations - result.iterations; };

  // step 2: paired draws, two passes per pair
  std::uint64_t max_pairs = 0;
  for (const auto& w : work) {
    if (w.open) {
      max_pairs = std::max(max_pairs, w.plan->pairs);
    }
  }
  for (std::uint64_t j = 0; j < max_pairs && budget_left() >= 2; ++j) {
    result.iterations += 2;
    for (auto& w : work) {
      if (!w.open || j >= w.plan->pairs) {
        continue;
      }
      w.stream->sampler.generate(w.stream->rng);
      const double z1 = w.stream->sampler.normalized_weight();
      w.stream->sampler.generate(w.stream->rng);
      const double z2 = w.stream->sampler.normalized_weight();
      w.variance += (z1 - z2) * (z1 - z2) / 2.0;
      w.pair_sum += z1 + z2;
      ++w.plan->pairs_done;
    }
  }

  // step 3 sizing
  std::uint64_t max_draws = 0;
  for (auto& w : work) {
    if (!w.open) {
      continue;
    }
    auto& p = *w.plan;
    const double pi = p.normalizer;
    w.sum += w.pair_sum;
    w.count += 2 * p.pairs_done;
    if (p.pairs_done < p.pairs) {
      w.open = false;
      p.status = StreamStatus::incomplete;
      p.variance_sum = pi * pi * w.variance;
      p.rho_hat = p.pairs_done > 0 ? std::max(p.variance_sum / static_cast<double>(p.pairs_done), epsilon * p.rough_phi)
                                   : epsilon * p.rough_phi;
      continue;
    }
    p.variance_sum = pi * pi * w.variance;
    p.rho_hat = std::max(p.variance_sum / static_cast<double>(p.pairs), epsilon * p.rough_phi);
    p.final_samples = std::max<std::uint64_t>(1, detail::ceil_count(y * p.rho_hat / (p.rough_phi * p.rough_phi)));
    if (options.skip_step3) {
      p.reused = std::min(w.count, p.final_samples);
      p.step3_planned = w.count >= p.final_samples ? 0 : p.final_samples - w.count;
      p.skipped_step3 = p.step3_planned == 0;
    } else {
      p.step3_planned = p.final_samples;
    }
    max_draws = std::max(max_draws, p.step3_planned);
  }

  // step 3: fresh draws
  for (std::uint64_t j = 0; j < max_draws && budget_left() >= 1; ++j) {
    ++result.iterations;
    for (auto& w : work) {
      if (!w.open || j >= w.plan->step3_planned) {
        continue;
      }
      w.stream->sampler.generate(w.stream->rng);
      w.step3_sum += w.stream->sampler.normalized_weight();
      ++w.plan->step3_draws;
    }
  }

  for (auto& w : work) {
    auto& p = *w.plan;
    if (p.status == StreamStatus::unreachable) {
      continue;
    }
    if (w.open) {
      if (options.skip_step3) {
        // every step 1-3 sample of the stream contributes
        p.phi = p.normalizer * ((w.sum + w.step3_sum) / static_cast<double>(w.count + p.step3_draws));
        p.completion = std::min(1.0, static_cast<double>(w.count + p.step3_draws) / static_cast<double>(p.final_samples));
      } else {
        p.phi = p.step3_draws > 0 ? p.normalizer * (w.step3_sum / static_cast<double>(p.step3_draws)) : p.rough_phi;
        p.completion = static_cast<double>(p.step3_draws) / static_cast<double>(p.final_samples);
      }
      p.status = p.step3_draws >= p.step3_planned ? StreamStatus::completed : StreamStatus::incomplete;
    } else {
      // aborted before step 3: report the mean of everything drawn, and
      // completion as thirds of the three-step schedule
      p.phi = w.count > 0 ? p.normalizer * (w.sum / static_cast<double>(w.count)) : 0.0;
      if (p.status == StreamStatus::incomplete && p.pairs == 0) {
        // step 1 unfinished; completion measured against the rough threshold
        p.completion = std::min(1.0, p.step1_sum / rough_threshold) / 3.0;
      } else if (p.status == StreamStatus::incomplete) {
        p.completion = (1.0 + static_cast<double>(p.pairs_done) / static_cast<double>(p.pairs)) / 3.0;
      }
    }
  }

  const auto& ev = result.plan.evidence;
  for (std::size_t i = 0; i < result.plan.queries.size(); ++i) {
    const auto& q = result.plan.queries[i];
    AaEstimate estimate{set.targets[i]};
    if (ev.status == StreamStatus::unreachable || !(ev.phi > 0.0)) {
      estimate.posterior = std::numeric_limits<double>::quiet_NaN();
    } else if (q.status == StreamStatus::unreachable) {
      estimate.posterior = 0.0;
      estimate.reliable = true;
    } else {
      estimate.posterior = q.phi / ev.phi;
      if (estimate.posterior > 1.0) {
        estimate.posterior = 1.0;
        estimate.clamped = true;
      }
      estimate.reliable = ev.status == StreamStatus::completed && q.status == StreamStatus::completed;
    }
    result.estimates.push_back(estimate);
  }
  result.instances_generated = set.generated();
  result.instances_rescored = set.rescored();
  return result;
}

}  // namespace bnmc
