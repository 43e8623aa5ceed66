#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bnmc/aa_estimator.hpp"
#include "bnmc/bounded_variance.hpp"
#include "bnmc/exact.hpp"
#include "bnmc/network.hpp"
#include "bnmc/random.hpp"
#include "bnmc/sampler.hpp"
#include "bnmc/stopping_rules.hpp"

/**
 * \file
 * \brief Random networks, forward-sampled test cases and algorithm
 * comparison reports.
 */

namespace bnmc {

/// Shape of a random DAG with randomly drawn CPT rows.
/**
 * Node i draws up to `max_parents` distinct parents among nodes 0..i-1. Each
 * CPT row draws exponential weights, raises them to `concentration` (1 gives
 * a flat Dirichlet, larger values skew rows toward one state) and mixes in a
 * uniform `floor` per entry so no entry is extreme.
 */
struct RandomNetworkConfig {
  std::size_t nodes = 8;
  std::size_t max_parents = 2;
  std::size_t min_states = 2;
  std::size_t max_states = 2;
  double concentration = 1.0;
  double floor = 0.01;
};

namespace detail {

inline std::vector<double> random_row(std::size_t states, const RandomNetworkConfig& config, RandomStream& rng) {
  std::vector<double> row(states);
  double total = 0.0;
  for (auto& w : row) {
    w = std::pow(-std::log(1.0 - rng.uniform()), config.concentration);
    total += w;
  }
  const double free_mass = 1.0 - config.floor * static_cast<double>(states);
  for (auto& w : row) {
    w = config.floor + free_mass * (total > 0.0 ? w / total : 1.0 / static_cast<double>(states));
  }
  return row;
}

}  // namespace detail

inline NetworkDescription random_network(const RandomNetworkConfig& config, RandomStream& rng) {
  if (config.nodes == 0 || config.min_states < 2 || config.max_states < config.min_states ||
      config.floor < 0.0 || config.floor * static_cast<double>(config.max_states) >= 1.0) {
    throw Error(ErrorCode::invalid_argument, "inconsistent random network configuration");
  }
  NetworkDescription description;
  std::vector<std::size_t> cards;
  for (std::size_t i = 0; i < config.nodes; ++i) {
    NodeSpec spec;
    spec.name = "N" + std::to_string(i);
    const auto card = config.min_states + rng.below(config.max_states - config.min_states + 1);
    cards.push_back(card);
    for (std::size_t s = 0; s < card; ++s) {
      spec.states.push_back(std::to_string(s));
    }
    std::vector<std::size_t> candidates(i);
    for (std::size_t c = 0; c < i; ++c) {
      candidates[c] = c;
    }
    const auto parent_count = rng.below(std::min(i, config.max_parents) + 1);
    std::vector<std::size_t> parents;
    for (std::size_t p = 0; p < parent_count; ++p) {
      const auto pick = p + rng.below(candidates.size() - p);
      std::swap(candidates[p], candidates[pick]);
      parents.push_back(candidates[p]);
    }
    std::sort(parents.begin(), parents.end());
    std::size_t configurations = 1;
    for (const auto p : parents) {
      spec.parents.push_back("N" + std::to_string(p));
      configurations *= cards[p];
    }
    for (std::size_t c = 0; c < configurations; ++c) {
      const auto row = detail::random_row(card, config, rng);
      spec.cpt.insert(spec.cpt.end(), row.begin(), row.end());
    }
    description.nodes.push_back(std::move(spec));
  }
  return description;
}

struct TestCase {
  std::size_t index = 0;
  Assignment evidence;
  Query query;
  std::optional<ExactResult> exact;  // absent when the oracle cannot enumerate the network
};

/// Forward-samples cases: random evidence subsets of a sampled instance and a sampled query.
/**
 * Each case draws a full instance, a query node with its sampled state, and
 * an evidence subset of the remaining nodes whose size is uniform over
 * [ceil(lo m), floor(hi m)] with m = nodes - 1.
 */
inline std::vector<TestCase> generate_cases(const BeliefNetwork& network, std::size_t count,
                                            std::pair<double, double> evidence_fraction, RandomStream& rng,
                                            EnumerationLimits limits = {}) {
  const auto [lo, hi] = evidence_fraction;
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
    throw Error(ErrorCode::invalid_argument, "evidence fraction range must satisfy 0 <= lo <= hi <= 1");
  }
  if (network.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "cases need at least two nodes");
  }
  const auto others = network.size() - 1;
  auto min_k = static_cast<std::size_t>(std::ceil(lo * static_cast<double>(others) - 1e-9));
  auto max_k = static_cast<std::size_t>(std::floor(hi * static_cast<double>(others) + 1e-9));
  if (max_k < min_k) {
    max_k = min_k = static_cast<std::size_t>(std::lround(lo * static_cast<double>(others)));
  }

  std::vector<TestCase> cases;
  for (std::size_t index = 0; index < count; ++index) {
    const auto instance = generate_instance(network, network.empty_assignment(), rng);
    TestCase test;
    test.index = index;
    test.query.node = rng.below(network.size());
    test.query.state = instance[test.query.node];

    std::vector<NodeIndex> pool;
    for (NodeIndex n = 0; n < network.size(); ++n) {
      if (n != test.query.node) {
        pool.push_back(n);
      }
    }
    const auto k = min_k + rng.below(max_k - min_k + 1);
    test.evidence = network.empty_assignment();
    for (std::size_t e = 0; e < k; ++e) {
      const auto pick = e + rng.below(pool.size() - e);
      std::swap(pool[e], pool[pick]);
      test.evidence.bind(pool[e], instance[pool[e]]);
    }

    auto query = network.empty_assignment();
    query.bind(test.query.node, test.query.state);
    try {
      test.exact = posterior(network, query, test.evidence, limits);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::enumeration_too_large) {
        throw;
      }
    }
    cases.push_back(std::move(test));
  }
  return cases;
}

enum class Algorithm { lw, bv, aa };

inline std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::lw: return "lw";
    case Algorithm::bv: return "bv";
    case Algorithm::aa: return "aa";
  }
  return "unknown";
}

struct ComparisonConfig {
  AccuracyParams params;
  std::uint64_t budget = 50'000;  // iteration cap for BV and AA; LW runs at budget and 2 x budget
  std::uint64_t master_seed = 0;
  bool rescore = false;
  bool skip_step3 = false;
  std::size_t threads = 1;
};

/// Seed of one algorithm's run on one case: derive_seed(master, "case/<index>/<label>").
inline std::uint64_t case_seed(std::uint64_t master, std::size_t case_index, std::string_view label) {
  return derive_seed(master, "case/" + std::to_string(case_index) + "/" + std::string(label));
}

struct CaseOutcome {
  std::string algorithm;
  std::size_t case_index = 0;
  double estimate = 0.0;
  std::optional<double> exact;
  std::optional<double> relative_error;
  std::uint64_t instances = 0;
  double completion = 1.0;
  bool completed = true;
  double seconds = 0.0;
};

struct ComparisonRow {
  std::string algorithm;
  std::size_t cases_scored = 0;
  std::size_t oracle_less = 0;
  double mean_relative_error = 0.0;
  double stddev_relative_error = 0.0;
  double mean_instances = 0.0;
  double mean_seconds = 0.0;
  double fraction_error_above_epsilon = 0.0;
  double fraction_error_above_epsilon_low_completion = 0.0;   // completion < 30%
  double fraction_error_above_epsilon_high_completion = 0.0;  // completion >= 30%
};

struct ComparisonReport {
  AccuracyParams params;
  std::uint64_t budget = 0;
  std::uint64_t master_seed = 0;
  std::size_t case_count = 0;
  std::vector<ComparisonRow> rows;
  std::vector<CaseOutcome> outcomes;  // ordered by row, then case index
};

inline std::string lw_label(std::uint64_t iterations) { return "LW" + std::to_string(iterations); }

/// Runs one algorithm configuration on one case.
inline CaseOutcome run_case(const BeliefNetwork& network, const TestCase& test, const std::string& label,
                            Algorithm algorithm, std::uint64_t iterations, const ComparisonConfig& config) {
  CaseOutcome outcome;
  outcome.algorithm = label;
  outcome.case_index = test.index;
  const auto seed = case_seed(config.master_seed, test.index, label);
  const std::vector<Query> queries{test.query};
  const auto start = std::chrono::steady_clock::now();
  switch (algorithm) {
    case Algorithm::lw: {
      RandomStream rng(seed);
      const std::vector<NodeIndex> nodes{test.query.node};
      const auto lw = likelihood_weighting(network, nodes, test.evidence, iterations, rng);
      outcome.estimate = lw.no_mass ? std::numeric_limits<double>::quiet_NaN()
                                    : lw.estimates.front().normalized[test.query.state];
      outcome.instances = lw.instances_generated;
      break;
    }
    case Algorithm::bv: {
      BvOptions options;
      options.max_iterations = iterations;
      options.rescore = config.rescore;
      const auto bv =
          run_bounded_variance(network, queries, test.evidence, config.params, StreamSeeds::derive(seed, 1), options);
      const auto& q = bv.queries.front();
      outcome.estimate = q.posterior;
      outcome.instances = bv.instances_generated;
      outcome.completion = std::min(bv.evidence.completion, q.stream.completion);
      outcome.completed = q.reliable;
      break;
    }
    case Algorithm::aa: {
      AaOptions options;
      options.max_iterations = iterations;
      options.rescore = config.rescore;
      options.skip_step3 = config.skip_step3;
      const auto aa = run_aa(network, queries, test.evidence, config.params, StreamSeeds::derive(seed, 1), options);
      outcome.estimate = aa.estimates.front().posterior;
      outcome.instances = aa.instances_generated;
      outcome.completion = std::min(aa.plan.evidence.completion, aa.plan.queries.front().completion);
      outcome.completed = aa.estimates.front().reliable;
      break;
    }
  }
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (test.exact) {
    outcome.exact = test.exact->posterior;
    // an undefined estimate counts as estimating zero
    const double estimate = std::isnan(outcome.estimate) ? 0.0 : outcome.estimate;
    outcome.relative_error = relative_error(estimate, test.exact->posterior);
  }
  return outcome;
}

inline ComparisonRow aggregate(const std::string& label, std::span<const CaseOutcome> outcomes, double epsilon) {
  ComparisonRow row;
  row.algorithm = label;
  std::vector<double> errors;
  std::size_t above = 0, above_low = 0, above_high = 0;
  for (const auto& o : outcomes) {
    row.mean_instances += static_cast<double>(o.instances);
    row.mean_seconds += o.seconds;
    if (!o.relative_error) {
      ++row.oracle_less;
      continue;
    }
    errors.push_back(*o.relative_error);
    if (*o.relative_error > epsilon) {
      ++above;
      ++(o.completion < 0.3 ? above_low : above_high);
    }
  }
  if (!outcomes.empty()) {
    row.mean_instances /= static_cast<double>(outcomes.size());
    row.mean_seconds /= static_cast<double>(outcomes.size());
  }
  row.cases_scored = errors.size();
  if (!errors.empty()) {
    const auto n = static_cast<double>(errors.size());
    for (const double e : errors) {
      row.mean_relative_error += e;
    }
    row.mean_relative_error /= n;
    if (errors.size() > 1) {
      double ss = 0.0;
      for (const double e : errors) {
        ss += (e - row.mean_relative_error) * (e - row.mean_relative_error);
      }
      row.stddev_relative_error = std::sqrt(ss / (n - 1.0));
    }
    row.fraction_error_above_epsilon = static_cast<double>(above) / n;
    row.fraction_error_above_epsilon_low_completion = static_cast<double>(above_low) / n;
    row.fraction_error_above_epsilon_high_completion = static_cast<double>(above_high) / n;
  }
  return row;
}

/// Runs every algorithm on every case and aggregates relative errors against the oracle.
/**
 * BV and AA are capped at `budget` iterations; LW contributes two rows, at
 * `budget` and at twice that. Cases may run on several threads; results are
 * reduced in case order so reports do not depend on scheduling.
 */
inline ComparisonReport run_comparison(const BeliefNetwork& network, std::span<const TestCase> cases,
                                       std::span<const Algorithm> algorithms, const ComparisonConfig& config) {
  config.params.check();
  ComparisonReport report;
  report.params = config.params;
  report.budget = config.budget;
  report.master_seed = config.master_seed;
  report.case_count = cases.size();

  struct Job {
    std::string label;
    Algorithm algorithm;
    std::uint64_t iterations;
  };
  std::vector<Job> jobs;
  for (const auto algorithm : algorithms) {
    switch (algorithm) {
      case Algorithm::lw:
        jobs.push_back({lw_label(config.budget), algorithm, config.budget});
        jobs.push_back({lw_label(2 * config.budget), algorithm, 2 * config.budget});
        break;
      case Algorithm::bv: jobs.push_back({"BV", algorithm, config.budget}); break;
      case Algorithm::aa: jobs.push_back({"AA", algorithm, config.budget}); break;
    }
  }

  std::vector<CaseOutcome> outcomes(jobs.size() * cases.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (auto slot = next++; slot < outcomes.size(); slot = next++) {
      const auto& job = jobs[slot / cases.size()];
      outcomes[slot] = run_case(network, cases[slot % cases.size()], job.label, job.algorithm, job.iterations, config);
    }
  };
  const auto threads = std::max<std::size_t>(1, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::span<const CaseOutcome> slice(outcomes.data() + j * cases.size(), cases.size());
    report.rows.push_back(aggregate(jobs[j].label, slice, config.params.epsilon));
  }
  report.outcomes = std::move(outcomes);
  return report;
}

/// Machine-readable key/value records. Wall times are left out so equal inputs give identical bytes.
inline void write_records(std::ostream& out, const ComparisonReport& report) {
  std::ostringstream s;
  s << std::setprecision(10);
  s << "report format=bnmc-report-1 epsilon=" << report.params.epsilon << " delta=" << report.params.delta
    << " budget=" << report.budget << " seed=" << report.master_seed << " cases=" << report.case_count << "\n";
  for (const auto& row : report.rows) {
    s << "row algorithm=" << row.algorithm << " cases_scored=" << row.cases_scored
      << " oracle_less=" << row.oracle_less << " mean_relative_error=" << row.mean_relative_error
      << " stddev_relative_error=" << row.stddev_relative_error << " mean_instances=" << row.mean_instances
      << " fraction_error_above_epsilon=" << row.fraction_error_above_epsilon
      << " fraction_error_above_epsilon_low_completion=" << row.fraction_error_above_epsilon_low_completion
      << " fraction_error_above_epsilon_high_completion=" << row.fraction_error_above_epsilon_high_completion
      << "\n";
  }
  for (const auto& o : report.outcomes) {
    s << "case index=" << o.case_index << " algorithm=" << o.algorithm << " estimate=" << o.estimate;
    if (o.exact) {
      s << " exact=" << *o.exact << " relative_error=" << *o.relative_error;
    }
    s << " instances=" << o.instances << " completion=" << o.completion
      << " completed=" << (o.completed ? "true" : "false") << "\n";
  }
  out << s.str();
}

/// Aligned summary table with one column per algorithm.
inline void write_table(std::ostream& out, const ComparisonReport& report) {
  const auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << "%";
    return s.str();
  };
  const auto num = [](double v, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
  };
  std::vector<std::pair<std::string, std::vector<std::string>>> lines{
      {"", {}},
      {"Mean relative error", {}},
      {"Std.dev. relative error", {}},
      {"Mean instances generated", {}},
      {"Mean time (seconds)", {}},
      {"Cases with > eps error", {}},
      {"  ... and < 30% completion", {}},
      {"  ... and >= 30% completion", {}},
  };
  for (const auto& row : report.rows) {
    lines[0].second.push_back(row.algorithm);
    lines[1].second.push_back(pct(row.mean_relative_error));
    lines[2].second.push_back(pct(row.stddev_relative_error));
    lines[3].second.push_back(num(row.mean_instances, 0));
    lines[4].second.push_back(num(row.mean_seconds, 4));
    lines[5].second.push_back(pct(row.fraction_error_above_epsilon));
    lines[6].second.push_back(pct(row.fraction_error_above_epsilon_low_completion));
    lines[7].second.push_back(pct(row.fraction_error_above_epsilon_high_completion));
  }
  std::size_t label_width = 0;
  for (const auto& [label, cells] : lines) {
    label_width = std::max(label_width, label.size());
  }
  std::vector<std::size_t> widths(report.rows.size(), 0);
  for (const auto& [label, cells] : lines) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      widths[c] = std::max(widths[c], cells[c].size());
    }
  }
  for (const auto& [label, cells] : lines) {
    out << std::left << std::setw(static_cast<int>(label_width)) << label;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cells[c];
    }
    out << "\n";
  }
}

}  // namespace bnmc
