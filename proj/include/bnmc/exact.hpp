#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"

/**
 * \file
 * \brief Exact inference by enumeration of the full joint distribution.
 *
 * Only meant for networks small enough to enumerate; it is the ground truth
 * the sampling estimators are checked against.
 */

namespace bnmc {

/// Largest joint state count the oracle will enumerate (2^25 binary states by default).
struct EnumerationLimits {
  double max_joint_states = 33554432.0;
};

/// Results smaller than this are flagged; products of many small entries approach underflow.
inline constexpr double kPrecisionFloor = 1e-300;

struct ExactResult {
  double joint_w = 0.0;    // Pr[X = x, E = e]
  double joint_e = 0.0;    // Pr[E = e]
  double posterior = 0.0;  // Pr[X = x | E = e]
  bool below_precision_floor = false;
};

/// Product of CPT entries for a full assignment.
inline double joint_probability(const BeliefNetwork& network, const Assignment& full) {
  network.check(full);
  if (!full.is_full()) {
    throw Error(ErrorCode::partial_assignment, "joint probability needs every node bound");
  }
  double p = 1.0;
  for (const auto index : network.topo_order()) {
    p *= network.probability(index, full);
  }
  return p;
}

namespace detail {

// Depth-first over the topological order; bound nodes contribute their CPT
// entry, free nodes branch over states. Zero factors prune the subtree.
inline double enumerate(const BeliefNetwork& network, Assignment& values, std::size_t depth, double prefix) {
  const auto order = network.topo_order();
  if (depth == order.size()) {
    return prefix;
  }
  const auto index = order[depth];
  if (values.is_bound(index)) {
    const double p = prefix * network.probability(index, values);
    return p == 0.0 ? 0.0 : enumerate(network, values, depth + 1, p);
  }
  const auto& node = network.node(index);
  const auto config = network.configuration(index, values);
  double total = 0.0;
  for (StateIndex s = 0; s < node.state_count(); ++s) {
    const double p = prefix * node.cpt(config, s);
    if (p == 0.0) {
      continue;
    }
    values.bind(index, s);
    total += enumerate(network, values, depth + 1, p);
  }
  values.unbind(index);
  return total;
}

}  // namespace detail

/// Sum of the joint over every completion of `partial`.
inline double marginal(const BeliefNetwork& network, const Assignment& partial, EnumerationLimits limits = {}) {
  network.check(partial);
  if (network.joint_state_count() > limits.max_joint_states) {
    throw Error(ErrorCode::enumeration_too_large, "network too large for enumeration");
  }
  Assignment values = partial;
  return detail::enumerate(network, values, 0, 1.0);
}

/// Pr[query | evidence] with the two joints it is computed from.
inline ExactResult posterior(const BeliefNetwork& network, const Assignment& query, const Assignment& evidence,
                             EnumerationLimits limits = {}) {
  network.check(query);
  network.check(evidence);
  if (!query.disjoint(evidence)) {
    throw Error(ErrorCode::invalid_argument, "query and evidence bind the same node");
  }
  ExactResult result;
  result.joint_e = marginal(network, evidence, limits);
  if (result.joint_e == 0.0) {
    throw Error(ErrorCode::impossible_evidence, "evidence has probability zero");
  }
  result.joint_w = marginal(network, query.merged(evidence), limits);
  result.posterior = result.joint_w / result.joint_e;
  result.below_precision_floor =
      result.joint_e < kPrecisionFloor || (result.joint_w > 0.0 && result.joint_w < kPrecisionFloor);
  return result;
}

/// First two moments of the clamped-node weight under forward sampling with `clamp` fixed.
struct WeightMoments {
  double mean = 0.0;    // E[omega] = Pr[clamp]
  double second = 0.0;  // E[omega^2]

  [[nodiscard]] double variance() const { return std::max(0.0, second - mean * mean); }
};

namespace detail {

inline void weight_moments(const BeliefNetwork& network, Assignment& values, std::size_t depth, double path,
                           double weight, WeightMoments& out) {
  const auto order = network.topo_order();
  if (depth == order.size()) {
    out.mean += path * weight;
    out.second += path * weight * weight;
    return;
  }
  const auto index = order[depth];
  if (values.is_bound(index)) {
    const double w = weight * network.probability(index, values);
    if (w > 0.0) {
      weight_moments(network, values, depth + 1, path, w, out);
    }
    return;
  }
  const auto& node = network.node(index);
  const auto config = network.configuration(index, values);
  for (StateIndex s = 0; s < node.state_count(); ++s) {
    const double p = path * node.cpt(config, s);
    if (p == 0.0) {
      continue;
    }
    values.bind(index, s);
    weight_moments(network, values, depth + 1, p, weight, out);
  }
  values.unbind(index);
}

}  // namespace detail

inline WeightMoments weight_moments(const BeliefNetwork& network, const Assignment& clamp,
                                    EnumerationLimits limits = {}) {
  network.check(clamp);
  if (network.joint_state_count() > limits.max_joint_states) {
    throw Error(ErrorCode::enumeration_too_large, "network too large for enumeration");
  }
  WeightMoments out;
  Assignment values = clamp;
  detail::weight_moments(network, values, 0, 1.0, 1.0, out);
  return out;
}

}  // namespace bnmc
