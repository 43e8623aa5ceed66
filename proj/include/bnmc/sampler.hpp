#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"
#include "bnmc/random.hpp"

/**
 * \file
 * \brief Forward instance generation with clamped nodes, instance scoring,
 * and the baseline likelihood weighting estimator.
 */

namespace bnmc {

/// A hypothesis X = x.
struct Query {
  NodeIndex node = 0;
  StateIndex state = 0;

  bool operator==(const Query&) const = default;
};

/// Scores of one instance against a clamped node set.
/**
 * `rho` is the product of CPT entries of the sampled (unclamped) nodes,
 * `omega` the product over the clamped nodes and `zeta` is omega divided by
 * the product of the clamped states' upper bounds.
 */
struct SampleScore {
  double rho = 1.0;
  double omega = 1.0;
  double zeta = 1.0;
};

namespace detail {

// Inversion on the CPT row in state order. A draw that lands past the row's
// accumulated mass (rounding) falls back to the last state with mass.
inline StateIndex sample_row(std::span<const double> row, double u) {
  double cumulative = 0.0;
  StateIndex last_positive = 0;
  for (StateIndex s = 0; s < row.size(); ++s) {
    if (row[s] > 0.0) {
      last_positive = s;
    }
    cumulative += row[s];
    if (u < cumulative) {
      return s;
    }
  }
  return last_positive;
}

inline void sample_node(const BeliefNetwork& network, NodeIndex index, Assignment& values, RandomStream& rng) {
  const auto& node = network.node(index);
  values.bind(index, sample_row(node.cpt.row(network.configuration(index, values)), rng.uniform()));
}

}  // namespace detail

/// Samples every unclamped node in topological order from its CPT row.
inline Assignment generate_instance(const BeliefNetwork& network, const Assignment& clamped, RandomStream& rng) {
  network.check(clamped);
  Assignment instance = clamped;
  for (const auto index : network.topo_order()) {
    if (!clamped.is_bound(index)) {
      detail::sample_node(network, index, instance, rng);
    }
  }
  return instance;
}

/// Scores a full instance; the clamped nodes take their states from the instance.
inline SampleScore score(const BeliefNetwork& network, const Assignment& instance,
                         std::span<const NodeIndex> clamped_set) {
  network.check(instance);
  if (!instance.is_full()) {
    throw Error(ErrorCode::partial_assignment, "scoring needs a full instance");
  }
  std::vector<bool> clamped(network.size(), false);
  for (const auto index : clamped_set) {
    clamped.at(index) = true;
  }
  SampleScore result;
  for (const auto index : network.topo_order()) {
    const double p = network.probability(index, instance);
    if (clamped[index]) {
      const double u = network.upper_bound(index, instance[index]);
      result.omega *= p;
      result.zeta *= (u > 0.0 ? p / u : 0.0);
    } else {
      result.rho *= p;
    }
  }
  return result;
}

/// Repeated forward sampling with a fixed clamp set.
/**
 * Keeps one instance buffer and tracks how many instances it generated. The
 * normalizer is the product of upper bounds of the clamped states; when it
 * is zero the clamp set is unreachable and no instance should be drawn.
 */
class ClampedSampler {
 public:
  ClampedSampler(const BeliefNetwork& network, Assignment clamp)
      : network_(&network), clamp_(std::move(clamp)), instance_(clamp_) {
    network.check(clamp_);
    clamped_nodes_ = clamp_.bound_nodes();
    for (const auto index : clamped_nodes_) {
      const double u = network.upper_bound(index, clamp_[index]);
      upper_.push_back(u);
      normalizer_ *= u;
    }
    for (const auto index : network.topo_order()) {
      if (!clamp_.is_bound(index)) {
        free_order_.push_back(index);
      }
    }
  }

  [[nodiscard]] const Assignment& clamp() const noexcept { return clamp_; }
  [[nodiscard]] std::span<const NodeIndex> clamped_nodes() const noexcept { return clamped_nodes_; }
  [[nodiscard]] double normalizer() const noexcept { return normalizer_; }
  [[nodiscard]] bool reachable() const noexcept { return normalizer_ > 0.0; }

  /// Draws a fresh instance and scores it.
  const Assignment& generate(RandomStream& rng) {
    for (const auto index : free_order_) {
      detail::sample_node(*network_, index, instance_, rng);
    }
    ++generated_;
    rescore();
    return instance_;
  }

  /// Restricts rescoring to instances whose `pivot` already sits in its clamped state.
  /**
   * An instance drawn with `pivot` free and found in its clamped state is
   * reused by resampling only the region that depends on the pivot's
   * unclamped ancestors: those ancestors plus every free node downstream of
   * them. Nodes outside the region keep their values; for a root pivot the
   * region is empty and the instance is simply rescored.
   */
  void set_pivot(NodeIndex pivot, const Assignment& outer_clamp) {
    const auto& net = *network_;
    std::vector<bool> ancestor(net.size(), false);
    std::vector<NodeIndex> frontier{pivot};
    while (!frontier.empty()) {
      const auto at = frontier.back();
      frontier.pop_back();
      for (const auto parent : net.node(at).parents) {
        // edges into outer-clamped nodes are cut in the outer sampling distribution
        if (!ancestor[parent] && !outer_clamp.is_bound(parent)) {
          ancestor[parent] = true;
          frontier.push_back(parent);
        }
      }
    }
    std::vector<bool> region(net.size(), false);
    resample_order_.clear();
    for (const auto index : net.topo_order()) {
      if (clamp_.is_bound(index)) {
        continue;
      }
      bool in_region = ancestor[index];
      for (const auto parent : net.node(index).parents) {
        in_region = in_region || region[parent];
      }
      if (in_region) {
        region[index] = true;
        resample_order_.push_back(index);
      }
    }
    has_pivot_ = true;
  }

  /// Reuses `outer` (which must agree with this clamp) instead of a fresh draw.
  /**
   * Returns true when a nonempty region had to be resampled, which counts as
   * a generated instance; a pure rescore counts in `rescored()`.
   */
  bool adopt(const Assignment& outer, RandomStream& rng) {
    if (!has_pivot_) {
      throw Error(ErrorCode::invalid_argument, "adopt needs a pivot");
    }
    instance_ = outer;
    for (const auto index : resample_order_) {
      detail::sample_node(*network_, index, instance_, rng);
    }
    const bool resampled = !resample_order_.empty();
    if (resampled) {
      ++generated_;
    } else {
      ++rescored_;
    }
    rescore();
    return resampled;
  }

  [[nodiscard]] const Assignment& instance() const noexcept { return instance_; }
  [[nodiscard]] double weight() const noexcept { return weight_; }
  [[nodiscard]] double normalized_weight() const noexcept { return zeta_; }
  [[nodiscard]] std::uint64_t generated() const noexcept { return generated_; }
  [[nodiscard]] std::uint64_t rescored() const noexcept { return rescored_; }

 private:
  void rescore() {
    weight_ = 1.0;
    zeta_ = 1.0;
    for (std::size_t i = 0; i < clamped_nodes_.size(); ++i) {
      const double p = network_->probability(clamped_nodes_[i], instance_);
      weight_ *= p;
      zeta_ *= (upper_[i] > 0.0 ? p / upper_[i] : 0.0);
    }
  }

  const BeliefNetwork* network_;
  Assignment clamp_;
  Assignment instance_;
  std::vector<NodeIndex> clamped_nodes_;
  std::vector<double> upper_;
  std::vector<NodeIndex> free_order_;
  std::vector<NodeIndex> resample_order_;
  bool has_pivot_ = false;
  double normalizer_ = 1.0;
  double weight_ = 1.0;
  double zeta_ = 1.0;
  std::uint64_t generated_ = 0;
  std::uint64_t rescored_ = 0;
};

struct LwEstimate {
  NodeIndex node = 0;
  std::vector<double> raw_bins;    // accumulated omega per realized state
  std::vector<double> normalized;  // bins / total mass
  std::uint64_t iterations = 0;
};

struct LwResult {
  std::vector<LwEstimate> estimates;
  double evidence_estimate = 0.0;  // mean omega, estimates Pr[E = e]
  std::uint64_t iterations = 0;
  std::uint64_t instances_generated = 0;
  bool no_mass = false;  // every weight was zero; normalized estimates undefined
};

/// Likelihood weighting with binning and renormalization.
inline LwResult likelihood_weighting(const BeliefNetwork& network, std::span<const NodeIndex> query_nodes,
                                     const Assignment& evidence, std::uint64_t iterations, RandomStream& rng) {
  if (iterations == 0) {
    throw Error(ErrorCode::invalid_argument, "likelihood weighting needs at least one iteration");
  }
  for (const auto node : query_nodes) {
    if (evidence.is_bound(node)) {
      throw Error(ErrorCode::invalid_argument, "query node '" + network.node(node).name + "' is evidence");
    }
  }
  ClampedSampler sampler(network, evidence);
  LwResult result;
  for (const auto node : query_nodes) {
    result.estimates.push_back({node, std::vector<double>(network.node(node).state_count(), 0.0), {}, iterations});
  }
  double total = 0.0;
  for (std::uint64_t t = 0; t < iterations; ++t) {
    const auto& instance = sampler.generate(rng);
    const double w = sampler.weight();
    total += w;
    for (auto& estimate : result.estimates) {
      estimate.raw_bins[instance[estimate.node]] += w;
    }
  }
  result.iterations = iterations;
  result.instances_generated = sampler.generated();
  result.evidence_estimate = total / static_cast<double>(iterations);
  result.no_mass = !(total > 0.0);
  for (auto& estimate : result.estimates) {
    double mass = 0.0;
    for (const double b : estimate.raw_bins) {
      mass += b;
    }
    estimate.normalized.assign(estimate.raw_bins.size(), 0.0);
    if (mass > 0.0) {
      for (std::size_t s = 0; s < estimate.raw_bins.size(); ++s) {
        estimate.normalized[s] = estimate.raw_bins[s] / mass;
      }
    }
  }
  return result;
}

}  // namespace bnmc
