#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bnmc/errors.hpp"

/**
 * \file
 * \brief Discrete belief networks: node descriptions, conditional probability
 * tables, validation, topological ordering and local variance bounds.
 */

namespace bnmc {

using NodeIndex = std::size_t;
using StateIndex = std::size_t;

/// Maximum deviation of a CPT row sum from 1 accepted by validation.
inline constexpr double kRowSumTolerance = 1e-9;

/// A node as it appears in a network file, parents referenced by name.
/**
 * The CPT is flat and row-major: parent configurations enumerate
 * lexicographically with the first listed parent most significant, and
 * within a configuration the entries follow state order.
 */
struct NodeSpec {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> parents;
  std::vector<double> cpt;
};

struct NetworkDescription {
  std::vector<NodeSpec> nodes;
};

/// Partial or full instantiation of the nodes of one network.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::size_t node_count) : states_(node_count, kUnbound) {}

  void bind(NodeIndex node, StateIndex state) { states_.at(node) = static_cast<std::int32_t>(state); }
  void unbind(NodeIndex node) { states_.at(node) = kUnbound; }

  [[nodiscard]] bool is_bound(NodeIndex node) const { return states_.at(node) != kUnbound; }

  [[nodiscard]] std::optional<StateIndex> get(NodeIndex node) const {
    const auto state = states_.at(node);
    if (state == kUnbound) {
      return std::nullopt;
    }
    return static_cast<StateIndex>(state);
  }

  /// Unchecked access; the node must be bound.
  [[nodiscard]] StateIndex operator[](NodeIndex node) const { return static_cast<StateIndex>(states_[node]); }

  /// Number of nodes in the network this assignment refers to.
  [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }

  [[nodiscard]] std::size_t bound_count() const {
    return static_cast<std::size_t>(std::count_if(states_.begin(), states_.end(), [](auto s) { return s != kUnbound; }));
  }

  [[nodiscard]] bool is_full() const {
    return std::none_of(states_.begin(), states_.end(), [](auto s) { return s == kUnbound; });
  }

  [[nodiscard]] std::vector<NodeIndex> bound_nodes() const {
    std::vector<NodeIndex> nodes;
    for (NodeIndex i = 0; i < states_.size(); ++i) {
      if (states_[i] != kUnbound) {
        nodes.push_back(i);
      }
    }
    return nodes;
  }

  /// True when no node is bound in both assignments.
  [[nodiscard]] bool disjoint(const Assignment& other) const {
    for (std::size_t i = 0; i < std::min(size(), other.size()); ++i) {
      if (states_[i] != kUnbound && other.states_[i] != kUnbound) {
        return false;
      }
    }
    return true;
  }

  /// Union of two disjoint assignments over the same network.
  [[nodiscard]] Assignment merged(const Assignment& other) const {
    Assignment result = *this;
    for (std::size_t i = 0; i < other.size(); ++i) {
      if (other.states_[i] != kUnbound) {
        result.states_[i] = other.states_[i];
      }
    }
    return result;
  }

  bool operator==(const Assignment&) const = default;

 private:
  static constexpr std::int32_t kUnbound = -1;
  std::vector<std::int32_t> states_;
};

/// Conditional probability table for one node.
class Cpt {
 public:
  Cpt() = default;
  Cpt(std::size_t configuration_count, std::size_t state_count, std::vector<double> table)
      : configurations_(configuration_count), states_(state_count), table_(std::move(table)) {}

  [[nodiscard]] std::size_t configuration_count() const noexcept { return configurations_; }
  [[nodiscard]] std::size_t state_count() const noexcept { return states_; }

  [[nodiscard]] double operator()(std::size_t configuration, StateIndex state) const {
    return table_[configuration * states_ + state];
  }

  [[nodiscard]] std::span<const double> row(std::size_t configuration) const {
    return std::span<const double>(table_).subspan(configuration * states_, states_);
  }

  [[nodiscard]] std::span<const double> entries() const noexcept { return table_; }

 private:
  std::size_t configurations_ = 0;
  std::size_t states_ = 0;
  std::vector<double> table_;
};

struct Node {
  std::string name;
  std::vector<std::string> states;
  std::vector<NodeIndex> parents;
  // stride of each parent in the configuration index; last parent has stride 1
  std::vector<std::size_t> parent_strides;
  Cpt cpt;

  [[nodiscard]] std::size_t state_count() const noexcept { return states.size(); }

  [[nodiscard]] std::optional<StateIndex> find_state(std::string_view label) const {
    const auto it = std::find(states.begin(), states.end(), label);
    if (it == states.end()) {
      return std::nullopt;
    }
    return static_cast<StateIndex>(it - states.begin());
  }
};

/// Tightest probability interval around a node set and its local variance bound.
/**
 * `gamma` is max{u/l, (1-l)/(1-u)} where l and u are the smallest and largest
 * CPT entries over every state and parent configuration of the nodes in the
 * set. An entry of exactly 0 or 1 makes the bound infinite and sets `extreme`.
 */
struct LvbSummary {
  double lower = 0.0;
  double upper = 0.0;
  double gamma = 1.0;
  std::size_t k = 0;
  bool extreme = false;
};

/// Immutable, validated belief network.
class BeliefNetwork {
 public:
  /// Validates a description and builds the network.
  /**
   * Throws Error(invalid_network) naming the offending node (and CPT row where
   * relevant) on duplicate names, unknown or repeated parents, malformed
   * state lists, CPT size mismatches, entries outside [0, 1], row sums off by
   * more than kRowSumTolerance, or a directed cycle.
   */
  static BeliefNetwork validate(const NetworkDescription& description);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] const Node& node(NodeIndex index) const { return nodes_.at(index); }
  [[nodiscard]] std::span<const Node> nodes() const noexcept { return nodes_; }

  /// Parents precede children; ties resolve to file order.
  [[nodiscard]] std::span<const NodeIndex> topo_order() const noexcept { return topo_order_; }

  [[nodiscard]] std::span<const NodeIndex> children(NodeIndex index) const { return children_.at(index); }

  [[nodiscard]] std::optional<NodeIndex> find(std::string_view name) const {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) {
      return std::nullopt;
    }
    return it->second;
  }

  [[nodiscard]] Assignment empty_assignment() const { return Assignment(size()); }

  /// Index of the parent configuration of `index` under `values`; every parent must be bound.
  [[nodiscard]] std::size_t configuration(NodeIndex index, const Assignment& values) const {
    const auto& n = nodes_[index];
    std::size_t config = 0;
    for (std::size_t p = 0; p < n.parents.size(); ++p) {
      config += values[n.parents[p]] * n.parent_strides[p];
    }
    return config;
  }

  /// CPT entry of the bound state of `index` given its bound parents.
  [[nodiscard]] double probability(NodeIndex index, const Assignment& values) const {
    return nodes_[index].cpt(configuration(index, values), values[index]);
  }

  /// Largest CPT entry for (node, state) over all parent configurations.
  [[nodiscard]] double upper_bound(NodeIndex index, StateIndex state) const {
    const auto& n = node(index);
    if (state >= n.state_count()) {
      throw Error(ErrorCode::invalid_argument, "state index out of range for node '" + n.name + "'");
    }
    double best = 0.0;
    for (std::size_t c = 0; c < n.cpt.configuration_count(); ++c) {
      best = std::max(best, n.cpt(c, state));
    }
    return best;
  }

  /// Local variance bound over the given nodes; see LvbSummary.
  [[nodiscard]] LvbSummary lvb(std::span<const NodeIndex> node_set) const {
    if (node_set.empty()) {
      throw Error(ErrorCode::invalid_argument, "local variance bound needs a nonempty node set");
    }
    std::unordered_set<NodeIndex> distinct(node_set.begin(), node_set.end());
    LvbSummary summary;
    summary.lower = 1.0;
    summary.upper = 0.0;
    summary.k = distinct.size();
    for (const auto index : distinct) {
      for (const double p : node(index).cpt.entries()) {
        summary.lower = std::min(summary.lower, p);
        summary.upper = std::max(summary.upper, p);
      }
    }
    if (summary.lower <= 0.0 || summary.upper >= 1.0) {
      summary.extreme = true;
      summary.gamma = std::numeric_limits<double>::infinity();
    } else {
      summary.gamma = std::max(summary.upper / summary.lower, (1.0 - summary.lower) / (1.0 - summary.upper));
    }
    return summary;
  }

  /// Throws unless `values` refers to this network and every bound state is valid.
  void check(const Assignment& values) const {
    if (values.size() != size()) {
      throw Error(ErrorCode::invalid_argument, "assignment does not match the network size");
    }
    for (NodeIndex i = 0; i < size(); ++i) {
      if (const auto s = values.get(i); s && *s >= nodes_[i].state_count()) {
        throw Error(ErrorCode::invalid_argument, "state index out of range for node '" + nodes_[i].name + "'");
      }
    }
  }

  /// Product of state counts; the size of the full joint distribution.
  [[nodiscard]] double joint_state_count() const {
    double total = 1.0;
    for (const auto& n : nodes_) {
      total *= static_cast<double>(n.state_count());
    }
    return total;
  }

  /// Round-trips to the file-level description.
  [[nodiscard]] NetworkDescription describe() const {
    NetworkDescription description;
    for (const auto& n : nodes_) {
      NodeSpec spec{n.name, n.states, {}, {n.cpt.entries().begin(), n.cpt.entries().end()}};
      for (const auto p : n.parents) {
        spec.parents.push_back(nodes_[p].name);
      }
      description.nodes.push_back(std::move(spec));
    }
    return description;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<NodeIndex> topo_order_;
  std::vector<std::vector<NodeIndex>> children_;
  std::unordered_map<std::string, NodeIndex> by_name_;
};

namespace detail {

inline std::string describe_configuration(const NetworkDescription& description,
                                          const std::unordered_map<std::string, NodeIndex>& by_name,
                                          const NodeSpec& spec, std::size_t config) {
  if (spec.parents.empty()) {
    return "prior";
  }
  std::vector<std::string> parts(spec.parents.size());
  for (std::size_t p = spec.parents.size(); p-- > 0;) {
    const auto& parent = description.nodes[by_name.at(spec.parents[p])];
    const auto card = parent.states.size();
    parts[p] = spec.parents[p] + "=" + parent.states[config % card];
    config /= card;
  }
  std::string out;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    out += (p == 0 ? "" : ",") + parts[p];
  }
  return out;
}

}  // namespace detail

inline BeliefNetwork BeliefNetwork::validate(const NetworkDescription& description) {
  const auto fail = [](const std::string& node, const std::string& what) {
    throw Error(ErrorCode::invalid_network, "node '" + node + "': " + what);
  };

  BeliefNetwork net;
  const auto n = description.nodes.size();
  if (n == 0) {
    throw Error(ErrorCode::invalid_network, "network has no nodes");
  }

  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = description.nodes[i];
    if (spec.name.empty()) {
      throw Error(ErrorCode::invalid_network, "node " + std::to_string(i) + " has an empty name");
    }
    if (!net.by_name_.emplace(spec.name, i).second) {
      fail(spec.name, "duplicate node name");
    }
  }

  net.nodes_.resize(n);
  net.children_.resize(n);
  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = description.nodes[i];
    auto& node = net.nodes_[i];
    node.name = spec.name;
    node.states = spec.states;

    if (spec.states.size() < 2) {
      fail(spec.name, "needs at least two states");
    }
    if (std::unordered_set<std::string>(spec.states.begin(), spec.states.end()).size() != spec.states.size()) {
      fail(spec.name, "duplicate state label");
    }

    std::unordered_set<NodeIndex> seen;
    for (const auto& parent_name : spec.parents) {
      const auto it = net.by_name_.find(parent_name);
      if (it == net.by_name_.end()) {
        fail(spec.name, "unknown parent '" + parent_name + "'");
      }
      if (it->second == i) {
        fail(spec.name, "lists itself as a parent");
      }
      if (!seen.insert(it->second).second) {
        fail(spec.name, "duplicate parent '" + parent_name + "'");
      }
      node.parents.push_back(it->second);
    }
  }

  // strides need every node's state count, so they come after the first pass
  for (NodeIndex i = 0; i < n; ++i) {
    const auto& spec = description.nodes[i];
    auto& node = net.nodes_[i];
    node.parent_strides.assign(node.parents.size(), 1);
    std::size_t configurations = 1;
    for (std::size_t p = node.parents.size(); p-- > 0;) {
      node.parent_strides[p] = configurations;
      configurations *= net.nodes_[node.parents[p]].states.size();
    }
    const auto expected = configurations * node.states.size();
    if (spec.cpt.size() != expected) {
      std::ostringstream msg;
      msg << "CPT has " << spec.cpt.size() << " entries, expected " << expected << " (" << configurations
          << " parent configurations x " << node.states.size() << " states)";
      fail(spec.name, msg.str());
    }
    for (std::size_t c = 0; c < configurations; ++c) {
      double sum = 0.0;
      for (std::size_t s = 0; s < node.states.size(); ++s) {
        const double p = spec.cpt[c * node.states.size() + s];
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
          std::ostringstream msg;
          msg << "CPT row " << c << " (" << detail::describe_configuration(description, net.by_name_, spec, c)
              << ") has entry " << p << " outside [0, 1]";
          fail(spec.name, msg.str());
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "CPT row " << c << " (" << detail::describe_configuration(description, net.by_name_, spec, c)
            << ") sums to " << sum;
        fail(spec.name, msg.str());
      }
    }
    node.cpt = Cpt(configurations, node.states.size(), spec.cpt);
    for (const auto p : node.parents) {
      net.children_[p].push_back(i);
    }
  }

  // Kahn's algorithm, always taking the lowest ready index
  std::vector<std::size_t> pending(n);
  for (NodeIndex i = 0; i < n; ++i) {
    pending[i] = net.nodes_[i].parents.size();
  }
  std::vector<bool> placed(n, false);
  net.topo_order_.reserve(n);
  while (net.topo_order_.size() < n) {
    std::optional<NodeIndex> next;
    for (NodeIndex i = 0; i < n; ++i) {
      if (!placed[i] && pending[i] == 0) {
        next = i;
        break;
      }
    }
    if (!next) {
      std::string members;
      for (NodeIndex i = 0; i < n; ++i) {
        if (!placed[i]) {
          members += (members.empty() ? "" : ", ") + net.nodes_[i].name;
        }
      }
      throw Error(ErrorCode::invalid_network, "directed cycle among nodes: " + members);
    }
    placed[*next] = true;
    net.topo_order_.push_back(*next);
    for (const auto child : net.children_[*next]) {
      --pending[child];
    }
  }
  return net;
}

}  // namespace bnmc
