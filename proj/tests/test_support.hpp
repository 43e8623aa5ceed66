#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bnmc/bnmc.hpp"

namespace bnmc::testing {

inline NodeSpec binary(std::string name, std::vector<std::string> parents, std::vector<double> cpt) {
  return {std::move(name), {"0", "1"}, std::move(parents), std::move(cpt)};
}

/// A -> B with P(A=1) = 0.3, P(B=1|A=1) = 0.9, P(B=1|A=0) = 0.2.
inline BeliefNetwork chain() {
  return BeliefNetwork::validate({{
      binary("A", {}, {0.7, 0.3}),
      binary("B", {"A"}, {0.8, 0.2, 0.1, 0.9}),
  }});
}

/// Single root X with P(X=1) = 0.3.
inline BeliefNetwork single_root() { return BeliefNetwork::validate({{binary("X", {}, {0.7, 0.3})}}); }

/// A -> B with B a copy of A and P(A=1) = 0.5.
inline BeliefNetwork deterministic_chain() {
  return BeliefNetwork::validate({{
      binary("A", {}, {0.5, 0.5}),
      binary("B", {"A"}, {1.0, 0.0, 0.0, 1.0}),
  }});
}

inline BeliefNetwork coins(std::size_t n) {
  NetworkDescription d;
  for (std::size_t i = 0; i < n; ++i) {
    d.nodes.push_back(binary("C" + std::to_string(i), {}, {0.5, 0.5}));
  }
  return BeliefNetwork::validate(d);
}

/// P -> E with P(E=1|P=1) = 0.9 and P(E=1|P=0) = 0.45.
inline BeliefNetwork evidence_pair() {
  return BeliefNetwork::validate({{
      binary("P", {}, {0.5, 0.5}),
      binary("E", {"P"}, {0.55, 0.45, 0.1, 0.9}),
  }});
}

/// G -> H -> F with H in {a, b, c}; given F = 1 the posteriors of H are 0.6, 0.3, 0.1.
inline BeliefNetwork two_hypothesis() {
  return BeliefNetwork::validate({{
      binary("G", {}, {0.5, 0.5}),
      {"H", {"a", "b", "c"}, {"G"}, {0.6, 0.2, 0.2, 0.2, 0.6, 0.2}},
      binary("F", {"H"}, {0.25, 0.75, 0.625, 0.375, 0.75, 0.25}),
  }});
}

inline Assignment bind(const BeliefNetwork& net, std::initializer_list<std::pair<const char*, std::size_t>> items) {
  auto a = net.empty_assignment();
  for (const auto& [name, state] : items) {
    a.bind(*net.find(name), state);
  }
  return a;
}

inline Query query(const BeliefNetwork& net, const char* name, std::size_t state) { return {*net.find(name), state}; }

/// Exact Pr[evidence] by summing joint_probability over every full assignment.
inline double brute_force_marginal(const BeliefNetwork& net, const Assignment& partial) {
  auto full = net.empty_assignment();
  for (NodeIndex i = 0; i < net.size(); ++i) {
    full.bind(i, 0);
  }
  double total = 0.0;
  while (true) {
    bool consistent = true;
    for (NodeIndex i = 0; i < net.size(); ++i) {
      if (const auto s = partial.get(i); s && *s != full[i]) {
        consistent = false;
        break;
      }
    }
    if (consistent) {
      total += joint_probability(net, full);
    }
    NodeIndex i = 0;
    for (; i < net.size(); ++i) {
      if (full[i] + 1 < net.node(i).state_count()) {
        full.bind(i, full[i] + 1);
        break;
      }
      full.bind(i, 0);
    }
    if (i == net.size()) {
      return total;
    }
  }
}

}  // namespace bnmc::testing
