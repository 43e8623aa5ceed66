#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"
#include "bnmc/sampler.hpp"

/**
 * \file
 * \brief Network files and command-line assignment syntax.
 *
 * A network file is a JSON document:
 *
 *     {"format": "bnmc-1",
 *      "nodes": [{"name": "A", "states": ["0", "1"], "parents": [], "cpt": [0.7, 0.3]}, ...]}
 *
 * `cpt` is row-major over parent configurations (first parent most
 * significant), each row listing probabilities in state order.
 */

namespace bnmc {

inline constexpr std::string_view kFormatVersion = "bnmc-1";

inline NetworkDescription parse_description(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed network file: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatVersion) {
      throw Error(ErrorCode::parse_error, "network file must declare \"format\": \"bnmc-1\"");
    }
    NetworkDescription description;
    for (const auto& node : doc.at("nodes")) {
      NodeSpec spec;
      spec.name = node.at("name").get<std::string>();
      spec.states = node.at("states").get<std::vector<std::string>>();
      spec.parents = node.value("parents", std::vector<std::string>{});
      spec.cpt = node.at("cpt").get<std::vector<double>>();
      description.nodes.push_back(std::move(spec));
    }
    return description;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed network file: ") + e.what());
  }
}

inline BeliefNetwork parse_network(std::string_view text) { return BeliefNetwork::validate(parse_description(text)); }

inline BeliefNetwork read_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::parse_error, "cannot open network file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_network(buffer.str());
}

inline std::string format_network(const NetworkDescription& description) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& node : description.nodes) {
    nlohmann::ordered_json entry;
    entry["name"] = node.name;
    entry["states"] = node.states;
    entry["parents"] = node.parents;
    entry["cpt"] = node.cpt;
    doc["nodes"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

inline void write_network(const std::string& path, const NetworkDescription& description) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::parse_error, "cannot write network file '" + path + "'");
  }
  out << format_network(description);
}

namespace detail {

inline std::vector<std::pair<std::string, std::string>> split_bindings(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, end - start);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
        throw Error(ErrorCode::parse_error, "expected NODE=STATE, got '" + std::string(item) + "'");
      }
      out.emplace_back(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    }
    start = end + 1;
  }
  return out;
}

inline std::pair<NodeIndex, StateIndex> resolve(const BeliefNetwork& network, const std::string& name,
                                                const std::string& state) {
  const auto node = network.find(name);
  if (!node) {
    throw Error(ErrorCode::parse_error, "unknown node '" + name + "'");
  }
  const auto s = network.node(*node).find_state(state);
  if (!s) {
    throw Error(ErrorCode::parse_error, "node '" + name + "' has no state '" + state + "'");
  }
  return {*node, *s};
}

}  // namespace detail

/// Parses "N=s,M=t" against state labels; an empty string is the empty assignment.
inline Assignment parse_assignment(const BeliefNetwork& network, std::string_view text) {
  Assignment assignment = network.empty_assignment();
  for (const auto& [name, state] : detail::split_bindings(text)) {
    const auto [node, s] = detail::resolve(network, name, state);
    if (assignment.is_bound(node)) {
      throw Error(ErrorCode::parse_error, "node '" + name + "' bound twice");
    }
    assignment.bind(node, s);
  }
  return assignment;
}

inline std::vector<Query> parse_queries(const BeliefNetwork& network, std::string_view text) {
  std::vector<Query> queries;
  for (const auto& [name, state] : detail::split_bindings(text)) {
    const auto [node, s] = detail::resolve(network, name, state);
    queries.push_back({node, s});
  }
  return queries;
}

inline std::string format_assignment(const BeliefNetwork& network, const Assignment& assignment) {
  std::string out;
  for (const auto node : assignment.bound_nodes()) {
    out += (out.empty() ? "" : ",") + network.node(node).name + "=" + network.node(node).states[assignment[node]];
  }
  return out;
}

}  // namespace bnmc
