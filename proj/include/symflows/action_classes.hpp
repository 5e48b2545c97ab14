// Copyright 2026 The symflows Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Partitioning the actions available at one graph into isomorphic-action
// classes, exactly (canonical form of each successor) or approximately
// (positional encodings).

#include <string>
#include <unordered_map>
#include <vector>

#include "symflows/graph.hpp"
#include "symflows/pe.hpp"

namespace symflows::graph {

struct ActionClass {
  GraphAction representative;
  std::vector<GraphAction> members;

  int multiplicity() const { return static_cast<int>(members.size()); }
};

namespace detail {

inline std::string bytes_of(const PEVector& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(std::uint64_t));
}

// Classes appear in order of their first member; members keep input order.
template <class KeyFn>
std::vector<ActionClass> partition_actions(const std::vector<GraphAction>& actions, KeyFn&& key) {
  std::vector<ActionClass> classes;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& a : actions) {
    if (a.is_stop()) {
      classes.push_back({a, {a}});
      continue;
    }
    auto [it, fresh] = slot.try_emplace(key(a), classes.size());
    if (fresh) classes.push_back({a, {}});
    classes[it->second].members.push_back(a);
  }
  return classes;
}

}  // namespace detail

/// Every action in its own class.
inline std::vector<ActionClass> action_classes_singleton(const std::vector<GraphAction>& actions) {
  std::vector<ActionClass> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back({a, {a}});
  return out;
}

/// Exact partition: same class iff the successors are isomorphic. Stop is a class of its own.
inline std::vector<ActionClass> action_classes_oracle(const ColoredGraph& g,
                                                      const std::vector<GraphAction>& actions,
                                                      int max_nodes = kMaxNodes) {
  return detail::partition_actions(
      actions, [&](const GraphAction& a) { return canonical_form(apply_action(g, a, max_nodes)); });
}

/**
 * PE partition. Graph level groups by graph_pe of each successor, so a true
 * class is never split. Node/edge level reads encodings of g itself:
 * add_node by (attach-node encoding, new color), add_edge by the pair
 * encoding of the candidate edge; it can both split and merge.
 */
inline std::vector<ActionClass> action_classes_pe(const ColoredGraph& g,
                                                  const std::vector<GraphAction>& actions,
                                                  const PEConfig& cfg, int max_nodes = kMaxNodes) {
  cfg.validate();
  if (cfg.level == PELevel::graph) {
    // A one-node successor has no walk or edge structure; its color is its encoding.
    if (g.n == 0)
      return detail::partition_actions(actions, [](const GraphAction& a) {
        return detail::bytes_of(PEVector{static_cast<std::uint64_t>(a.kind), a.color});
      });
    return detail::partition_actions(actions, [&](const GraphAction& a) {
      return detail::bytes_of(graph_pe(apply_action(g, a, max_nodes), cfg));
    });
  }
  const LocalEncodings local(g, cfg);
  return detail::partition_actions(actions, [&](const GraphAction& a) {
    PEVector key{static_cast<std::uint64_t>(a.kind)};
    PEVector part;
    switch (a.kind) {
      case ActionKind::add_first_node: part = {a.color}; break;
      case ActionKind::add_node:
        part = local.node(a.u);
        part.push_back(a.color);
        break;
      case ActionKind::add_edge: part = local.pair(a.u, a.v); break;
      case ActionKind::stop: break;
    }
    key.insert(key.end(), part.begin(), part.end());
    return detail::bytes_of(key);
  });
}

}  // namespace symflows::graph
