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

/**
 * Colored-graph building environment.
 *
 * s0 is the empty graph; the first action picks the color of the first
 * node. Afterwards a node may be attached to any existing node, a missing
 * edge may be added, or the episode stopped, so every state is a connected
 * graph and every non-empty state can terminate.
 *
 * States are stored canonically labeled, so the labeled key of a state is its
 * canonical form. The symmetry mode changes only how actions are grouped.
 */

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "symflows/action_classes.hpp"
#include "symflows/error.hpp"
#include "symflows/gfn.hpp"
#include "symflows/graph.hpp"
#include "symflows/model.hpp"
#include "symflows/pe.hpp"

namespace symflows::graph {

enum class RewardKind { counting, neighbors, cliques };
enum class GraphSymmetry { vanilla, oracle, pe };

inline std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::counting: return "counting";
    case RewardKind::neighbors: return "neighbors";
    case RewardKind::cliques: return "cliques";
  }
  return "?";
}

inline std::string_view to_string(GraphSymmetry m) {
  switch (m) {
    case GraphSymmetry::vanilla: return "vanilla";
    case GraphSymmetry::oracle: return "oracle";
    case GraphSymmetry::pe: return "pe";
  }
  return "?";
}

inline RewardKind parse_reward(std::string_view s) {
  if (s == "counting") return RewardKind::counting;
  if (s == "neighbors") return RewardKind::neighbors;
  if (s == "cliques") return RewardKind::cliques;
  throw ConfigError("unknown reward '" + std::string(s) + "' (expected counting, neighbors or cliques)");
}

inline GraphSymmetry parse_graph_symmetry(std::string_view s) {
  if (s == "vanilla") return GraphSymmetry::vanilla;
  if (s == "oracle") return GraphSymmetry::oracle;
  if (s == "pe") return GraphSymmetry::pe;
  throw ConfigError("unknown graph symmetry '" + std::string(s) + "' (expected vanilla, oracle or pe)");
}

inline void require_nonempty(const ColoredGraph& g) {
  if (g.n == 0) throw Error("reward is undefined on the empty graph");
}

/// r0 + |n0 - n1|
inline double reward_counting(const ColoredGraph& g, double r0) {
  require_nonempty(g);
  int n0 = 0, n1 = 0;
  for (int v = 0; v < g.n; ++v) {
    n0 += g.colors[v] == 0;
    n1 += g.colors[v] == 1;
  }
  return r0 + std::abs(n0 - n1);
}

/// r0 + (fraction of nodes with an even number of opposite-colored neighbors)
inline double reward_neighbors(const ColoredGraph& g, double r0) {
  require_nonempty(g);
  int even = 0;
  for (int v = 0; v < g.n; ++v) {
    int opposite = 0;
    for (int u = 0; u < g.n; ++u) opposite += g.has_edge(v, u) && g.colors[u] != g.colors[v];
    even += opposite % 2 == 0;
  }
  return r0 + static_cast<double>(even) / g.n;
}

/// r0 + (number of 4-cliques with at least 3 nodes of one color)
inline double reward_cliques(const ColoredGraph& g, double r0) {
  require_nonempty(g);
  int count = 0;
  for (int a = 0; a < g.n; ++a)
    for (int b = a + 1; b < g.n; ++b) {
      if (!g.has_edge(a, b)) continue;
      for (int c = b + 1; c < g.n; ++c) {
        if (!g.has_edge(a, c) || !g.has_edge(b, c)) continue;
        for (int d = c + 1; d < g.n; ++d) {
          if (!g.has_edge(a, d) || !g.has_edge(b, d) || !g.has_edge(c, d)) continue;
          std::array<int, kMaxNodes> per_color{};
          for (int v : {a, b, c, d}) ++per_color[g.colors[v]];
          bool dominant = false;
          for (int k : per_color) dominant = dominant || k >= 3;
          count += dominant;
        }
      }
    }
  return r0 + count;
}

inline double graph_reward(const ColoredGraph& g, RewardKind kind, double r0) {
  switch (kind) {
    case RewardKind::counting: return reward_counting(g, r0);
    case RewardKind::neighbors: return reward_neighbors(g, r0);
    case RewardKind::cliques: return reward_cliques(g, r0);
  }
  throw Error("unknown reward kind");
}

/// Legal forward actions in a fixed order: first nodes, attachments, edges, stop.
inline std::vector<GraphAction> graph_legal_actions(const ColoredGraph& g, int n_max, int n_colors) {
  std::vector<GraphAction> out;
  if (g.n == 0) {
    for (int c = 0; c < n_colors; ++c) out.push_back(GraphAction::first_node(c));
    return out;
  }
  if (g.n < n_max)
    for (int v = 0; v < g.n; ++v)
      for (int c = 0; c < n_colors; ++c) out.push_back(GraphAction::attach(v, c));
  for (int u = 0; u < g.n; ++u)
    for (int v = u + 1; v < g.n; ++v)
      if (!g.has_edge(u, v)) out.push_back(GraphAction::edge(u, v));
  out.push_back(GraphAction::stop_action());
  return out;
}

/// Removal of a leaf node (or of the last node), or of an edge on a cycle.
struct BackwardAction {
  enum class Kind : std::uint8_t { remove_node, remove_edge } kind = Kind::remove_node;
  int u = 0;
  int v = 0;
};

inline std::vector<BackwardAction> graph_backward_actions(const ColoredGraph& g) {
  std::vector<BackwardAction> out;
  if (g.n == 1) {
    out.push_back({BackwardAction::Kind::remove_node, 0, 0});
    return out;
  }
  for (int v = 0; v < g.n; ++v)
    if (g.degree(v) == 1) out.push_back({BackwardAction::Kind::remove_node, v, 0});
  for (int u = 0; u < g.n; ++u)
    for (int v = u + 1; v < g.n; ++v) {
      if (!g.has_edge(u, v)) continue;
      ColoredGraph h = g;
      h.remove_edge(u, v);
      if (h.is_connected()) out.push_back({BackwardAction::Kind::remove_edge, u, v});
    }
  return out;
}

inline ColoredGraph apply_backward(const ColoredGraph& g, const BackwardAction& b) {
  if (b.kind == BackwardAction::Kind::remove_node) return g.without_node(b.u);
  ColoredGraph h = g;
  h.remove_edge(b.u, b.v);
  return h;
}

struct GraphEnvConfig {
  int n_max = 7;
  int n_colors = 2;
  RewardKind reward = RewardKind::counting;
  double r0 = 0.1;
  GraphSymmetry symmetry = GraphSymmetry::oracle;
  PEConfig pe{};

  void validate() const {
    if (n_max < 1) throw ConfigError("n_max must be at least 1");
    if (n_max > kMaxNodes) throw ConfigError("n_max must be at most " + std::to_string(kMaxNodes));
    if (n_colors < 1) throw ConfigError("n_colors must be at least 1");
    if (n_colors > 16) throw ConfigError("n_colors must be at most 16");
    if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
    if (symmetry == GraphSymmetry::pe) pe.validate();
  }
};

class GraphEnv {
 public:
  using State = ColoredGraph;

  explicit GraphEnv(GraphEnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const GraphEnvConfig& config() const { return cfg_; }

  ColoredGraph initial_state() const { return {}; }

  std::vector<GraphAction> legal_actions(const ColoredGraph& g) const {
    return graph_legal_actions(g, cfg_.n_max, cfg_.n_colors);
  }

  /// Concrete action classes at g under the configured grouping.
  std::vector<ActionClass> action_classes(const ColoredGraph& g) const {
    const auto actions = legal_actions(g);
    switch (cfg_.symmetry) {
      case GraphSymmetry::vanilla: return action_classes_singleton(actions);
      case GraphSymmetry::oracle: return action_classes_oracle(g, actions, cfg_.n_max);
      case GraphSymmetry::pe: return action_classes_pe(g, actions, cfg_.pe, cfg_.n_max);
    }
    throw Error("unknown symmetry mode");
  }

  const std::vector<StepClass<ColoredGraph>>& forward_classes(const ColoredGraph& g) const {
    auto [it, fresh] = forward_cache_.try_emplace(key(g));
    if (!fresh) return it->second;
    auto& out = it->second;
    const auto classes = action_classes(g);
    out.reserve(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
      StepClass<ColoredGraph> c;
      c.slot = static_cast<int>(i);
      c.stop = classes[i].representative.is_stop();
      if (!c.stop)
        for (const auto& a : classes[i].members)
          c.successors.push_back(canonicalize(apply_action(g, a, cfg_.n_max)));
      out.push_back(std::move(c));
    }
    return out;
  }

  const std::vector<BackClass<ColoredGraph>>& backward_classes(const ColoredGraph& g) const {
    auto [it, fresh] = backward_cache_.try_emplace(key(g));
    if (!fresh) return it->second;
    auto& out = it->second;
    const auto actions = graph_backward_actions(g);
    std::unordered_map<std::string, std::size_t> slot;
    std::unique_ptr<LocalEncodings> local;
    if (cfg_.symmetry == GraphSymmetry::pe && cfg_.pe.level == PELevel::node_edge)
      local = std::make_unique<LocalEncodings>(g, cfg_.pe);
    for (const auto& b : actions) {
      ColoredGraph parent = canonicalize(apply_backward(g, b));
      std::string group;
      switch (cfg_.symmetry) {
        case GraphSymmetry::vanilla: group = std::to_string(out.size()); break;
        case GraphSymmetry::oracle: group = key(parent); break;
        case GraphSymmetry::pe:
          if (!local) {
            group = detail::bytes_of(graph_pe(parent, cfg_.pe));
          } else {
            PEVector v{static_cast<std::uint64_t>(b.kind)};
            const PEVector part = b.kind == BackwardAction::Kind::remove_node ? local->node(b.u)
                                                                              : local->pair(b.u, b.v);
            v.insert(v.end(), part.begin(), part.end());
            group = detail::bytes_of(v);
          }
          break;
      }
      auto [pos, added] = slot.try_emplace(group, out.size());
      if (added) out.push_back({static_cast<int>(out.size()), {}});
      out[pos->second].parents.push_back(std::move(parent));
    }
    return out;
  }

  double reward(const ColoredGraph& g) const { return graph_reward(g, cfg_.reward, cfg_.r0); }

  std::string key(const ColoredGraph& g) const { return labeled_key(g); }

  ColoredGraph from_key(std::string_view k) const { return decode_key(k); }

  long grade(const ColoredGraph& g) const { return 32L * g.n + g.edge_count(); }

  int max_trajectory_length() const { return cfg_.n_max * (cfg_.n_max - 1) / 2 + 2; }

  std::string describe() const {
    std::string s = "env=graph n_max=" + std::to_string(cfg_.n_max) +
                    " n_colors=" + std::to_string(cfg_.n_colors) +
                    " reward=" + std::string(to_string(cfg_.reward)) +
                    " r0=" + checkpoint::format_double(cfg_.r0) +
                    " symmetry=" + std::string(to_string(cfg_.symmetry));
    if (cfg_.symmetry == GraphSymmetry::pe)
      s += " pe=" + cfg_.pe.name() + " pe_level=" + (cfg_.pe.level == PELevel::graph ? "graph" : "node_edge");
    return s;
  }

  void clear_cache() const {
    forward_cache_.clear();
    backward_cache_.clear();
  }

 private:
  GraphEnvConfig cfg_;
  mutable std::unordered_map<std::string, std::vector<StepClass<ColoredGraph>>> forward_cache_;
  mutable std::unordered_map<std::string, std::vector<BackClass<ColoredGraph>>> backward_cache_;
};

/// Tabular input for graph states: the canonical key plus the class counts of the state.
struct GraphTabularEncoder {
  const GraphEnv* env = nullptr;

  ModelInput operator()(const ColoredGraph& g) const {
    ModelInput x;
    x.key = env->key(g);
    x.forward_size = static_cast<int>(env->forward_classes(g).size());
    x.backward_size = g.n == 0 ? 0 : static_cast<int>(env->backward_classes(g).size());
    return x;
  }
};

/**
 * Canonical keys of every graph reachable from the empty graph, in discovery
 * order. With `connected_only` the moves are the environment's (attach a
 * node, add an edge); otherwise isolated nodes may be added as well, which
 * reaches every colored graph on at most n_max nodes.
 */
inline std::vector<CanonicalKey> enumerate_graph_keys(int n_max, int n_colors, bool connected_only = true,
                                                      std::size_t budget = 5'000'000) {
  std::vector<CanonicalKey> keys{canonical_form(ColoredGraph{})};
  std::unordered_map<CanonicalKey, std::size_t> seen{{keys[0], 0}};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const ColoredGraph g = decode_key(keys[i]);
    std::vector<ColoredGraph> next;
    if (connected_only) {
      for (const auto& a : graph_legal_actions(g, n_max, n_colors))
        if (!a.is_stop()) next.push_back(apply_action(g, a, n_max));
    } else {
      if (g.n < n_max)
        for (int c = 0; c < n_colors; ++c) {
          ColoredGraph h = g;
          h.add_node(c);
          next.push_back(h);
        }
      for (int u = 0; u < g.n; ++u)
        for (int v = u + 1; v < g.n; ++v)
          if (!g.has_edge(u, v)) next.push_back(apply_action(g, GraphAction::edge(u, v), n_max));
    }
    for (const auto& h : next) {
      CanonicalKey k = canonical_form(h);
      if (seen.count(k)) continue;
      if (keys.size() >= budget) throw Error("state budget exceeded (" + std::to_string(budget) + " states)");
      seen.emplace(k, keys.size());
      keys.push_back(std::move(k));
    }
  }
  return keys;
}

/// State count under one counting convention.
struct CountConvention {
  bool connected_only = true;
  bool include_empty = false;
  std::size_t count = 0;
};

/// Counts of distinct colored graphs on at most n_max nodes under the four
/// combinations of connectivity and empty-graph conventions.
inline std::vector<CountConvention> reconcile_state_counts(int n_max, int n_colors) {
  std::vector<CountConvention> out;
  for (bool connected : {true, false}) {
    const std::size_t with_empty = enumerate_graph_keys(n_max, n_colors, connected).size();
    out.push_back({connected, true, with_empty});
    out.push_back({connected, false, with_empty - 1});
  }
  return out;
}

}  // namespace symflows::graph
