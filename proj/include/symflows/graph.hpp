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
 * Small undirected vertex-colored graphs and exact canonical labeling.
 *
 * Graphs hold at most kMaxNodes vertices; adjacency is a bitmask per row.
 * The canonical form is a byte string
 *
 *   0x01 | n | color[0..n) | upper-triangle adjacency bits
 *
 * where the adjacency bits are enumerated row-major ((0,1), (0,2), ...,
 * (1,2), ...), packed MSB-first into ceil(n(n-1)/2 / 8) bytes. Nodes are
 * first split into cells ordered by (color ascending, degree descending);
 * the key is the lexicographic minimum over every permutation that keeps
 * this cell order. Brute force is intended: n <= 8.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "symflows/error.hpp"

namespace symflows::graph {

inline constexpr int kMaxNodes = 8;
inline constexpr std::uint8_t kCanonicalVersion = 0x01;

using CanonicalKey = std::string;

struct ColoredGraph {
  int n = 0;
  std::array<std::uint8_t, kMaxNodes> adj{};
  std::array<std::uint8_t, kMaxNodes> colors{};

  bool has_edge(int u, int v) const { return (adj[u] >> v) & 1U; }
  int degree(int v) const { return std::popcount(adj[v]); }

  int edge_count() const {
    int twice = 0;
    for (int v = 0; v < n; ++v) twice += degree(v);
    return twice / 2;
  }

  int add_node(int color) {
    if (n >= kMaxNodes) throw Error("graph too large: node capacity exceeded");
    colors[n] = static_cast<std::uint8_t>(color);
    adj[n] = 0;
    return n++;
  }

  void add_edge(int u, int v) {
    if (u == v || u < 0 || v < 0 || u >= n || v >= n) throw Error("invalid edge endpoints");
    adj[u] |= static_cast<std::uint8_t>(1U << v);
    adj[v] |= static_cast<std::uint8_t>(1U << u);
  }

  void remove_edge(int u, int v) {
    adj[u] &= static_cast<std::uint8_t>(~(1U << v));
    adj[v] &= static_cast<std::uint8_t>(~(1U << u));
  }

  bool is_connected() const {
    if (n <= 1) return true;
    std::uint32_t seen = 1, frontier = 1;
    while (frontier != 0) {
      std::uint32_t next = 0;
      for (int v = 0; v < n; ++v)
        if ((frontier >> v) & 1U) next |= adj[v];
      next &= ~seen;
      seen |= next;
      frontier = next;
    }
    return seen == (1U << n) - 1U;
  }

  // Node i of the result is node order[i] of *this.
  ColoredGraph permuted(std::span<const int> order) const {
    ColoredGraph out;
    out.n = static_cast<int>(order.size());
    std::array<int, kMaxNodes> inverse{};
    inverse.fill(-1);
    for (int i = 0; i < out.n; ++i) inverse[order[i]] = i;
    for (int i = 0; i < out.n; ++i) {
      const int src = order[i];
      out.colors[i] = colors[src];
      std::uint8_t row = 0;
      for (int j = 0; j < n; ++j)
        if (has_edge(src, j) && inverse[j] >= 0) row |= static_cast<std::uint8_t>(1U << inverse[j]);
      out.adj[i] = row;
    }
    return out;
  }

  // Drops node v and its edges; nodes above v shift down by one.
  ColoredGraph without_node(int v) const {
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (i != v) keep.push_back(i);
    return permuted(keep);
  }

  friend bool operator==(const ColoredGraph& a, const ColoredGraph& b) {
    if (a.n != b.n) return false;
    for (int i = 0; i < a.n; ++i)
      if (a.adj[i] != b.adj[i] || a.colors[i] != b.colors[i]) return false;
    return true;
  }
};

inline ColoredGraph make_graph(std::span<const int> colors,
                               std::span<const std::pair<int, int>> edges) {
  ColoredGraph g;
  for (int c : colors) g.add_node(c);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

inline ColoredGraph make_graph(std::initializer_list<int> colors,
                               std::initializer_list<std::pair<int, int>> edges) {
  return make_graph(std::span<const int>(colors.begin(), colors.size()),
                    std::span<const std::pair<int, int>>(edges.begin(), edges.size()));
}

inline ColoredGraph path_graph(int n, int color = 0) {
  ColoredGraph g;
  for (int i = 0; i < n; ++i) g.add_node(color);
  for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

inline ColoredGraph cycle_graph(int n, int color = 0) {
  ColoredGraph g = path_graph(n, color);
  if (n >= 3) g.add_edge(n - 1, 0);
  return g;
}

inline ColoredGraph complete_graph(int n, int color = 0) {
  ColoredGraph g;
  for (int i = 0; i < n; ++i) g.add_node(color);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.add_edge(i, j);
  return g;
}

inline ColoredGraph star_graph(int leaves, int color = 0) {
  ColoredGraph g;
  g.add_node(color);
  for (int i = 0; i < leaves; ++i) g.add_edge(0, g.add_node(color));
  return g;
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

enum class ActionKind : std::uint8_t { add_first_node, add_node, add_edge, stop };

struct GraphAction {
  ActionKind kind = ActionKind::stop;
  std::uint8_t u = 0;  // attach vertex for add_node, first endpoint for add_edge
  std::uint8_t v = 0;  // second endpoint for add_edge
  std::uint8_t color = 0;

  static GraphAction first_node(int color) {
    return {ActionKind::add_first_node, 0, 0, static_cast<std::uint8_t>(color)};
  }
  static GraphAction attach(int vertex, int color) {
    return {ActionKind::add_node, static_cast<std::uint8_t>(vertex), 0,
            static_cast<std::uint8_t>(color)};
  }
  static GraphAction edge(int a, int b) {
    if (a > b) std::swap(a, b);
    return {ActionKind::add_edge, static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), 0};
  }
  static GraphAction stop_action() { return {}; }

  bool is_stop() const { return kind == ActionKind::stop; }

  friend bool operator==(const GraphAction&, const GraphAction&) = default;
};

inline std::string to_string(const GraphAction& a) {
  switch (a.kind) {
    case ActionKind::add_first_node: return "first(" + std::to_string(a.color) + ")";
    case ActionKind::add_node:
      return "node(" + std::to_string(a.u) + "," + std::to_string(a.color) + ")";
    case ActionKind::add_edge:
      return "edge(" + std::to_string(a.u) + "," + std::to_string(a.v) + ")";
    case ActionKind::stop: return "stop";
  }
  return "?";
}

// Applies a non-stop action; `max_nodes` bounds node additions.
inline ColoredGraph apply_action(const ColoredGraph& g, const GraphAction& a,
                                 int max_nodes = kMaxNodes) {
  ColoredGraph out = g;
  switch (a.kind) {
    case ActionKind::add_first_node:
      if (g.n != 0) throw Error("illegal action: add_first_node on a non-empty graph");
      out.add_node(a.color);
      return out;
    case ActionKind::add_node: {
      if (a.u >= g.n) throw Error("illegal action: attach vertex out of range");
      if (g.n >= max_nodes) throw Error("illegal action: node limit reached");
      const int fresh = out.add_node(a.color);
      out.add_edge(a.u, fresh);
      return out;
    }
    case ActionKind::add_edge:
      if (a.u >= a.v || a.v >= g.n) throw Error("illegal action: bad edge endpoints");
      if (g.has_edge(a.u, a.v)) throw Error("illegal action: edge already present");
      out.add_edge(a.u, a.v);
      return out;
    case ActionKind::stop: break;
  }
  throw Error("illegal action: stop has no successor graph");
}

// ---------------------------------------------------------------------------
// Canonical labeling
// ---------------------------------------------------------------------------

struct Labeling {
  CanonicalKey key;
  std::array<int, kMaxNodes> order{};  // order[position] = original node
};

namespace detail {

inline std::uint32_t adjacency_code(const ColoredGraph& g, const std::array<int, kMaxNodes>& order) {
  std::uint32_t code = 0;
  for (int i = 0; i < g.n; ++i) {
    const std::uint8_t row = g.adj[order[i]];
    for (int j = i + 1; j < g.n; ++j) code = (code << 1) | ((row >> order[j]) & 1U);
  }
  return code;
}

inline CanonicalKey encode(const ColoredGraph& g, const std::array<int, kMaxNodes>& order,
                           std::uint32_t code) {
  const int bits = g.n * (g.n - 1) / 2;
  CanonicalKey key;
  key.reserve(2 + g.n + (bits + 7) / 8);
  key.push_back(static_cast<char>(kCanonicalVersion));
  key.push_back(static_cast<char>(g.n));
  for (int i = 0; i < g.n; ++i) key.push_back(static_cast<char>(g.colors[order[i]]));
  std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
  for (int t = 0; t < bits; ++t)
    if ((code >> (bits - 1 - t)) & 1U) packed[t / 8] |= static_cast<std::uint8_t>(0x80U >> (t % 8));
  for (auto b : packed) key.push_back(static_cast<char>(b));
  return key;
}

}  // namespace detail

inline Labeling canonical_labeling(const ColoredGraph& g) {
  if (g.n < 0 || g.n > kMaxNodes) throw Error("graph too large for exact canonicalization");
  Labeling best;
  std::array<int, kMaxNodes> order{};
  std::iota(order.begin(), order.begin() + g.n, 0);
  auto cell_less = [&](int a, int b) {
    if (g.colors[a] != g.colors[b]) return g.colors[a] < g.colors[b];
    if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
    return a < b;
  };
  std::sort(order.begin(), order.begin() + g.n, cell_less);

  // Cell boundaries: [starts[k], starts[k+1]).
  std::vector<int> starts{0};
  for (int i = 1; i < g.n; ++i) {
    const int a = order[i - 1], b = order[i];
    if (g.colors[a] != g.colors[b] || g.degree(a) != g.degree(b)) starts.push_back(i);
  }
  starts.push_back(g.n);
  const int cells = static_cast<int>(starts.size()) - 1;

  std::uint32_t best_code = 0;
  bool have = false;
  while (true) {
    const std::uint32_t code = detail::adjacency_code(g, order);
    if (!have || code < best_code) {
      best_code = code;
      best.order = order;
      have = true;
    }
    // Odometer over per-cell permutations; next_permutation resets a cell to
    // sorted order when it wraps.
    int k = cells - 1;
    for (; k >= 0; --k)
      if (std::next_permutation(order.begin() + starts[k], order.begin() + starts[k + 1])) break;
    if (k < 0) break;
  }
  best.key = detail::encode(g, best.order, best_code);
  return best;
}

inline CanonicalKey canonical_form(const ColoredGraph& g) { return canonical_labeling(g).key; }

// Encoding under the graph's own labeling. Equals canonical_form(g) exactly
// when g is already canonically labeled, which is how environment states are
// stored.
inline CanonicalKey labeled_key(const ColoredGraph& g) {
  std::array<int, kMaxNodes> order{};
  std::iota(order.begin(), order.begin() + g.n, 0);
  return detail::encode(g, order, detail::adjacency_code(g, order));
}

// Relabels g into its canonical node order.
inline ColoredGraph canonicalize(const ColoredGraph& g) {
  const Labeling lab = canonical_labeling(g);
  return g.permuted(std::span<const int>(lab.order.data(), static_cast<std::size_t>(g.n)));
}

inline bool is_isomorphic(const ColoredGraph& a, const ColoredGraph& b) {
  if (a.n != b.n || a.edge_count() != b.edge_count()) return false;
  return canonical_form(a) == canonical_form(b);
}

// Inverse of the key encoding; yields the canonically labeled graph.
inline ColoredGraph decode_key(std::string_view key) {
  if (key.size() < 2 || static_cast<std::uint8_t>(key[0]) != kCanonicalVersion)
    throw Error("bad canonical key: missing version byte");
  const int n = static_cast<std::uint8_t>(key[1]);
  const int bits = n * (n - 1) / 2;
  if (n > kMaxNodes || key.size() != static_cast<std::size_t>(2 + n + (bits + 7) / 8))
    throw Error("bad canonical key: length mismatch");
  ColoredGraph g;
  for (int i = 0; i < n; ++i) g.add_node(static_cast<std::uint8_t>(key[2 + i]));
  int t = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++t) {
      const auto byte = static_cast<std::uint8_t>(key[2 + n + t / 8]);
      if ((byte >> (7 - t % 8)) & 1U) g.add_edge(i, j);
    }
  return g;
}

inline std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (char c : bytes) {
    const auto b = static_cast<std::uint8_t>(c);
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline std::string from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error("invalid hex digit");
  };
  if (hex.size() % 2 != 0) throw Error("odd-length hex string");
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  return out;
}

}  // namespace symflows::graph
