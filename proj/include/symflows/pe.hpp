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
 * Positional encodings for colored graphs.
 *
 *  - 1-WL color refinement signatures (64-bit stable hashes).
 *  - Colored random-walk encodings built from powers of the random walk
 *    matrix P = A D^{-1} (P_ij = A_ij / d_j, zero column for isolated nodes).
 *  - Edge features e_ij = x_i*x_i + x_j*x_j (elementwise) over node features
 *    x_i = (color value, random-walk vector).
 *
 * Every routine is templated on the scalar. `double` serves inspection and
 * tests; ModP (arithmetic modulo the Mersenne prime 2^61 - 1) is what the
 * equality keys use: random-walk entries are rationals with small
 * denominators, so field arithmetic equates exactly the equal rationals and
 * separates distinct ones up to a ~2^-61 collision chance.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/graph.hpp"
#include "symflows/rng.hpp"

namespace symflows::graph {

class ModP {
 public:
  static constexpr std::uint64_t kModulus = (std::uint64_t{1} << 61) - 1;

  constexpr ModP() = default;
  constexpr explicit ModP(std::int64_t v)
      : v_(v >= 0 ? static_cast<std::uint64_t>(v) % kModulus
                  : kModulus - (static_cast<std::uint64_t>(-v) % kModulus)) {
    if (v_ == kModulus) v_ = 0;
  }

  constexpr std::uint64_t value() const { return v_; }

  friend constexpr ModP operator+(ModP a, ModP b) {
    std::uint64_t r = a.v_ + b.v_;
    if (r >= kModulus) r -= kModulus;
    return from_raw(r);
  }
  friend constexpr ModP operator*(ModP a, ModP b) {
    const unsigned __int128 z = static_cast<unsigned __int128>(a.v_) * b.v_;
    std::uint64_t r = static_cast<std::uint64_t>(z & kModulus) + static_cast<std::uint64_t>(z >> 61);
    if (r >= kModulus) r -= kModulus;
    return from_raw(r);
  }
  ModP& operator+=(ModP o) { return *this = *this + o; }
  ModP& operator*=(ModP o) { return *this = *this * o; }
  friend constexpr bool operator==(ModP a, ModP b) { return a.v_ == b.v_; }

  ModP inverse() const {
    if (v_ == 0) throw Error("ModP: inverse of zero");
    ModP result(1), base = *this;
    for (std::uint64_t e = kModulus - 2; e != 0; e >>= 1) {
      if (e & 1U) result *= base;
      base *= base;
    }
    return result;
  }

 private:
  static constexpr ModP from_raw(std::uint64_t r) {
    ModP m;
    m.v_ = r;
    return m;
  }
  std::uint64_t v_ = 0;
};

namespace detail {

template <class S>
S scalar_from(int v) {
  if constexpr (std::is_same_v<S, ModP>)
    return ModP(v);
  else
    return static_cast<S>(v);
}

template <class S>
S reciprocal(int v) {
  if constexpr (std::is_same_v<S, ModP>)
    return ModP(v).inverse();
  else
    return S{1} / static_cast<S>(v);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t x) {
  return splitmix64(h ^ (x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

}  // namespace detail

// Fixed seed so signatures are stable across runs and builds.
inline constexpr std::uint64_t kWlSeed = 0x5F3759DF2A6B1C4DULL;

/// Color id k is valued as the (k+1)-th prime: 2, 3, 5, ...
inline int color_value(int color) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (color < 0 || color >= static_cast<int>(std::size(kPrimes)))
    throw Error("color id out of range for the color value table");
  return kPrimes[color];
}

/**
 * 1-WL refinement. Each round replaces a node's signature by a hash of
 * (own signature, sorted neighbor signatures); stops once the number of
 * distinct signatures no longer grows, or after `rounds` rounds
 * (negative: n rounds). With `use_colors` false every node starts equal.
 */
inline std::vector<std::uint64_t> wl_node_signatures(const ColoredGraph& g, int rounds = -1,
                                                     bool use_colors = true) {
  if (rounds < 0) rounds = g.n;
  std::vector<std::uint64_t> sig(g.n);
  for (int i = 0; i < g.n; ++i)
    sig[i] = detail::hash_combine(kWlSeed, use_colors ? g.colors[i] + 1U : 0U);
  auto distinct = [](std::vector<std::uint64_t> v) {
    std::sort(v.begin(), v.end());
    return std::unique(v.begin(), v.end()) - v.begin();
  };
  auto classes = distinct(sig);
  std::vector<std::uint64_t> neighbors, next(g.n);
  for (int r = 0; r < rounds; ++r) {
    for (int i = 0; i < g.n; ++i) {
      neighbors.clear();
      for (int j = 0; j < g.n; ++j)
        if (g.has_edge(i, j)) neighbors.push_back(sig[j]);
      std::sort(neighbors.begin(), neighbors.end());
      std::uint64_t h = detail::hash_combine(kWlSeed, sig[i]);
      for (auto x : neighbors) h = detail::hash_combine(h, x);
      next[i] = detail::hash_combine(h, neighbors.size());
    }
    sig.swap(next);
    const auto now = distinct(sig);
    if (now == classes) break;
    classes = now;
  }
  return sig;
}

inline std::uint64_t wl_graph_hash(const ColoredGraph& g, int rounds = -1, bool use_colors = true) {
  auto sig = wl_node_signatures(g, rounds, use_colors);
  std::sort(sig.begin(), sig.end());
  std::uint64_t h = detail::hash_combine(kWlSeed, static_cast<std::uint64_t>(g.n));
  for (auto s : sig) h = detail::hash_combine(h, s);
  return h;
}

/**
 * Which product the colored random walk encoding takes, with P = A D^{-1}:
 *   column:   x_i^k = (P^k c)_i
 *   row:      x_i^k = (c^T P^k)_i
 *   diagonal: x_i^k = c_i (P^k)_ii
 */
enum class RwReading { column, row, diagonal };

/// Colored random-walk encoding, one K-vector per node, with explicit color values.
template <class S = double>
std::vector<std::vector<S>> rwpe_node(const ColoredGraph& g, int powers,
                                      const std::vector<S>& color_values,
                                      RwReading reading = RwReading::column) {
  if (powers < 1) throw Error("rwpe_node: need at least one power");
  const int n = g.n;
  std::vector<S> inv_degree(n, detail::scalar_from<S>(0));
  for (int j = 0; j < n; ++j)
    if (g.degree(j) > 0) inv_degree[j] = detail::reciprocal<S>(g.degree(j));
  std::vector<std::vector<S>> out(n, std::vector<S>(powers, detail::scalar_from<S>(0)));
  const S zero = detail::scalar_from<S>(0);

  if (reading == RwReading::diagonal) {
    // Full matrix powers; M <- M P.
    std::vector<S> m(n * n, zero), next(n * n, zero);
    for (int i = 0; i < n; ++i) m[i * n + i] = detail::scalar_from<S>(1);
    for (int k = 0; k < powers; ++k) {
      std::fill(next.begin(), next.end(), zero);
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j)
            if (g.has_edge(l, j)) next[i * n + j] += m[i * n + l] * inv_degree[j];
      m.swap(next);
      for (int i = 0; i < n; ++i) out[i][k] = color_values[i] * m[i * n + i];
    }
    return out;
  }

  std::vector<S> vec = color_values, next(n, zero);
  for (int k = 0; k < powers; ++k) {
    std::fill(next.begin(), next.end(), zero);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!g.has_edge(i, j)) continue;
        if (reading == RwReading::column)
          next[i] += inv_degree[j] * vec[j];  // (P v)_i = sum_j A_ij v_j / d_j
        else
          next[j] += vec[i] * inv_degree[j];  // (v^T P)_j = sum_i v_i A_ij / d_j
      }
    vec.swap(next);
    for (int i = 0; i < n; ++i) out[i][k] = vec[i];
  }
  return out;
}

/// Colored random-walk encoding using the prime color values.
template <class S = double>
std::vector<std::vector<S>> rwpe_node(const ColoredGraph& g, int powers,
                                      RwReading reading = RwReading::column) {
  std::vector<S> c(g.n);
  for (int i = 0; i < g.n; ++i) c[i] = detail::scalar_from<S>(color_value(g.colors[i]));
  return rwpe_node<S>(g, powers, c, reading);
}

/// e_ij = x_i*x_i + x_j*x_j elementwise; symmetric in (i, j).
template <class S = double>
std::vector<S> pair_feature(const std::vector<S>& xi, const std::vector<S>& xj) {
  if (xi.size() != xj.size()) throw Error("pair_feature: feature length mismatch");
  std::vector<S> e(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) e[k] = xi[k] * xi[k] + xj[k] * xj[k];
  return e;
}

template <class S>
struct EdgeFeature {
  int u = 0, v = 0;
  std::vector<S> value;
};

/// One feature per existing edge (u < v), edges in row-major order.
template <class S = double>
std::vector<EdgeFeature<S>> edge_pe(const ColoredGraph& g,
                                    const std::vector<std::vector<S>>& node_features) {
  if (static_cast<int>(node_features.size()) != g.n)
    throw Error("edge_pe: need one feature vector per node");
  std::vector<EdgeFeature<S>> out;
  for (int u = 0; u < g.n; ++u)
    for (int v = u + 1; v < g.n; ++v)
      if (g.has_edge(u, v)) out.push_back({u, v, pair_feature(node_features[u], node_features[v])});
  return out;
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

enum class PELevel { graph, node_edge };

struct PEConfig {
  bool use_wl = false;
  bool use_rw = true;
  bool use_edge = true;
  int rw_powers = 8;
  PELevel level = PELevel::node_edge;
  RwReading rw_reading = RwReading::column;
  // The WL component is color-blind by default; colors enter through the
  // random-walk and node features.
  bool wl_colors = false;

  void validate() const {
    if (!use_wl && !use_rw && !use_edge) throw ConfigError("PE config enables no component");
    if (rw_powers < 1) throw ConfigError("rw_powers must be positive");
  }

  /// "WL", "RW+edge", ... in the fixed WL, RW, edge order.
  std::string name() const {
    std::string s;
    auto add = [&](const char* part) {
      if (!s.empty()) s += '+';
      s += part;
    };
    if (use_wl) add("WL");
    if (use_rw) add("RW");
    if (use_edge) add("edge");
    return s;
  }

  /// Parses "WL+RW+edge"-style names (case-insensitive components).
  static PEConfig parse(std::string_view spec, PELevel level = PELevel::graph) {
    PEConfig cfg;
    cfg.use_wl = cfg.use_rw = cfg.use_edge = false;
    cfg.level = level;
    std::size_t start = 0;
    while (start <= spec.size()) {
      const std::size_t plus = spec.find('+', start);
      std::string part(spec.substr(start, plus == std::string_view::npos ? std::string_view::npos
                                                                         : plus - start));
      for (auto& ch : part) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (part == "wl")
        cfg.use_wl = true;
      else if (part == "rw")
        cfg.use_rw = true;
      else if (part == "edge")
        cfg.use_edge = true;
      else
        throw ConfigError("unknown PE component '" + part + "'");
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    cfg.validate();
    return cfg;
  }

  friend bool operator==(const PEConfig&, const PEConfig&) = default;
};

/// The six combinations benchmarked in the reference table, in its row order.
inline std::vector<PEConfig> table_configs() {
  std::vector<PEConfig> out;
  for (const char* name : {"WL", "WL+edge", "RW", "RW+edge", "WL+RW", "WL+RW+edge"})
    out.push_back(PEConfig::parse(name));
  return out;
}

using PEVector = std::vector<std::uint64_t>;

/// Exact per-node features (color value, then random-walk entries when enabled).
inline std::vector<std::vector<ModP>> node_features(const ColoredGraph& g, const PEConfig& cfg) {
  std::vector<std::vector<ModP>> x(g.n);
  std::vector<std::vector<ModP>> rw;
  if (cfg.use_rw) rw = rwpe_node<ModP>(g, cfg.rw_powers, cfg.rw_reading);
  for (int i = 0; i < g.n; ++i) {
    x[i].push_back(ModP(color_value(g.colors[i])));
    if (cfg.use_rw) x[i].insert(x[i].end(), rw[i].begin(), rw[i].end());
  }
  return x;
}

/**
 * Graph-level encoding: enabled components concatenated in the order
 * (WL multiset hash, sum of node random-walk vectors, sum of edge features).
 * Invariant under node relabeling.
 */
inline PEVector graph_pe(const ColoredGraph& g, const PEConfig& cfg) {
  PEVector out;
  if (cfg.use_wl) out.push_back(wl_graph_hash(g, -1, cfg.wl_colors));
  if (!cfg.use_rw && !cfg.use_edge) return out;
  const auto x = node_features(g, cfg);
  if (cfg.use_rw) {
    for (int k = 0; k < cfg.rw_powers; ++k) {
      ModP total;
      for (int i = 0; i < g.n; ++i) total += x[i][1 + k];
      out.push_back(total.value());
    }
  }
  if (cfg.use_edge) {
    const std::size_t width = 1 + (cfg.use_rw ? cfg.rw_powers : 0);
    std::vector<ModP> total(width);
    for (const auto& e : edge_pe(g, x))
      for (std::size_t k = 0; k < width; ++k) total[k] += e.value[k];
    for (auto t : total) out.push_back(t.value());
  }
  return out;
}

/// Per-node and per-pair encodings of one graph, for node/edge-level grouping.
class LocalEncodings {
 public:
  LocalEncodings(const ColoredGraph& g, const PEConfig& cfg) : cfg_(cfg) {
    if (cfg.use_wl) wl_ = wl_node_signatures(g, -1, cfg.wl_colors);
    features_ = node_features(g, cfg);
  }

  PEVector node(int v) const {
    PEVector out;
    if (cfg_.use_wl) out.push_back(wl_[v]);
    for (auto x : features_[v]) out.push_back(x.value());
    return out;
  }

  // Edge feature of the (possibly absent) pair {u, v}; symmetric.
  PEVector pair(int u, int v) const {
    PEVector out;
    if (cfg_.use_wl) {
      out.push_back(std::min(wl_[u], wl_[v]));
      out.push_back(std::max(wl_[u], wl_[v]));
    }
    if (cfg_.use_edge) {
      for (auto x : pair_feature(features_[u], features_[v])) out.push_back(x.value());
    } else {
      PEVector a = node(u), b = node(v);
      if (b < a) std::swap(a, b);
      out.insert(out.end(), a.begin(), a.end());
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  }

 private:
  PEConfig cfg_;
  std::vector<std::uint64_t> wl_;
  std::vector<std::vector<ModP>> features_;
};

}  // namespace symflows::graph
