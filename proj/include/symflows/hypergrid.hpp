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
 * D-dimensional hypergrid of side H. The agent starts at the origin, may
 * increment any coordinate below H - 1, and may stop anywhere.
 *
 * Forward head layout: slot d increments coordinate d, slot D stops.
 * Backward head layout: slot d decrements coordinate d.
 *
 * The two state-symmetric model wrappers live here as well: averaging the
 * base model over all coordinate permutations, and evaluating it on the
 * sorted coordinate vector.
 */

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/gfn.hpp"
#include "symflows/model.hpp"
#include "symflows/policy.hpp"

namespace symflows::hypergrid {

struct GridState {
  std::vector<int> coords;

  friend bool operator==(const GridState&, const GridState&) = default;
};

inline std::string to_string(const GridState& s) {
  std::string out = "(";
  for (std::size_t d = 0; d < s.coords.size(); ++d) {
    if (d) out += ',';
    out += std::to_string(s.coords[d]);
  }
  return out + ")";
}

enum class SymmetryMode { baseline, group_average, canonical };

inline std::string_view to_string(SymmetryMode m) {
  switch (m) {
    case SymmetryMode::baseline: return "baseline";
    case SymmetryMode::group_average: return "group_average";
    case SymmetryMode::canonical: return "canonical";
  }
  return "?";
}

inline SymmetryMode parse_symmetry(std::string_view s) {
  if (s == "baseline") return SymmetryMode::baseline;
  if (s == "group_average") return SymmetryMode::group_average;
  if (s == "canonical") return SymmetryMode::canonical;
  throw ConfigError("unknown hypergrid symmetry '" + std::string(s) +
                    "' (expected baseline, group_average or canonical)");
}

/// R(x) = r0 + 0.5 prod_d [0.25 < |x_d - 0.5|] + 2 prod_d [0.3 < |x_d - 0.5| < 0.4], x_d = c_d / (H - 1).
inline double grid_reward(const GridState& s, int horizon, double r0) {
  bool outer = true, band = true;
  for (int c : s.coords) {
    const double x = horizon > 1 ? static_cast<double>(c) / (horizon - 1) : 0.0;
    const double a = std::abs(x - 0.5);
    outer = outer && a > 0.25;
    band = band && a > 0.3 && a < 0.4;
  }
  return r0 + (outer ? 0.5 : 0.0) + (band ? 2.0 : 0.0);
}

/// Sorting order: canonical position i holds original coordinate order[i]; ties keep index order.
inline std::vector<int> sorting_order(const GridState& s) {
  std::vector<int> order(s.coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s.coords[a] < s.coords[b]; });
  return order;
}

inline GridState canonical_coords(const GridState& s) {
  GridState out = s;
  std::sort(out.coords.begin(), out.coords.end());
  return out;
}

class GridEnv {
 public:
  using State = GridState;

  GridEnv(int horizon, int dim, double r0) : h_(horizon), d_(dim), r0_(r0) {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (dim < 1) throw ConfigError("dim must be at least 1");
    if (!(r0 > 0.0)) throw ConfigError("r0 must be positive");
    if (horizon > 255) throw ConfigError("horizon must be at most 255");
  }

  int horizon() const { return h_; }
  int dim() const { return d_; }
  double r0() const { return r0_; }

  GridState initial_state() const { return GridState{std::vector<int>(d_, 0)}; }

  std::vector<StepClass<GridState>> forward_classes(const GridState& s) const {
    std::vector<StepClass<GridState>> out;
    for (int d = 0; d < d_; ++d) {
      if (s.coords[d] >= h_ - 1) continue;
      GridState next = s;
      ++next.coords[d];
      out.push_back({d, false, {std::move(next)}});
    }
    out.push_back({d_, true, {}});
    return out;
  }

  std::vector<BackClass<GridState>> backward_classes(const GridState& s) const {
    std::vector<BackClass<GridState>> out;
    for (int d = 0; d < d_; ++d) {
      if (s.coords[d] == 0) continue;
      GridState prev = s;
      --prev.coords[d];
      out.push_back({d, {std::move(prev)}});
    }
    return out;
  }

  double reward(const GridState& s) const { return grid_reward(s, h_, r0_); }

  std::string key(const GridState& s) const {
    std::string k(s.coords.size(), '\0');
    for (std::size_t d = 0; d < k.size(); ++d) k[d] = static_cast<char>(s.coords[d]);
    return k;
  }

  GridState from_key(std::string_view k) const {
    GridState s;
    for (char c : k) s.coords.push_back(static_cast<unsigned char>(c));
    return s;
  }

  long grade(const GridState& s) const { return std::accumulate(s.coords.begin(), s.coords.end(), 0L); }

  int max_trajectory_length() const { return d_ * (h_ - 1) + 1; }

  int forward_slots() const { return d_ + 1; }
  int backward_slots() const { return d_; }

  std::string describe() const {
    return "env=hypergrid horizon=" + std::to_string(h_) + " dim=" + std::to_string(d_) +
           " r0=" + checkpoint::format_double(r0_);
  }

 private:
  int h_, d_;
  double r0_;
};

/// Concatenated per-dimension one-hot encoding of length D * H.
struct OneHotEncoder {
  int horizon = 1;
  int dim = 1;

  ModelInput operator()(const GridState& s) const {
    ModelInput x;
    x.key.resize(s.coords.size());
    for (std::size_t d = 0; d < s.coords.size(); ++d) x.key[d] = static_cast<char>(s.coords[d]);
    x.features.assign(static_cast<std::size_t>(horizon) * dim, 0.0);
    for (int d = 0; d < dim; ++d) x.features[static_cast<std::size_t>(d) * horizon + s.coords[d]] = 1.0;
    x.forward_size = dim + 1;
    x.backward_size = dim;
    return x;
  }
};

namespace detail {

// Legal slots of each head at s; the last forward slot (stop) is always legal.
inline std::vector<int> legal_forward(const GridState& s, int horizon) {
  std::vector<int> out;
  const int dim = static_cast<int>(s.coords.size());
  for (int d = 0; d < dim; ++d)
    if (s.coords[d] < horizon - 1) out.push_back(d);
  out.push_back(dim);
  return out;
}

inline std::vector<int> legal_backward(const GridState& s) {
  std::vector<int> out;
  for (int d = 0; d < static_cast<int>(s.coords.size()); ++d)
    if (s.coords[d] > 0) out.push_back(d);
  return out;
}

// (g.s)[perm[d]] = s[d]
inline GridState apply_perm(const GridState& s, const std::vector<int>& perm) {
  GridState out = s;
  for (std::size_t d = 0; d < perm.size(); ++d) out.coords[perm[d]] = s.coords[d];
  return out;
}

}  // namespace detail

/**
 * Group-averaged model. In policy space (DB/TB) the wrapped forward logit of
 * a legal action is the log of its mean probability across the D! permuted
 * copies; in flow space (FM) it is the log of the mean edge flow. The state
 * log-flow is always the log of the mean flow.
 */
class GroupAverageModel final : public FlowModel<GridState> {
 public:
  static constexpr int kMaxDim = 6;

  GroupAverageModel(FlowModel<GridState>& base, int horizon, int dim, bool flow_space)
      : base_(base), horizon_(horizon), dim_(dim), flow_space_(flow_space) {
    if (dim > kMaxDim) throw ConfigError("group averaging supports dim <= 6");
    std::vector<int> p(dim);
    std::iota(p.begin(), p.end(), 0);
    do perms_.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
  }

  const std::vector<std::vector<int>>& group() const { return perms_; }

  Heads evaluate(const GridState& s) const override {
    const auto fwd = detail::legal_forward(s, horizon_);
    const auto bwd = detail::legal_backward(s);
    const double G = static_cast<double>(perms_.size());
    Heads out;
    out.forward.assign(dim_ + 1, 0.0);
    out.backward.assign(dim_, 0.0);
    std::vector<double> fsum(dim_ + 1, 0.0), bsum(dim_, 0.0), flows(perms_.size());
    for (std::size_t k = 0; k < perms_.size(); ++k) {
      const auto& g = perms_[k];
      const Heads h = base_.evaluate(detail::apply_perm(s, g));
      flows[k] = h.log_flow;
      const auto pf = member_values(h.forward, fwd, g, dim_, !flow_space_);
      for (std::size_t i = 0; i < fwd.size(); ++i) fsum[fwd[i]] += pf[i];
      if (!bwd.empty()) {
        const auto pb = member_values(h.backward, bwd, g, -1, true);
        for (std::size_t i = 0; i < bwd.size(); ++i) bsum[bwd[i]] += pb[i];
      }
    }
    for (int a : fwd) out.forward[a] = std::log(fsum[a] / G);
    for (int a : bwd) out.backward[a] = std::log(bsum[a] / G);
    out.log_flow = logsumexp(flows) - std::log(G);
    return out;
  }

  void accumulate(const GridState& s, const Heads& grad) override {
    const auto fwd = detail::legal_forward(s, horizon_);
    const auto bwd = detail::legal_backward(s);
    const Heads wrapped = evaluate(s);
    const double G = static_cast<double>(perms_.size());
    for (const auto& g : perms_) {
      const GridState gs = detail::apply_perm(s, g);
      const Heads h = base_.evaluate(gs);
      Heads bg;
      bg.forward.assign(h.forward.size(), 0.0);
      bg.backward.assign(h.backward.size(), 0.0);
      bg.log_flow = grad.log_flow * std::exp(h.log_flow - wrapped.log_flow) / G;
      chain(h.forward, fwd, g, dim_, grad.forward, wrapped.forward, bg.forward, !flow_space_);
      if (!bwd.empty()) chain(h.backward, bwd, g, -1, grad.backward, wrapped.backward, bg.backward, true);
      base_.accumulate(gs, bg);
    }
  }

  double log_z() const override { return base_.log_z(); }
  void accumulate_log_z(double g) override { base_.accumulate_log_z(g); }
  void apply_gradients() override { base_.apply_gradients(); }
  void zero_gradients() override { base_.zero_gradients(); }
  void save(std::ostream& out) const override { base_.save(out); }
  void load(std::istream& in) override { base_.load(in); }

 private:
  // Base slot for wrapped slot a under g; `fixed` maps to itself (the stop slot).
  static int image(int a, const std::vector<int>& g, int fixed) { return a == fixed ? a : g[a]; }

  // Per legal wrapped slot: the base probability (policy space) or edge flow
  // (flow space) of the corresponding permuted action.
  std::vector<double> member_values(const std::vector<double>& head, const std::vector<int>& legal,
                                    const std::vector<int>& g, int fixed, bool policy) const {
    std::vector<double> z(legal.size());
    for (std::size_t i = 0; i < legal.size(); ++i) z[i] = head[image(legal[i], g, fixed)];
    const double norm = policy ? logsumexp(z) : 0.0;
    for (double& v : z) v = std::exp(v - norm);
    return z;
  }

  // Chain rule from the wrapped head gradient to one permuted base copy.
  void chain(const std::vector<double>& head, const std::vector<int>& legal, const std::vector<int>& g,
             int fixed, const std::vector<double>& upstream, const std::vector<double>& wrapped,
             std::vector<double>& out, bool policy) const {
    const double G = static_cast<double>(perms_.size());
    std::vector<double> z(legal.size());
    for (std::size_t i = 0; i < legal.size(); ++i) z[i] = head[image(legal[i], g, fixed)];
    const double norm = policy ? logsumexp(z) : 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < legal.size(); ++i) {
      const double v = std::exp(z[i] - norm);
      const double coef = upstream[legal[i]] * v / (G * std::exp(wrapped[legal[i]]));
      out[image(legal[i], g, fixed)] += coef;
      total += coef;
    }
    if (!policy) return;
    for (std::size_t i = 0; i < legal.size(); ++i)
      out[image(legal[i], g, fixed)] -= total * std::exp(z[i] - norm);
  }

  FlowModel<GridState>& base_;
  int horizon_, dim_;
  bool flow_space_;
  std::vector<std::vector<int>> perms_;
};

/**
 * Canonical model: the base sees the sorted coordinate vector; the logit of
 * action d at s is the base logit at the canonical position of coordinate d.
 */
class CanonicalModel final : public FlowModel<GridState> {
 public:
  explicit CanonicalModel(FlowModel<GridState>& base) : base_(base) {}

  Heads evaluate(const GridState& s) const override {
    const auto order = sorting_order(s);
    const Heads h = base_.evaluate(canonical_coords(s));
    Heads out = h;
    const int dim = static_cast<int>(order.size());
    for (int i = 0; i < dim; ++i) {
      out.forward[order[i]] = h.forward[i];
      out.backward[order[i]] = h.backward[i];
    }
    return out;
  }

  void accumulate(const GridState& s, const Heads& grad) override {
    const auto order = sorting_order(s);
    Heads g = grad;
    const int dim = static_cast<int>(order.size());
    for (int i = 0; i < dim; ++i) {
      g.forward[i] = grad.forward[order[i]];
      g.backward[i] = grad.backward[order[i]];
    }
    base_.accumulate(canonical_coords(s), g);
  }

  double log_z() const override { return base_.log_z(); }
  void accumulate_log_z(double g) override { base_.accumulate_log_z(g); }
  void apply_gradients() override { base_.apply_gradients(); }
  void zero_gradients() override { base_.zero_gradients(); }
  void save(std::ostream& out) const override { base_.save(out); }
  void load(std::istream& in) override { base_.load(in); }

 private:
  FlowModel<GridState>& base_;
};

}  // namespace symflows::hypergrid
