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

// Shared fixtures: a hand-built five-state DAG and a heads table model.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "symflows/eval.hpp"
#include "symflows/gfn.hpp"
#include "symflows/model.hpp"
#include "symflows/rng.hpp"

namespace symflows::testing {

/**
 * s0 -> A, s0 -> B, A -> C, B -> C, B -> D; A, C and D may stop.
 * R(A) = 1, R(C) = 2, R(D) = 3, so Z = 6. With P_B uniform over parents the
 * consistent edge flows are F(s0->A) = 2, F(s0->B) = 4, F(A->C) = F(B->C) = 1,
 * F(B->D) = 3 and state flows F = (6, 2, 4, 2, 3).
 */
struct FiveStateDag {
  using State = int;
  enum : int { s0 = 0, A = 1, B = 2, C = 3, D = 4 };

  int initial_state() const { return s0; }

  std::vector<StepClass<int>> forward_classes(int s) const {
    switch (s) {
      case s0: return {{0, false, {A}}, {1, false, {B}}};
      case A: return {{0, false, {C}}, {1, true, {}}};
      case B: return {{0, false, {C}}, {1, false, {D}}};
      default: return {{0, true, {}}};
    }
  }

  std::vector<BackClass<int>> backward_classes(int s) const {
    switch (s) {
      case A:
      case B: return {{0, {s0}}};
      case C: return {{0, {A}}, {1, {B}}};
      case D: return {{0, {B}}};
      default: return {};
    }
  }

  double reward(int s) const {
    switch (s) {
      case A: return 1.0;
      case C: return 2.0;
      case D: return 3.0;
      default: return 0.0;
    }
  }

  std::string key(int s) const { return std::to_string(s); }
  long grade(int s) const { return s == s0 ? 0 : (s <= B ? 1 : 2); }
  int max_trajectory_length() const { return 3; }

  static constexpr double kStateFlow[5] = {6, 2, 4, 2, 3};
  // Edge flows in forward-class order (stop edges carry the reward).
  static std::vector<double> edge_flows(int s) {
    switch (s) {
      case s0: return {2, 4};
      case A: return {1, 1};
      case B: return {1, 3};
      case C: return {2};
      default: return {3};
    }
  }
};

/// Heads stored per env key; missing keys read as `fallback` shaped heads.
template <class State>
class HeadsTable final : public FlowModel<State> {
 public:
  using KeyFn = std::function<std::string(const State&)>;

  explicit HeadsTable(KeyFn key) : key_(std::move(key)) {}

  std::map<std::string, Heads> heads, grads;
  double z = 0.0, z_grad = 0.0;

  Heads evaluate(const State& s) const override { return heads.at(key_(s)); }
  void accumulate(const State& s, const Heads& g) override {
    auto [it, fresh] = grads.try_emplace(key_(s), g);
    if (fresh) return;
    for (std::size_t i = 0; i < g.forward.size(); ++i) it->second.forward[i] += g.forward[i];
    for (std::size_t i = 0; i < g.backward.size(); ++i) it->second.backward[i] += g.backward[i];
    it->second.log_flow += g.log_flow;
  }
  double log_z() const override { return z; }
  void accumulate_log_z(double g) override { z_grad += g; }
  void apply_gradients() override {}
  void zero_gradients() override {
    grads.clear();
    z_grad = 0.0;
  }
  void save(std::ostream&) const override {}
  void load(std::istream&) override {}

  /// Every scalar parameter, for finite differences.
  std::vector<double*> parameters() {
    std::vector<double*> out{&z};
    for (auto& [k, h] : heads) {
      for (double& v : h.forward) out.push_back(&v);
      for (double& v : h.backward) out.push_back(&v);
      out.push_back(&h.log_flow);
    }
    return out;
  }

  /// Accumulated gradient in parameters() order.
  std::vector<double> gradient() const {
    std::vector<double> out{z_grad};
    for (const auto& [k, h] : heads) {
      auto it = grads.find(k);
      for (std::size_t i = 0; i < h.forward.size(); ++i) out.push_back(it == grads.end() ? 0.0 : it->second.forward[i]);
      for (std::size_t i = 0; i < h.backward.size(); ++i) out.push_back(it == grads.end() ? 0.0 : it->second.backward[i]);
      out.push_back(it == grads.end() ? 0.0 : it->second.log_flow);
    }
    return out;
  }

 private:
  KeyFn key_;
};

/// Fills a HeadsTable with random heads for every enumerated state of env.
/// Head widths default to the largest legal slot of each state.
template <Environment E>
HeadsTable<typename E::State> random_heads(const E& env, Rng& rng, double scale = 1.0, int fwd_width = 0,
                                           int bwd_width = 0) {
  HeadsTable<typename E::State> model([&env](const typename E::State& s) { return env.key(s); });
  const auto index = enumerate_states(env);
  for (const auto& node : index.nodes) {
    int fwd = fwd_width, bwd = bwd_width;
    for (const auto& c : env.forward_classes(node.state)) fwd = std::max(fwd, c.slot + 1);
    for (const auto& c : env.backward_classes(node.state)) bwd = std::max(bwd, c.slot + 1);
    Heads h;
    for (int i = 0; i < fwd; ++i) h.forward.push_back(rng.uniform(-scale, scale));
    for (int i = 0; i < bwd; ++i) h.backward.push_back(rng.uniform(-scale, scale));
    h.log_flow = rng.uniform(-scale, scale);
    model.heads.emplace(node.key, h);
  }
  model.z = rng.uniform(-scale, scale);
  return model;
}

/// Tabular input keyed by env.key, with head widths from the largest legal slot.
template <class E>
struct KeyedWidth {
  const E* env = nullptr;

  ModelInput operator()(const typename E::State& s) const {
    ModelInput x;
    x.key = env->key(s);
    for (const auto& c : env->forward_classes(s)) x.forward_size = std::max(x.forward_size, c.slot + 1);
    for (const auto& c : env->backward_classes(s)) x.backward_size = std::max(x.backward_size, c.slot + 1);
    return x;
  }
};

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace symflows::testing
