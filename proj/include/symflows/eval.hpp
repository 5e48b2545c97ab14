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

// Exact evaluation over an enumerated state space: ground truth, the learned
// terminal distribution by forward dynamic programming, distances, and the
// sliding-window statistics of sampled terminal states.

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/gfn.hpp"
#include "symflows/graph.hpp"
#include "symflows/policy.hpp"

namespace symflows {

using DistributionTable = std::vector<double>;

/**
 * All states reachable from s0, in non-decreasing grade order, with the
 * successor index of every class member. Terminals are the states that have
 * a stop class, numbered in state order.
 */
template <class State>
struct StateIndex {
  struct Node {
    State state;
    std::string key;
    long grade = 0;
    std::vector<std::vector<std::size_t>> successors;  // per class, per member
    int stop_class = -1;
    long terminal = -1;  // position in the terminal table
  };

  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> by_key;
  std::vector<std::size_t> terminals;  // node ids

  std::size_t size() const { return nodes.size(); }
  std::size_t terminal_count() const { return terminals.size(); }

  std::size_t find(const std::string& key) const {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw Error("state not in index");
    return it->second;
  }
  long terminal_of(const std::string& key) const {
    const long t = nodes[find(key)].terminal;
    if (t < 0) throw Error("state is not terminating");
    return t;
  }
};

inline constexpr std::size_t kDefaultStateBudget = 5'000'000;

template <Environment E>
StateIndex<typename E::State> enumerate_states(const E& env, std::size_t budget = kDefaultStateBudget) {
  using State = typename E::State;
  StateIndex<State> index;
  std::vector<std::vector<std::vector<std::string>>> succ_keys;
  auto add = [&](State s) {
    std::string k = env.key(s);
    auto [it, fresh] = index.by_key.try_emplace(k, index.nodes.size());
    if (!fresh) return;
    if (index.nodes.size() >= budget)
      throw Error("state budget exceeded (" + std::to_string(budget) + " states)");
    typename StateIndex<State>::Node node;
    node.grade = env.grade(s);
    node.key = std::move(k);
    node.state = std::move(s);
    index.nodes.push_back(std::move(node));
  };
  add(env.initial_state());
  for (std::size_t i = 0; i < index.nodes.size(); ++i) {
    const auto& classes = env.forward_classes(index.nodes[i].state);
    std::vector<std::vector<std::string>> keys(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (classes[c].stop) index.nodes[i].stop_class = static_cast<int>(c);
      for (const auto& s : classes[c].successors) {
        keys[c].push_back(env.key(s));
        add(s);
      }
    }
    succ_keys.push_back(std::move(keys));
  }

  // Stable reorder by grade so that every transition goes forward in the list.
  std::vector<std::size_t> order(index.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return index.nodes[a].grade < index.nodes[b].grade; });
  std::vector<typename StateIndex<State>::Node> sorted;
  std::vector<std::vector<std::vector<std::string>>> sorted_keys;
  sorted.reserve(order.size());
  for (std::size_t i : order) {
    sorted.push_back(std::move(index.nodes[i]));
    sorted_keys.push_back(std::move(succ_keys[i]));
  }
  index.nodes = std::move(sorted);
  index.by_key.clear();
  for (std::size_t i = 0; i < index.nodes.size(); ++i) index.by_key.emplace(index.nodes[i].key, i);
  for (std::size_t i = 0; i < index.nodes.size(); ++i) {
    auto& node = index.nodes[i];
    node.successors.resize(sorted_keys[i].size());
    for (std::size_t c = 0; c < sorted_keys[i].size(); ++c)
      for (const auto& k : sorted_keys[i][c]) {
        const std::size_t j = index.by_key.at(k);
        if (index.nodes[j].grade <= node.grade) throw Error("environment is not graded: successor grade not larger");
        node.successors[c].push_back(j);
      }
    if (node.stop_class >= 0) {
      node.terminal = static_cast<long>(index.terminals.size());
      index.terminals.push_back(i);
    }
  }
  return index;
}

/// p(x) = R(x) / sum R over the terminal table.
template <Environment E>
DistributionTable ground_truth(const StateIndex<typename E::State>& index, const E& env) {
  DistributionTable p(index.terminal_count());
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double r = env.reward(index.nodes[index.terminals[t]].state);
    if (!(r > 0.0)) throw Error("non-positive reward on a terminating state");
    p[t] = r;
  }
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= z;
  return p;
}

template <Environment E>
double log_partition(const StateIndex<typename E::State>& index, const E& env) {
  double z = 0.0;
  for (std::size_t id : index.terminals) z += env.reward(index.nodes[id].state);
  return std::log(z);
}

/// Exact terminal distribution of the model's forward policy (no exploration mixture).
template <Environment E>
DistributionTable model_distribution(const StateIndex<typename E::State>& index, const E& env,
                                     const FlowModel<typename E::State>& model) {
  std::vector<double> reach(index.size(), 0.0);
  DistributionTable out(index.terminal_count(), 0.0);
  if (index.size() == 0) return out;
  reach[0] = 1.0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (reach[i] == 0.0) continue;
    const auto& node = index.nodes[i];
    const auto p = class_policy(env, model, node.state);
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double mass = reach[i] * p[c];
      if (static_cast<int>(c) == node.stop_class) {
        out[node.terminal] += mass;
        continue;
      }
      const auto& succ = node.successors[c];
      const double share = mass / static_cast<double>(succ.size());
      for (std::size_t j : succ) reach[j] += share;
    }
  }
  return out;
}

inline void check_same_length(const DistributionTable& p, const DistributionTable& q) {
  if (p.size() != q.size()) throw Error("distribution length mismatch");
}

inline double l1_distance(const DistributionTable& p, const DistributionTable& q) {
  check_same_length(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

/// Jensen-Shannon divergence in nats.
inline double js_divergence(const DistributionTable& p, const DistributionTable& q) {
  check_same_length(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double a = p[i] > 0.0 ? 0.5 * p[i] * std::log(p[i] / m) : 0.0;
    const double b = q[i] > 0.0 ? 0.5 * q[i] * std::log(q[i] / m) : 0.0;
    s += a + b;  // commutative per term, so JSD(p, q) == JSD(q, p) exactly
  }
  return std::max(0.0, s);
}

template <class State>
DistributionTable empirical_distribution(std::span<const std::string> keys, const StateIndex<State>& index) {
  DistributionTable p(index.terminal_count(), 0.0);
  if (keys.empty()) return p;
  for (const auto& k : keys) {
    auto it = index.by_key.find(k);
    if (it == index.by_key.end() || index.nodes[it->second].terminal < 0)
      throw Error("unknown terminal state in samples");
    p[index.nodes[it->second].terminal] += 1.0;
  }
  for (double& v : p) v /= static_cast<double>(keys.size());
  return p;
}

inline double average_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw Error("average_reward: empty window");
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

/// The most recent W sampled terminals, with running counts and reward sum.
class SlidingWindow {
 public:
  static constexpr std::size_t kDefaultWidth = 200'000;

  explicit SlidingWindow(std::size_t terminals, std::size_t width = kDefaultWidth)
      : width_(width), counts_(terminals, 0) {
    if (width == 0) throw ConfigError("window must be positive");
  }

  void push(std::size_t terminal, double reward) {
    if (terminal >= counts_.size()) throw Error("terminal index out of range");
    items_.push_back({terminal, reward});
    ++counts_[terminal];
    reward_sum_ += reward;
    if (items_.size() > width_) {
      const auto old = items_.front();
      items_.pop_front();
      --counts_[old.terminal];
      reward_sum_ -= old.reward;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t width() const { return width_; }

  DistributionTable distribution() const {
    DistributionTable p(counts_.size(), 0.0);
    if (items_.empty()) return p;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(counts_[i]) / items_.size();
    return p;
  }

  // Recomputed from the window rather than the running sum, to avoid drift.
  double average_reward() const {
    std::vector<double> r;
    r.reserve(items_.size());
    for (const auto& it : items_) r.push_back(it.reward);
    return symflows::average_reward(r);
  }

 private:
  struct Item {
    std::size_t terminal;
    double reward;
  };
  std::size_t width_;
  std::vector<std::size_t> counts_;
  std::deque<Item> items_;
  double reward_sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// State index persistence and exhaustive detailed balance.
// ---------------------------------------------------------------------------

inline constexpr const char* kIndexMagic = "# symflows state index v1";

template <class State>
void write_index(const std::string& path, const StateIndex<State>& index, const std::string& env_description) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << kIndexMagic << '\n' << "# " << env_description << '\n';
  out << "# states " << index.size() << " terminals " << index.terminal_count() << '\n';
  for (const auto& node : index.nodes) out << graph::to_hex(node.key) << '\n';
  if (!out) throw Error("write failed: " + path);
}

struct IndexFile {
  std::string env_description;
  std::vector<std::string> keys;
};

inline IndexFile read_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  IndexFile f;
  std::string line;
  if (!std::getline(in, line) || line != kIndexMagic) throw Error(path + ": not a state index file");
  if (std::getline(in, line) && line.rfind("# ", 0) == 0) f.env_description = line.substr(2);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    f.keys.push_back(graph::from_hex(line));
  }
  return f;
}

/**
 * Detailed-balance loss summed over every edge of the enumerated DAG (each
 * class and distinct successor once, plus every stop), with the gradient
 * accumulated into the model when `accumulate` is set.
 */
template <Environment E>
double exhaustive_db_loss(const StateIndex<typename E::State>& index, const E& env,
                          FlowModel<typename E::State>& model, bool learn_backward, bool accumulate) {
  std::vector<Heads> heads(index.size()), grads(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    heads[i] = model.evaluate(index.nodes[i].state);
    grads[i] = detail::zeros_like(heads[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& node = index.nodes[i];
    const auto& classes = env.forward_classes(node.state);
    const auto lpf = class_log_policy(detail::gather_logits(heads[i].forward, classes),
                                      detail::multiplicities(classes));
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<std::size_t> targets;
      if (static_cast<int>(c) != node.stop_class) {
        targets = node.successors[c];
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
      }
      if (static_cast<int>(c) == node.stop_class) {
        const double d = heads[i].log_flow + lpf[c] - std::log(env.reward(node.state));
        total += d * d;
        if (!accumulate) continue;
        grads[i].log_flow += 2.0 * d;
        detail::add_log_policy_grad(grads[i].forward, classes, lpf, c, 2.0 * d);
        continue;
      }
      for (std::size_t j : targets) {
        const auto& child = index.nodes[j];
        const auto& back = env.backward_classes(child.state);
        std::vector<double> logits(back.size(), 0.0);
        if (learn_backward)
          for (std::size_t b = 0; b < back.size(); ++b) logits[b] = heads[j].backward.at(back[b].slot);
        const auto lpb = class_log_policy(logits, detail::multiplicities(back));
        std::size_t arrival = back.size();
        for (std::size_t b = 0; b < back.size() && arrival == back.size(); ++b)
          for (const auto& p : back[b].parents)
            if (env.key(p) == node.key) {
              arrival = b;
              break;
            }
        if (arrival == back.size()) throw Error("environment is not reversible: parent missing");
        const double d = heads[i].log_flow + lpf[c] - heads[j].log_flow - lpb[arrival];
        total += d * d;
        if (!accumulate) continue;
        grads[i].log_flow += 2.0 * d;
        grads[j].log_flow -= 2.0 * d;
        detail::add_log_policy_grad(grads[i].forward, classes, lpf, c, 2.0 * d);
        if (learn_backward) detail::add_log_policy_grad(grads[j].backward, back, lpb, arrival, -2.0 * d);
      }
    }
  }
  if (accumulate)
    for (std::size_t i = 0; i < index.size(); ++i) model.accumulate(index.nodes[i].state, grads[i]);
  return total;
}

}  // namespace symflows
