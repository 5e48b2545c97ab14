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
 * Environment-agnostic GFlowNet machinery.
 *
 * An environment presents, at every state, its legal actions already grouped
 * into classes. A class carries the model head slot holding its logit and
 * one successor per member action (stop classes have none). Backward moves
 * are presented the same way, with one parent per member. Under this
 * convention the probability of a class is the summed probability of its
 * members, and the losses are written in terms of class probabilities:
 * grouping every action into its own class gives the plain, symmetry-blind
 * GFlowNet.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/model.hpp"
#include "symflows/policy.hpp"
#include "symflows/rng.hpp"

namespace symflows {

template <class State>
struct StepClass {
  int slot = 0;                  // index into the forward head
  bool stop = false;
  std::vector<State> successors;  // one per member action; empty for stop

  int multiplicity() const { return stop ? 1 : static_cast<int>(successors.size()); }
};

template <class State>
struct BackClass {
  int slot = 0;               // index into the backward head
  std::vector<State> parents;  // one per member action

  int multiplicity() const { return static_cast<int>(parents.size()); }
};

// forward_classes/backward_classes may return by value or by const reference
// (environments are free to cache).
template <class E>
concept Environment = requires(const E& env, const typename E::State& s) {
  typename E::State;
  { env.initial_state() } -> std::convertible_to<typename E::State>;
  { env.forward_classes(s) } -> std::convertible_to<std::vector<StepClass<typename E::State>>>;
  { env.backward_classes(s) } -> std::convertible_to<std::vector<BackClass<typename E::State>>>;
  { env.reward(s) } -> std::convertible_to<double>;
  { env.key(s) } -> std::convertible_to<std::string>;
  { env.grade(s) } -> std::convertible_to<long>;
  { env.max_trajectory_length() } -> std::convertible_to<int>;
};

template <class State>
struct Trajectory {
  std::vector<State> states;  // s0 ... x
  std::vector<int> classes;   // chosen class at each state; the last one is stop
  std::vector<int> members;   // chosen member within the class
  double terminal_reward = 0.0;

  const State& terminal() const { return states.back(); }
};

enum class LossKind { fm, db, tb };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::fm: return "FM";
    case LossKind::db: return "DB";
    case LossKind::tb: return "TB";
  }
  return "?";
}

inline LossKind parse_loss(std::string_view s) {
  if (s == "FM" || s == "fm") return LossKind::fm;
  if (s == "DB" || s == "db") return LossKind::db;
  if (s == "TB" || s == "tb") return LossKind::tb;
  throw ConfigError("unknown loss '" + std::string(s) + "' (expected FM, DB or TB)");
}

struct TrainConfig {
  LossKind loss = LossKind::tb;
  double epsilon = 0.05;
  int batch_size = 16;
  long steps = 1000;
  std::uint64_t seed = 0;
  bool learn_backward = false;  // otherwise P_B is uniform over concrete backward actions

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (steps < 0) throw ConfigError("steps must be non-negative");
  }
};

struct StepMetrics {
  long step = 0;
  long states_visited = 0;  // cumulative number of sampled terminal states
  double loss = 0.0;
  double aux = 0.0;  // current estimate of log Z
};

namespace detail {

template <class State>
std::vector<double> gather_logits(const std::vector<double>& head,
                                  const std::vector<StepClass<State>>& classes) {
  std::vector<double> out(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) out[i] = head.at(classes[i].slot);
  return out;
}

template <class C>
std::vector<int> multiplicities(const std::vector<C>& classes) {
  std::vector<int> m(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) m[i] = classes[i].multiplicity();
  return m;
}

// Adds coef * d log P(chosen) / d logits into the head gradient.
template <class C>
void add_log_policy_grad(std::vector<double>& grad, const std::vector<C>& classes,
                         const std::vector<double>& log_p, std::size_t chosen, double coef) {
  for (std::size_t j = 0; j < classes.size(); ++j)
    grad.at(classes[j].slot) += coef * ((j == chosen ? 1.0 : 0.0) - std::exp(log_p[j]));
}

inline Heads zeros_like(const Heads& h) {
  Heads g;
  g.forward.assign(h.forward.size(), 0.0);
  g.backward.assign(h.backward.size(), 0.0);
  return g;
}

}  // namespace detail

/// Probability vector over the classes at s under the model.
template <Environment E>
std::vector<double> class_policy(const E& env, const FlowModel<typename E::State>& model,
                                 const typename E::State& s) {
  const auto& classes = env.forward_classes(s);
  const Heads h = model.evaluate(s);
  const auto logits = detail::gather_logits(h.forward, classes);
  const auto m = detail::multiplicities(classes);
  return class_policy(logits, m);
}

/**
 * One rollout from s0 under pi = (1 - eps) P_F + eps U over classes, then a
 * uniform member of the chosen class. With eps = 1 the model is not read.
 */
template <Environment E>
Trajectory<typename E::State> sample_trajectory(const E& env,
                                                const FlowModel<typename E::State>& model,
                                                double epsilon, Rng& rng) {
  using State = typename E::State;
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");
  Trajectory<State> traj;
  State s = env.initial_state();
  const int cap = 4 * env.max_trajectory_length();
  std::vector<double> pi;
  for (int depth = 0;; ++depth) {
    if (depth > cap) throw Error("depth cap exceeded");
    const auto& classes = env.forward_classes(s);
    if (classes.empty()) throw Error("no legal actions");
    const std::size_t k = classes.size();
    pi.assign(k, 1.0 / static_cast<double>(k));
    if (epsilon < 1.0) {
      const Heads h = model.evaluate(s);
      const auto p = class_policy(detail::gather_logits(h.forward, classes),
                                  detail::multiplicities(classes));
      for (std::size_t i = 0; i < k; ++i) pi[i] = (1.0 - epsilon) * p[i] + epsilon / static_cast<double>(k);
    }
    const double u = rng.uniform();
    std::size_t c = 0;
    double acc = 0.0;
    for (; c + 1 < k; ++c) {
      acc += pi[c];
      if (u < acc) break;
    }
    const auto& cls = classes[c];
    const int member = cls.stop ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(cls.multiplicity())));
    traj.states.push_back(s);
    traj.classes.push_back(static_cast<int>(c));
    traj.members.push_back(member);
    if (cls.stop) {
      traj.terminal_reward = env.reward(s);
      return traj;
    }
    State next = cls.successors[member];
    s = std::move(next);
  }
}

/**
 * Loss of one trajectory under the chosen criterion; when `weight` is
 * non-zero, weight * d loss / d heads is accumulated into the model.
 */
template <Environment E>
double trajectory_loss(const E& env, FlowModel<typename E::State>& model,
                       const Trajectory<typename E::State>& traj, LossKind kind,
                       bool learn_backward, double weight) {
  using State = typename E::State;
  const std::size_t T = traj.states.size();
  if (T == 0 || traj.classes.size() != T) throw Error("malformed trajectory");

  std::vector<Heads> heads(T), grads(T);
  for (std::size_t t = 0; t < T; ++t) {
    heads[t] = model.evaluate(traj.states[t]);
    grads[t] = detail::zeros_like(heads[t]);
  }
  std::vector<std::string> keys(T);
  for (std::size_t t = 0; t < T; ++t) keys[t] = env.key(traj.states[t]);

  auto forward_log_policy = [&](std::size_t t) {
    const auto& classes = env.forward_classes(traj.states[t]);
    return class_log_policy(detail::gather_logits(heads[t].forward, classes),
                            detail::multiplicities(classes));
  };

  // Backward class at states[t] through which the trajectory arrived.
  auto arrival_class = [&](std::size_t t) -> std::size_t {
    const auto& back = env.backward_classes(traj.states[t]);
    for (std::size_t b = 0; b < back.size(); ++b)
      for (const auto& p : back[b].parents)
        if (env.key(p) == keys[t - 1]) return b;
    throw Error("environment is not reversible: parent missing from backward classes");
  };

  auto backward_log_policy = [&](std::size_t t) {
    const auto& back = env.backward_classes(traj.states[t]);
    std::vector<double> logits(back.size(), 0.0);
    if (learn_backward)
      for (std::size_t b = 0; b < back.size(); ++b) logits[b] = heads[t].backward.at(back[b].slot);
    return class_log_policy(logits, detail::multiplicities(back));
  };

  double loss = 0.0;
  switch (kind) {
    case LossKind::tb: {
      double sum_pf = 0.0, sum_pb = 0.0;
      std::vector<std::vector<double>> lpf(T), lpb(T);
      std::vector<std::size_t> arrival(T, 0);
      for (std::size_t t = 0; t < T; ++t) {
        lpf[t] = forward_log_policy(t);
        sum_pf += lpf[t][traj.classes[t]];
        if (t > 0) {
          lpb[t] = backward_log_policy(t);
          arrival[t] = arrival_class(t);
          sum_pb += lpb[t][arrival[t]];
        }
      }
      const double log_z = model.log_z();
      loss = tb_loss(log_z, sum_pf, traj.terminal_reward, sum_pb);
      if (weight != 0.0) {
        const double d = (log_z + sum_pf) - (std::log(traj.terminal_reward) + sum_pb);
        const double coef = 2.0 * d * weight;
        model.accumulate_log_z(coef);
        for (std::size_t t = 0; t < T; ++t) {
          detail::add_log_policy_grad(grads[t].forward, env.forward_classes(traj.states[t]), lpf[t],
                                      traj.classes[t], coef);
          if (t > 0 && learn_backward)
            detail::add_log_policy_grad(grads[t].backward, env.backward_classes(traj.states[t]),
                                        lpb[t], arrival[t], -coef);
        }
      }
      break;
    }
    case LossKind::db: {
      for (std::size_t t = 0; t < T; ++t) {
        const auto lpf = forward_log_policy(t);
        const std::size_t c = traj.classes[t];
        double d = heads[t].log_flow + lpf[c];
        const bool last = t + 1 == T;
        std::vector<double> lpb;
        std::size_t arrival = 0;
        if (last) {
          d -= std::log(traj.terminal_reward);
          loss += db_loss(heads[t].log_flow, lpf[c], std::log(traj.terminal_reward), 0.0);
        } else {
          lpb = backward_log_policy(t + 1);
          arrival = arrival_class(t + 1);
          d -= heads[t + 1].log_flow + lpb[arrival];
          loss += db_loss(heads[t].log_flow, lpf[c], heads[t + 1].log_flow, lpb[arrival]);
        }
        if (weight == 0.0) continue;
        const double coef = 2.0 * d * weight;
        grads[t].log_flow += coef;
        detail::add_log_policy_grad(grads[t].forward, env.forward_classes(traj.states[t]), lpf, c, coef);
        if (!last) {
          grads[t + 1].log_flow -= coef;
          if (learn_backward)
            detail::add_log_policy_grad(grads[t + 1].backward, env.backward_classes(traj.states[t + 1]),
                                        lpb, arrival, -coef);
        }
      }
      break;
    }
    case LossKind::fm: {
      // Forward logits are read as log flows per member action: a class
      // carries flow m_c exp(l_c), of which exp(l_c) goes to each member.
      for (std::size_t t = 0; t < T; ++t) {
        const State& s = traj.states[t];
        const auto& out_classes = env.forward_classes(s);
        std::vector<double> out(out_classes.size());
        std::size_t stop_index = out_classes.size();
        for (std::size_t j = 0; j < out_classes.size(); ++j) {
          const double l = heads[t].forward.at(out_classes[j].slot);
          out[j] = out_classes[j].stop ? l : std::log(static_cast<double>(out_classes[j].multiplicity())) + l;
          if (out_classes[j].stop) stop_index = j;
        }
        if (stop_index < out_classes.size()) {
          const double r = env.reward(s);
          const double l_stop = heads[t].forward[out_classes[stop_index].slot];
          loss += fm_terminal_loss(std::span<const double>(&l_stop, 1), r);
          if (weight != 0.0)
            grads[t].forward[out_classes[stop_index].slot] += 2.0 * (l_stop - std::log(r)) * weight;
        }
        if (t == 0) continue;

        // One inflow term per distinct parent of each backward class.
        struct Inflow {
          State parent;
          int slot;
          double value;
        };
        std::vector<Inflow> inflows;
        for (const auto& b : env.backward_classes(s)) {
          std::vector<std::string> seen;
          for (const auto& p : b.parents) {
            const std::string pk = env.key(p);
            if (std::find(seen.begin(), seen.end(), pk) != seen.end()) continue;
            seen.push_back(pk);
            const Heads ph = model.evaluate(p);
            bool found = false;
            for (const auto& f : env.forward_classes(p)) {
              if (f.stop) continue;
              int count = 0;
              for (const auto& x : f.successors) count += env.key(x) == keys[t];
              if (count == 0) continue;
              inflows.push_back({p, f.slot, ph.forward.at(f.slot) + std::log(static_cast<double>(count))});
              found = true;
              break;
            }
            if (!found) throw Error("environment is not reversible: child missing from parent classes");
          }
        }
        std::vector<double> in(inflows.size());
        for (std::size_t i = 0; i < in.size(); ++i) in[i] = inflows[i].value;
        loss += fm_interior_loss(in, out);
        if (weight == 0.0) continue;
        const double lse_in = logsumexp(in), lse_out = logsumexp(out);
        const double coef = 2.0 * (lse_in - lse_out) * weight;
        for (std::size_t j = 0; j < out.size(); ++j)
          grads[t].forward[out_classes[j].slot] -= coef * std::exp(out[j] - lse_out);
        for (std::size_t i = 0; i < inflows.size(); ++i) {
          const Heads ph = model.evaluate(inflows[i].parent);
          Heads g = detail::zeros_like(ph);
          g.forward[inflows[i].slot] = coef * std::exp(in[i] - lse_in);
          model.accumulate(inflows[i].parent, g);
        }
      }
      break;
    }
  }

  if (weight != 0.0)
    for (std::size_t t = 0; t < T; ++t) model.accumulate(traj.states[t], grads[t]);
  return loss;
}

/// The model's current estimate of log Z under the given criterion.
template <Environment E>
double log_partition_estimate(const E& env, const FlowModel<typename E::State>& model, LossKind kind) {
  if (kind == LossKind::tb) return model.log_z();
  const auto s0 = env.initial_state();
  const Heads h = model.evaluate(s0);
  if (kind == LossKind::db) return h.log_flow;
  const auto& classes = env.forward_classes(s0);
  std::vector<double> out(classes.size());
  for (std::size_t j = 0; j < classes.size(); ++j)
    out[j] = (classes[j].stop ? 0.0 : std::log(static_cast<double>(classes[j].multiplicity()))) +
             h.forward.at(classes[j].slot);
  return logsumexp(out);
}

/**
 * Runs cfg.steps optimizer updates, each on a fresh batch; the loss is the
 * batch mean of per-trajectory losses. on_step(metrics, batch) is called
 * after every update.
 */
template <Environment E, class OnStep>
std::vector<StepMetrics> train(const E& env, FlowModel<typename E::State>& model, const TrainConfig& cfg,
                               OnStep&& on_step) {
  using State = typename E::State;
  cfg.validate();
  Rng rng = Rng::stream(cfg.seed, "sample");
  std::vector<StepMetrics> history;
  history.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<Trajectory<State>> batch(cfg.batch_size);
  long visited = 0;
  const double weight = 1.0 / cfg.batch_size;
  for (long step = 1; step <= cfg.steps; ++step) {
    model.zero_gradients();
    for (auto& traj : batch) traj = sample_trajectory(env, model, cfg.epsilon, rng);
    double loss = 0.0;
    for (const auto& traj : batch) loss += trajectory_loss(env, model, traj, cfg.loss, cfg.learn_backward, weight);
    loss *= weight;
    if (!std::isfinite(loss))
      throw Error("loss diverged at step " + std::to_string(step) + " (value " + std::to_string(loss) + ")");
    model.apply_gradients();
    visited += cfg.batch_size;
    StepMetrics m{step, visited, loss, log_partition_estimate(env, model, cfg.loss)};
    history.push_back(m);
    on_step(m, std::span<const Trajectory<State>>(batch));
  }
  return history;
}

template <Environment E>
std::vector<StepMetrics> train(const E& env, FlowModel<typename E::State>& model, const TrainConfig& cfg) {
  return train(env, model, cfg, [](const StepMetrics&, auto) {});
}

}  // namespace symflows
