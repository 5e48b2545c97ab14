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

// Log-space policy arithmetic and the three GFlowNet training criteria.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "symflows/error.hpp"

namespace symflows {

inline double logsumexp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double logsumexp(std::initializer_list<double> xs) {
  return logsumexp(std::span<const double>(xs.begin(), xs.size()));
}

/**
 * Log-probabilities of action classes under the one-logit-per-class
 * parameterization: log P(c) = log m_c + l_c - logsumexp_c'(log m_c' + l_c').
 * A class stands for m_c concrete actions sharing the logit l_c.
 */
inline std::vector<double> class_log_policy(std::span<const double> logits,
                                            std::span<const int> multiplicities) {
  if (logits.empty()) throw Error("no legal actions");
  if (logits.size() != multiplicities.size())
    throw Error("class_policy: logits and multiplicities differ in length");
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (multiplicities[i] < 1) throw Error("class_policy: multiplicity must be at least 1");
    z[i] = std::log(static_cast<double>(multiplicities[i])) + logits[i];
  }
  const double norm = logsumexp(z);
  for (double& v : z) v -= norm;
  return z;
}

inline std::vector<double> class_policy(std::span<const double> logits,
                                        std::span<const int> multiplicities) {
  auto p = class_log_policy(logits, multiplicities);
  for (double& v : p) v = std::exp(v);
  return p;
}

inline double fm_interior_loss(std::span<const double> log_inflows,
                               std::span<const double> log_outflows) {
  if (log_inflows.empty() || log_outflows.empty())
    throw Error("fm_interior_loss: flow lists must be non-empty");
  const double d = logsumexp(log_inflows) - logsumexp(log_outflows);
  return d * d;
}

inline double fm_terminal_loss(std::span<const double> log_inflows, double reward) {
  if (!(reward > 0.0)) throw Error("fm_terminal_loss: reward must be positive");
  if (log_inflows.empty()) throw Error("fm_terminal_loss: flow list must be non-empty");
  const double d = logsumexp(log_inflows) - std::log(reward);
  return d * d;
}

inline double db_loss(double log_flow_s, double log_pf, double log_flow_next, double log_pb) {
  const double d = (log_flow_s + log_pf) - (log_flow_next + log_pb);
  return d * d;
}

inline double tb_loss(double log_z, double log_pf_sum, double reward, double log_pb_sum) {
  if (!(reward > 0.0)) throw Error("tb_loss: reward must be positive");
  const double d = (log_z + log_pf_sum) - (std::log(reward) + log_pb_sum);
  return d * d;
}

}  // namespace symflows
