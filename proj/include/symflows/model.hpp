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

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "symflows/adam.hpp"
#include "symflows/error.hpp"

namespace symflows {

/// All heads of a flow model at one state. Also used for gradients w.r.t. them.
struct Heads {
  std::vector<double> forward;   // one logit (or log edge flow) per forward slot
  std::vector<double> backward;  // one logit per backward slot
  double log_flow = 0.0;         // log F(s)
};

/// Environment-neutral view of a state, consumed by the base backends.
struct ModelInput {
  std::string key;               // identity for tabular storage
  std::vector<double> features;  // input vector for dense networks
  int forward_size = 0;
  int backward_size = 0;
};

struct OptimizerConfig {
  AdamConfig adam{};
  double log_z_lr_scale = 10.0;
};

/**
 * The learnable object: forward/backward heads and state log-flow for any
 * state, plus the log partition estimate. Gradients are accumulated with
 * accumulate()/accumulate_log_z() and consumed by apply_gradients().
 */
template <class Input>
class FlowModel {
 public:
  virtual ~FlowModel() = default;

  virtual Heads evaluate(const Input& x) const = 0;
  virtual void accumulate(const Input& x, const Heads& grad) = 0;

  virtual double log_z() const = 0;
  virtual void accumulate_log_z(double grad) = 0;

  virtual void apply_gradients() = 0;
  virtual void zero_gradients() = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint text helpers. Format: first line "SYMFLOWS1", then a model tag
// line, then whitespace-separated tokens; doubles are printed with 17
// significant digits so they round-trip exactly.
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "SYMFLOWS1";

namespace checkpoint {

inline void write_header(std::ostream& out, const std::string& tag) {
  out << kCheckpointMagic << '\n' << tag << '\n';
}

inline void read_header(std::istream& in, const std::string& tag) {
  std::string magic, got;
  if (!(in >> magic) || magic != kCheckpointMagic) throw Error("checkpoint: bad magic header");
  if (!(in >> got) || got != tag) throw Error("checkpoint: expected model '" + tag + "'");
}

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw Error("checkpoint: truncated");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw Error("checkpoint: bad number '" + token + "'");
  return v;
}

template <class T>
T read_value(std::istream& in) {
  T v{};
  if (!(in >> v)) throw Error("checkpoint: truncated");
  return v;
}

}  // namespace checkpoint

/// Presents a FlowModel<ModelInput> backend as a FlowModel<State> through an encoder.
template <class State, class Encoder>
class EncodedModel final : public FlowModel<State> {
 public:
  EncodedModel(FlowModel<ModelInput>& base, Encoder encoder)
      : base_(base), encoder_(std::move(encoder)) {}

  Heads evaluate(const State& s) const override { return base_.evaluate(encoder_(s)); }
  void accumulate(const State& s, const Heads& grad) override { base_.accumulate(encoder_(s), grad); }
  double log_z() const override { return base_.log_z(); }
  void accumulate_log_z(double grad) override { base_.accumulate_log_z(grad); }
  void apply_gradients() override { base_.apply_gradients(); }
  void zero_gradients() override { base_.zero_gradients(); }
  void save(std::ostream& out) const override { base_.save(out); }
  void load(std::istream& in) override { base_.load(in); }

 private:
  FlowModel<ModelInput>& base_;
  Encoder encoder_;
};

}  // namespace symflows
