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

#include <map>
#include <string>
#include <vector>

#include "symflows/adam.hpp"
#include "symflows/graph.hpp"
#include "symflows/model.hpp"

namespace symflows {

/**
 * Exact parameterization: one parameter block per state key, laid out as
 * [forward logits | backward logits | log state flow]. Unseen states read as
 * zeros (uniform policy, unit flow); a block is allocated, zero-initialized,
 * the first time a gradient reaches it and is reused from then on.
 */
class TabularModel final : public FlowModel<ModelInput> {
 public:
  struct Entry {
    std::size_t offset = 0;
    int forward_size = 0;
    int backward_size = 0;
  };

  explicit TabularModel(OptimizerConfig opt = {})
      : opt_(opt), adam_(opt.adam), z_adam_(scaled(opt)) {}

  Heads evaluate(const ModelInput& x) const override {
    Heads h;
    h.forward.assign(x.forward_size, 0.0);
    h.backward.assign(x.backward_size, 0.0);
    auto it = index_.find(x.key);
    if (it == index_.end()) return h;
    check_shape(it->second, x);
    const double* p = params_.data() + it->second.offset;
    std::copy(p, p + x.forward_size, h.forward.begin());
    std::copy(p + x.forward_size, p + x.forward_size + x.backward_size, h.backward.begin());
    h.log_flow = p[x.forward_size + x.backward_size];
    return h;
  }

  void accumulate(const ModelInput& x, const Heads& grad) override {
    const Entry& e = entry(x);
    double* g = grads_.data() + e.offset;
    for (int i = 0; i < e.forward_size; ++i) g[i] += grad.forward[i];
    for (int i = 0; i < e.backward_size; ++i) g[e.forward_size + i] += grad.backward[i];
    g[e.forward_size + e.backward_size] += grad.log_flow;
  }

  double log_z() const override { return log_z_; }
  void accumulate_log_z(double grad) override { log_z_grad_ += grad; }

  void apply_gradients() override {
    adam_.step(params_, grads_);
    z_adam_.step(std::span<double>(&log_z_, 1), std::span<const double>(&log_z_grad_, 1));
    zero_gradients();
  }

  void zero_gradients() override {
    std::fill(grads_.begin(), grads_.end(), 0.0);
    log_z_grad_ = 0.0;
  }

  /// Allocates the block for x on first use.
  const Entry& entry(const ModelInput& x) {
    auto [it, fresh] = index_.try_emplace(x.key);
    if (fresh) {
      it->second = Entry{params_.size(), x.forward_size, x.backward_size};
      params_.resize(params_.size() + x.forward_size + x.backward_size + 1, 0.0);
      grads_.resize(params_.size(), 0.0);
    } else {
      check_shape(it->second, x);
    }
    return it->second;
  }

  std::size_t size() const { return index_.size(); }
  std::size_t parameter_count() const { return params_.size() + 1; }
  std::vector<double>& parameters() { return params_; }
  void set_log_z(double v) { log_z_ = v; }

  void save(std::ostream& out) const override {
    checkpoint::write_header(out, "tabular");
    out << checkpoint::format_double(log_z_) << '\n' << index_.size() << '\n';
    for (const auto& [key, e] : index_) {
      out << (key.empty() ? "-" : graph::to_hex(key)) << ' ' << e.forward_size << ' '
          << e.backward_size;
      for (int i = 0; i <= e.forward_size + e.backward_size; ++i)
        out << ' ' << checkpoint::format_double(params_[e.offset + i]);
      out << '\n';
    }
  }

  void load(std::istream& in) override {
    checkpoint::read_header(in, "tabular");
    index_.clear();
    params_.clear();
    log_z_ = checkpoint::read_double(in);
    const auto count = checkpoint::read_value<std::size_t>(in);
    for (std::size_t k = 0; k < count; ++k) {
      const auto hex = checkpoint::read_value<std::string>(in);
      ModelInput x;
      x.key = hex == "-" ? std::string{} : graph::from_hex(hex);
      x.forward_size = checkpoint::read_value<int>(in);
      x.backward_size = checkpoint::read_value<int>(in);
      const Entry e = entry(x);
      for (int i = 0; i <= e.forward_size + e.backward_size; ++i)
        params_[e.offset + i] = checkpoint::read_double(in);
    }
    grads_.assign(params_.size(), 0.0);
    log_z_grad_ = 0.0;
  }

 private:
  static AdamConfig scaled(const OptimizerConfig& opt) {
    AdamConfig c = opt.adam;
    c.learning_rate *= opt.log_z_lr_scale;
    return c;
  }

  static void check_shape(const Entry& e, const ModelInput& x) {
    if (e.forward_size != x.forward_size || e.backward_size != x.backward_size)
      throw Error("tabular model: head sizes changed for an existing state");
  }

  OptimizerConfig opt_;
  Adam adam_, z_adam_;
  std::map<std::string, Entry> index_;
  std::vector<double> params_, grads_;
  double log_z_ = 0.0, log_z_grad_ = 0.0;
};

}  // namespace symflows
