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
 * Small fully connected network with hand-written reverse mode.
 *
 * Parameters live in one flat vector; layer l stores its weight matrix
 * (out x in, row-major) followed by its bias. Hidden layers apply the
 * activation, the output layer is affine.
 */

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/model.hpp"
#include "symflows/rng.hpp"

namespace symflows {

enum class Activation { tanh, relu, identity };

class DenseNet {
 public:
  // Pre- and post-activation values of every layer, kept for backward().
  struct Tape {
    std::vector<std::vector<double>> inputs;  // inputs[l] feeds layer l
    std::vector<std::vector<double>> pre;     // pre-activation of layer l
    std::vector<double> output;
  };

  DenseNet() = default;

  // sizes = {input, hidden..., output}
  explicit DenseNet(std::vector<int> sizes, Activation act = Activation::tanh)
      : sizes_(std::move(sizes)), act_(act) {
    if (sizes_.size() < 2) throw Error("dense net needs at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw Error("dense net layer sizes must be positive");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
    }
    params_.assign(total, 0.0);
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  void initialize(Rng& rng) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      const std::size_t count = static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
      for (std::size_t i = 0; i < count; ++i) params_[offsets_[l] + i] = rng.uniform(-bound, bound);
    }
  }

  std::size_t layers() const { return sizes_.size() - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double* weights(std::size_t l) { return params_.data() + offsets_[l]; }
  double* bias(std::size_t l) {
    return weights(l) + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l];
  }

  std::vector<double> forward(std::span<const double> input) const {
    Tape tape;
    forward(input, tape);
    return tape.output;
  }

  void forward(std::span<const double> input, Tape& tape) const {
    if (static_cast<int>(input.size()) != input_size())
      throw Error("dense net: input length " + std::to_string(input.size()) + ", expected " +
                  std::to_string(input_size()));
    tape.inputs.assign(layers(), {});
    tape.pre.assign(layers(), {});
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t l = 0; l < layers(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + static_cast<std::size_t>(out) * in;
      std::vector<double> z(out);
      for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        z[o] = acc;
      }
      tape.inputs[l] = std::move(x);
      tape.pre[l] = z;
      if (l + 1 < layers())
        for (double& v : z) v = activate(v);
      x = std::move(z);
    }
    tape.output = std::move(x);
  }

  /// Gradient of <output, output_grad> w.r.t. the parameters, added into `grad`.
  void backward(const Tape& tape, std::span<const double> output_grad, std::span<double> grad) const {
    if (static_cast<int>(output_grad.size()) != output_size())
      throw Error("dense net: output gradient length mismatch");
    if (grad.size() != params_.size()) throw Error("dense net: gradient buffer size mismatch");
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t l = layers(); l-- > 0;) {
      const int in = sizes_[l], out = sizes_[l + 1];
      if (l + 1 < layers())
        for (int o = 0; o < out; ++o) delta[o] *= activate_derivative(tape.pre[l][o]);
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + static_cast<std::size_t>(out) * in;
      const auto& x = tape.inputs[l];
      std::vector<double> prev(in, 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* grow = gw + static_cast<std::size_t>(o) * in;
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          grow[i] += d * x[i];
          prev[i] += d * wrow[i];
        }
      }
      delta = std::move(prev);
    }
  }

 private:
  double activate(double v) const {
    switch (act_) {
      case Activation::tanh: return std::tanh(v);
      case Activation::relu: return v > 0.0 ? v : 0.0;
      case Activation::identity: return v;
    }
    return v;
  }

  double activate_derivative(double pre) const {
    switch (act_) {
      case Activation::tanh: {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
      }
      case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
      case Activation::identity: return 1.0;
    }
    return 1.0;
  }

  std::vector<int> sizes_;
  Activation act_ = Activation::tanh;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/**
 * FlowModel backend over a DenseNet with a fixed head layout: the output
 * vector is [forward slots | backward slots | log flow].
 */
class DenseFlowModel final : public FlowModel<ModelInput> {
 public:
  DenseFlowModel(int input_size, std::vector<int> hidden, int forward_slots, int backward_slots,
                 OptimizerConfig opt = {}, Activation act = Activation::tanh)
      : forward_slots_(forward_slots),
        backward_slots_(backward_slots),
        net_(layer_sizes(input_size, hidden, forward_slots + backward_slots + 1), act),
        grads_(net_.parameters().size(), 0.0),
        adam_(opt.adam),
        z_adam_(scaled(opt)) {}

  void initialize(Rng& rng) { net_.initialize(rng); }

  Heads evaluate(const ModelInput& x) const override {
    check(x);
    return split(net_.forward(x.features));
  }

  void accumulate(const ModelInput& x, const Heads& grad) override {
    check(x);
    DenseNet::Tape tape;
    net_.forward(x.features, tape);
    std::vector<double> out_grad;
    out_grad.reserve(net_.output_size());
    out_grad.insert(out_grad.end(), grad.forward.begin(), grad.forward.end());
    out_grad.insert(out_grad.end(), grad.backward.begin(), grad.backward.end());
    out_grad.push_back(grad.log_flow);
    net_.backward(tape, out_grad, grads_);
  }

  double log_z() const override { return log_z_; }
  void accumulate_log_z(double grad) override { log_z_grad_ += grad; }

  void apply_gradients() override {
    adam_.step(net_.parameters(), grads_);
    z_adam_.step(std::span<double>(&log_z_, 1), std::span<const double>(&log_z_grad_, 1));
    zero_gradients();
  }

  void zero_gradients() override {
    std::fill(grads_.begin(), grads_.end(), 0.0);
    log_z_grad_ = 0.0;
  }

  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  void save(std::ostream& out) const override {
    checkpoint::write_header(out, "dense");
    out << net_.sizes().size();
    for (int s : net_.sizes()) out << ' ' << s;
    out << '\n' << forward_slots_ << ' ' << backward_slots_ << '\n';
    out << checkpoint::format_double(log_z_) << '\n';
    const auto p = net_.parameters();
    out << p.size() << '\n';
    for (std::size_t i = 0; i < p.size(); ++i)
      out << checkpoint::format_double(p[i]) << (i + 1 == p.size() || i % 8 == 7 ? '\n' : ' ');
  }

  void load(std::istream& in) override {
    checkpoint::read_header(in, "dense");
    const auto layers = checkpoint::read_value<std::size_t>(in);
    std::vector<int> sizes(layers);
    for (auto& s : sizes) s = checkpoint::read_value<int>(in);
    const int f = checkpoint::read_value<int>(in), b = checkpoint::read_value<int>(in);
    if (sizes != net_.sizes() || f != forward_slots_ || b != backward_slots_)
      throw Error("checkpoint: dense architecture mismatch");
    log_z_ = checkpoint::read_double(in);
    const auto count = checkpoint::read_value<std::size_t>(in);
    auto p = net_.parameters();
    if (count != p.size()) throw Error("checkpoint: parameter count mismatch");
    for (auto& v : p) v = checkpoint::read_double(in);
  }

 private:
  static std::vector<int> layer_sizes(int input, const std::vector<int>& hidden, int output) {
    std::vector<int> s{input};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(output);
    return s;
  }

  static AdamConfig scaled(const OptimizerConfig& opt) {
    AdamConfig c = opt.adam;
    c.learning_rate *= opt.log_z_lr_scale;
    return c;
  }

  void check(const ModelInput& x) const {
    if (x.forward_size != forward_slots_ || x.backward_size != backward_slots_)
      throw Error("dense model: head layout does not match the environment");
  }

  Heads split(const std::vector<double>& out) const {
    Heads h;
    h.forward.assign(out.begin(), out.begin() + forward_slots_);
    h.backward.assign(out.begin() + forward_slots_, out.begin() + forward_slots_ + backward_slots_);
    h.log_flow = out.back();
    return h;
  }

  int forward_slots_, backward_slots_;
  DenseNet net_;
  std::vector<double> grads_;
  Adam adam_, z_adam_;
  double log_z_ = 0.0, log_z_grad_ = 0.0;
};

}  // namespace symflows
