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
 * One configured training run with periodic exact evaluation.
 *
 * Outputs, all under cfg.output_dir and all reproducible from the config:
 *   resolved.cfg  every key with its effective value
 *   metrics.csv   step,states_visited,loss,aux,l1,jsd,avg_reward
 *   model.ckpt    final parameters
 *   summary.json  final metrics and index sizes
 *
 * Hypergrid rows carry the empirical L1 of the sliding window against the
 * reward distribution; graph rows carry the JS divergence of the exact
 * learned distribution. avg_reward is the window mean for both.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "symflows/config.hpp"
#include "symflows/dense_net.hpp"
#include "symflows/eval.hpp"
#include "symflows/gfn.hpp"
#include "symflows/graph_env.hpp"
#include "symflows/hypergrid.hpp"
#include "symflows/tabular.hpp"

namespace symflows {

struct MetricsRow {
  StepMetrics train;
  std::optional<double> l1, jsd, avg_reward;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  std::size_t states = 0;
  std::size_t terminals = 0;
  double final_l1 = 0.0;   // empirical window L1 (hypergrid only)
  double final_jsd = 0.0;  // exact JS divergence
  double dp_l1 = 0.0;      // exact L1 of the learned distribution
  double final_avg_reward = 0.0;
  double log_z_true = 0.0;
  double log_z_estimate = 0.0;

  /// states_visited at the first evaluated row with l1 below `threshold`, or -1.
  long first_l1_below(double threshold) const {
    for (const auto& r : rows)
      if (r.l1 && *r.l1 < threshold) return r.train.states_visited;
    return -1;
  }
};

inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "step,states_visited,loss,aux,l1,jsd,avg_reward\n";
  for (const auto& r : rows)
    out << r.train.step << ',' << r.train.states_visited << ',' << format_metric(r.train.loss) << ','
        << format_metric(r.train.aux) << ',' << format_metric(r.l1) << ',' << format_metric(r.jsd) << ','
        << format_metric(r.avg_reward) << '\n';
}

namespace detail {

template <Environment E>
RunResult run_with(const E& env, FlowModel<typename E::State>& model, const ExperimentConfig& cfg, bool empirical_l1) {
  RunResult res;
  const auto index = enumerate_states(env);
  const auto truth = ground_truth(index, env);
  res.states = index.size();
  res.terminals = index.terminal_count();
  res.log_z_true = log_partition(index, env);
  SlidingWindow window(index.terminal_count(), cfg.window);

  train(env, model, cfg.train, [&](const StepMetrics& m, auto batch) {
    for (const auto& t : batch) window.push(index.terminal_of(env.key(t.terminal())), t.terminal_reward);
    MetricsRow row{m, {}, {}, {}};
    if (m.step % cfg.eval_every == 0 || m.step == cfg.train.steps) {
      row.avg_reward = window.average_reward();
      if (empirical_l1) row.l1 = l1_distance(window.distribution(), truth);
      else row.jsd = js_divergence(truth, model_distribution(index, env, model));
    }
    res.rows.push_back(row);
  });

  const auto learned = model_distribution(index, env, model);
  res.dp_l1 = l1_distance(learned, truth);
  res.final_jsd = js_divergence(truth, learned);
  if (window.size() > 0) {
    res.final_l1 = l1_distance(window.distribution(), truth);
    res.final_avg_reward = window.average_reward();
  }
  res.log_z_estimate = log_partition_estimate(env, model, cfg.train.loss);
  return res;
}

}  // namespace detail

/**
 * Runs the experiment; with `write_outputs` the result files are written to
 * cfg.output_dir (created if missing).
 */
inline RunResult run_experiment(const ExperimentConfig& cfg, bool write_outputs = true) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  if (write_outputs) {
    fs::create_directories(dir);
    std::ofstream(dir / "resolved.cfg") << cfg.resolved_text();
  }

  RunResult res;
  std::unique_ptr<FlowModel<ModelInput>> base;
  std::string description;
  if (cfg.env == EnvKind::hypergrid) {
    using namespace hypergrid;
    const GridEnv env(cfg.horizon, cfg.dim, cfg.r0);
    description = env.describe();
    if (cfg.model == ModelKind::dense) {
      auto net = std::make_unique<DenseFlowModel>(cfg.horizon * cfg.dim, cfg.hidden, cfg.dim + 1, cfg.dim,
                                                  cfg.optimizer());
      Rng init = Rng::stream(cfg.train.seed, "init");
      net->initialize(init);
      base = std::move(net);
    } else {
      base = std::make_unique<TabularModel>(cfg.optimizer());
    }
    EncodedModel<GridState, OneHotEncoder> encoded(*base, OneHotEncoder{cfg.horizon, cfg.dim});
    switch (cfg.grid_symmetry) {
      case SymmetryMode::baseline: res = symflows::detail::run_with(env, encoded, cfg, true); break;
      case SymmetryMode::group_average: {
        GroupAverageModel wrapped(encoded, cfg.horizon, cfg.dim, cfg.train.loss == LossKind::fm);
        res = symflows::detail::run_with(env, wrapped, cfg, true);
        break;
      }
      case SymmetryMode::canonical: {
        CanonicalModel wrapped(encoded);
        res = symflows::detail::run_with(env, wrapped, cfg, true);
        break;
      }
    }
  } else {
    using namespace graph;
    const GraphEnv env(cfg.graph);
    description = env.describe();
    base = std::make_unique<TabularModel>(cfg.optimizer());
    EncodedModel<ColoredGraph, GraphTabularEncoder> encoded(*base, GraphTabularEncoder{&env});
    res = symflows::detail::run_with(env, encoded, cfg, false);
  }

  if (write_outputs) {
    {
      std::ofstream out(dir / "metrics.csv");
      write_metrics_csv(out, res.rows);
      if (!out) throw Error("cannot write " + (dir / "metrics.csv").string());
    }
    {
      std::ofstream out(dir / "model.ckpt");
      base->save(out);
      if (!out) throw Error("cannot write " + (dir / "model.ckpt").string());
    }
    nlohmann::ordered_json j;
    j["env"] = description;
    j["loss"] = std::string(to_string(cfg.train.loss));
    j["steps"] = cfg.train.steps;
    j["states"] = res.states;
    j["terminal_states"] = res.terminals;
    j["states_visited"] = res.rows.empty() ? 0L : res.rows.back().train.states_visited;
    if (cfg.env == EnvKind::hypergrid) j["final_l1"] = res.final_l1;
    j["final_jsd"] = res.final_jsd;
    j["exact_l1"] = res.dp_l1;
    j["final_avg_reward"] = res.final_avg_reward;
    j["log_z_true"] = res.log_z_true;
    j["log_z_estimate"] = res.log_z_estimate;
    std::ofstream(dir / "summary.json") << j.dump(2) << '\n';
  }
  return res;
}

}  // namespace symflows
