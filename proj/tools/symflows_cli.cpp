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

// symflows command line: run, pe-bench, enumerate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "symflows/config.hpp"
#include "symflows/eval.hpp"
#include "symflows/experiment.hpp"
#include "symflows/graph_env.hpp"
#include "symflows/hypergrid.hpp"
#include "symflows/pe_bench.hpp"

namespace {

using namespace symflows;

int worker_threads() {
  const char* env = std::getenv("SYMFLOWS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  int n = 0;
  std::istringstream in(env);
  if (!(in >> n) || !in.eof() || n < 1) throw ConfigError(std::string("SYMFLOWS_THREADS: bad value '") + env + "'");
  return n;
}

int cmd_run(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  const RunResult r = run_experiment(cfg);
  std::cout << "wrote " << (std::filesystem::path(cfg.output_dir) / "metrics.csv").string() << " ("
            << r.rows.size() << " steps)\n";
  return 0;
}

int cmd_pe_bench(int n_max, const std::string& configs, const std::string& level_name, int n_colors,
                 const std::string& out_path) {
  if (n_max < 1 || n_max > 7) throw ConfigError("--n-max must be in [1, 7]");
  if (n_colors < 1) throw ConfigError("--colors must be positive");
  const graph::PELevel level = config_detail::parse_level(level_name);
  std::vector<graph::PEConfig> cfgs;
  if (configs.empty()) {
    for (auto c : graph::table_configs()) {
      c.level = level;
      cfgs.push_back(c);
    }
  } else {
    std::stringstream ss(configs);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) throw ConfigError("--configs: empty entry");
      cfgs.push_back(graph::PEConfig::parse(name, level));
    }
  }
  const auto result = graph::pe_benchmark(n_max, cfgs, n_colors, worker_threads());
  if (out_path.empty()) {
    graph::write_bench_csv(std::cout, result);
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    graph::write_bench_csv(out, result);
    std::cout << "wrote " << out_path << " (" << result.states << " states)\n";
  }
  return 0;
}

template <class E>
void enumerate_and_write(const E& env, const ExperimentConfig& cfg) {
  const auto index = enumerate_states(env);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = (std::filesystem::path(cfg.output_dir) / "states.idx").string();
  write_index(path, index, env.describe());
  std::cout << index.size() << '\n'
            << "terminal_states " << index.terminal_count() << '\n'
            << "index " << path << '\n';
}

int cmd_enumerate(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.env == EnvKind::hypergrid) {
    enumerate_and_write(hypergrid::GridEnv(cfg.horizon, cfg.dim, cfg.r0), cfg);
  } else {
    enumerate_and_write(graph::GraphEnv(cfg.graph), cfg);
    std::cout << "conventions:\n";
    for (const auto& c : graph::reconcile_state_counts(cfg.graph.n_max, cfg.graph.n_colors))
      std::cout << "  " << (c.connected_only ? "connected" : "any      ") << ' '
                << (c.include_empty ? "with-empty   " : "without-empty") << ' ' << c.count << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symflows: symmetry-aware generative flow networks"};
  app.require_subcommand(1);

  std::string run_path;
  auto* run = app.add_subcommand("run", "Train and evaluate one configured experiment");
  run->add_option("config", run_path, "Config file")->required();

  int n_max = 0, n_colors = 2;
  std::string configs, level = "graph", out_path;
  auto* bench = app.add_subcommand("pe-bench", "Compare PE action classes with exact classes");
  bench->add_option("--n-max", n_max, "Maximum node count")->required();
  bench->add_option("--configs", configs, "Comma-separated PE configs (default: all six)");
  bench->add_option("--level", level, "PE level: graph or node_edge");
  bench->add_option("--colors", n_colors, "Number of node colors");
  bench->add_option("--out", out_path, "CSV output path (default: stdout)");

  std::string enum_path;
  auto* enumerate = app.add_subcommand("enumerate", "Write the reachable state index");
  enumerate->add_option("config", enum_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    worker_threads();  // a malformed value is a config error for every subcommand
    if (*run) return cmd_run(run_path);
    if (*bench) return cmd_pe_bench(n_max, configs, level, n_colors, out_path);
    if (*enumerate) return cmd_enumerate(enum_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
