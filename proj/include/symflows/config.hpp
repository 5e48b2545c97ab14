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
 * Experiment configuration.
 *
 * Format: one `key = value` per line under `[env]`, `[train]`, `[eval]` or
 * `[output]` headers; `#` and `;` start comments. Keys that do not exist,
 * or that do not apply to the selected environment, are rejected with the
 * offending line number. Omitted keys take their defaults, and
 * `resolved_text()` writes back every key so the result parses to the same
 * plan.
 */

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "symflows/error.hpp"
#include "symflows/gfn.hpp"
#include "symflows/graph_env.hpp"
#include "symflows/hypergrid.hpp"
#include "symflows/model.hpp"
#include "symflows/pe.hpp"

namespace symflows {

enum class EnvKind { hypergrid, graph };
enum class ModelKind { tabular, dense };

struct ExperimentConfig {
  EnvKind env = EnvKind::hypergrid;

  // hypergrid
  int horizon = 16;
  int dim = 3;
  hypergrid::SymmetryMode grid_symmetry = hypergrid::SymmetryMode::baseline;

  // graph
  graph::GraphEnvConfig graph{};

  double r0 = 0.001;  // shared key; the graph default is applied at parse time

  TrainConfig train{};
  double learning_rate = 1e-3;
  double log_z_lr_scale = 10.0;
  ModelKind model = ModelKind::tabular;
  std::vector<int> hidden{64, 64};

  long eval_every = 100;
  std::size_t window = 200'000;

  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.env == b.env && a.horizon == b.horizon && a.dim == b.dim && a.grid_symmetry == b.grid_symmetry &&
           a.graph.n_max == b.graph.n_max && a.graph.n_colors == b.graph.n_colors &&
           a.graph.reward == b.graph.reward && a.graph.r0 == b.graph.r0 &&
           a.graph.symmetry == b.graph.symmetry && a.graph.pe == b.graph.pe && a.r0 == b.r0 &&
           a.train.loss == b.train.loss && a.train.epsilon == b.train.epsilon &&
           a.train.batch_size == b.train.batch_size && a.train.steps == b.train.steps &&
           a.train.seed == b.train.seed && a.train.learn_backward == b.train.learn_backward &&
           a.learning_rate == b.learning_rate && a.log_z_lr_scale == b.log_z_lr_scale &&
           a.model == b.model && a.hidden == b.hidden && a.eval_every == b.eval_every &&
           a.window == b.window && a.output_dir == b.output_dir;
  }

  OptimizerConfig optimizer() const {
    OptimizerConfig o;
    o.adam.learning_rate = learning_rate;
    o.log_z_lr_scale = log_z_lr_scale;
    return o;
  }

  std::string resolved_text() const;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    const std::string where = it == entries_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
    throw ConfigError(where + ": " + what);
  }

  std::optional<std::string> text(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.push_back(key);
    return it->second.value;
  }

  template <class T>
  void number(const std::string& key, T& out) {
    const auto v = text(key);
    if (!v) return;
    T parsed{};
    const char* b = v->data();
    const char* e = b + v->size();
    std::from_chars_result r{};
    if constexpr (std::is_floating_point_v<T>) {
      // from_chars for double is not available everywhere; strtod with a full-match check.
      char* end = nullptr;
      parsed = static_cast<T>(std::strtod(v->c_str(), &end));
      r.ptr = end;
      r.ec = (end == b || v->empty()) ? std::errc::invalid_argument : std::errc{};
    } else {
      r = std::from_chars(b, e, parsed);
    }
    if (r.ec != std::errc{} || r.ptr != e) fail(key, "invalid number '" + *v + "' for '" + key + "'");
    out = parsed;
  }

  void flag(const std::string& key, bool& out) {
    const auto v = text(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") out = true;
    else if (*v == "false" || *v == "0" || *v == "no") out = false;
    else fail(key, "invalid boolean '" + *v + "' for '" + key + "'");
  }

  // Converts with `parse`, re-raising its error at the key's line.
  template <class T, class Parse>
  void choice(const std::string& key, T& out, Parse&& parse) {
    const auto v = text(key);
    if (!v) return;
    try {
      out = parse(*v);
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
  }

  void reject_unused(const std::string& env_name) const {
    for (const auto& [key, entry] : entries_) {
      if (std::find(used_.begin(), used_.end(), key) != used_.end()) continue;
      throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": key '" + key +
                        "' is unknown or does not apply to env=" + env_name);
    }
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> used_;
};

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    int v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size() || v < 1)
      throw ConfigError("invalid layer width list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

inline graph::RwReading parse_reading(std::string_view s) {
  if (s == "column") return graph::RwReading::column;
  if (s == "row") return graph::RwReading::row;
  if (s == "diagonal") return graph::RwReading::diagonal;
  throw ConfigError("unknown rw_reading '" + std::string(s) + "' (expected column, row or diagonal)");
}

inline std::string_view reading_name(graph::RwReading r) {
  switch (r) {
    case graph::RwReading::column: return "column";
    case graph::RwReading::row: return "row";
    case graph::RwReading::diagonal: return "diagonal";
  }
  return "?";
}

inline graph::PELevel parse_level(std::string_view s) {
  if (s == "graph") return graph::PELevel::graph;
  if (s == "node_edge") return graph::PELevel::node_edge;
  throw ConfigError("unknown pe_level '" + std::string(s) + "' (expected graph or node_edge)");
}

}  // namespace config_detail

/// Parses configuration text; `source` names the input in diagnostics.
inline ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>") {
  using namespace config_detail;
  static const std::map<std::string, std::vector<std::string>> kSections = {
      {"env",
       {"env", "horizon", "dim", "r0", "symmetry", "n_max", "n_colors", "reward", "pe", "pe_level", "rw_powers",
        "rw_reading", "wl_colors"}},
      {"train",
       {"loss", "epsilon", "batch_size", "steps", "learning_rate", "seed", "learn_backward", "model", "hidden",
        "log_z_lr_scale"}},
      {"eval", {"every", "window"}},
      {"output", {"dir"}},
  };

  std::map<std::string, Entry> entries;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "malformed section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!kSections.count(section)) throw ConfigError(where() + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value', got '" + line + "'");
    if (section.empty()) throw ConfigError(where() + "key outside of any [section]");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& allowed = kSections.at(section);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where() + "unknown key '" + key + "' in [" + section + "]");
    if (value.empty()) throw ConfigError(where() + "empty value for '" + key + "'");
    const std::string full = section + "." + key;
    if (entries.count(full)) throw ConfigError(where() + "duplicate key '" + key + "' in [" + section + "]");
    entries[full] = Entry{value, line_no};
  }

  Reader r(source, std::move(entries));
  ExperimentConfig c;
  std::string env_name = "hypergrid";
  if (auto v = r.text("env.env")) {
    env_name = *v;
    if (env_name == "hypergrid") c.env = EnvKind::hypergrid;
    else if (env_name == "graph") c.env = EnvKind::graph;
    else r.fail("env.env", "unknown env '" + env_name + "' (expected hypergrid or graph)");
  }

  if (c.env == EnvKind::hypergrid) {
    c.r0 = 0.001;
    c.train.loss = LossKind::tb;
    r.number("env.horizon", c.horizon);
    r.number("env.dim", c.dim);
    r.number("env.r0", c.r0);
    r.choice("env.symmetry", c.grid_symmetry, hypergrid::parse_symmetry);
    if (c.horizon < 1 || c.horizon > 255) r.fail("env.horizon", "horizon must lie in [1, 255]");
    if (c.dim < 1) r.fail("env.dim", "dim must be at least 1");
    if (c.grid_symmetry == hypergrid::SymmetryMode::group_average && c.dim > hypergrid::GroupAverageModel::kMaxDim)
      r.fail("env.dim", "group_average supports dim <= 6");
  } else {
    c.r0 = 0.1;
    c.train.loss = LossKind::db;
    auto& g = c.graph;
    g.pe = graph::PEConfig::parse("RW+edge", graph::PELevel::node_edge);
    r.number("env.n_max", g.n_max);
    r.number("env.n_colors", g.n_colors);
    r.number("env.r0", c.r0);
    r.choice("env.reward", g.reward, graph::parse_reward);
    r.choice("env.symmetry", g.symmetry, graph::parse_graph_symmetry);
    graph::PELevel level = g.pe.level;
    r.choice("env.pe_level", level, parse_level);
    if (auto v = r.text("env.pe")) {
      try {
        g.pe = graph::PEConfig::parse(*v, level);
      } catch (const ConfigError& e) {
        r.fail("env.pe", e.what());
      }
    }
    g.pe.level = level;
    r.number("env.rw_powers", g.pe.rw_powers);
    r.choice("env.rw_reading", g.pe.rw_reading, parse_reading);
    r.flag("env.wl_colors", g.pe.wl_colors);
    if (g.symmetry != graph::GraphSymmetry::pe)
      for (const char* key : {"env.pe", "env.pe_level", "env.rw_powers", "env.rw_reading", "env.wl_colors"})
        if (r.has(key)) r.fail(key, std::string("'") + (key + 4) + "' requires symmetry = pe");
    g.r0 = c.r0;
    try {
      g.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
  if (!(c.r0 > 0.0)) r.fail("env.r0", "r0 must be positive");

  r.choice("train.loss", c.train.loss, parse_loss);
  r.number("train.epsilon", c.train.epsilon);
  r.number("train.batch_size", c.train.batch_size);
  r.number("train.steps", c.train.steps);
  r.number("train.learning_rate", c.learning_rate);
  r.number("train.seed", c.train.seed);
  r.flag("train.learn_backward", c.train.learn_backward);
  r.number("train.log_z_lr_scale", c.log_z_lr_scale);
  r.choice("train.model", c.model, [](std::string_view s) {
    if (s == "tabular") return ModelKind::tabular;
    if (s == "dense") return ModelKind::dense;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected tabular or dense)");
  });
  if (auto v = r.text("train.hidden")) {
    try {
      c.hidden = parse_int_list(*v);
    } catch (const ConfigError& e) {
      r.fail("train.hidden", e.what());
    }
  }
  if (!(c.train.epsilon >= 0.0 && c.train.epsilon <= 1.0)) r.fail("train.epsilon", "epsilon must lie in [0, 1]");
  if (c.train.batch_size < 1) r.fail("train.batch_size", "batch_size must be positive");
  if (c.train.steps < 0) r.fail("train.steps", "steps must be non-negative");
  if (!(c.learning_rate > 0.0)) r.fail("train.learning_rate", "learning_rate must be positive");
  if (!(c.log_z_lr_scale > 0.0)) r.fail("train.log_z_lr_scale", "log_z_lr_scale must be positive");
  if (c.model == ModelKind::dense && c.env == EnvKind::graph)
    r.fail("train.model", "the dense model needs a fixed action layout and is only available for env=hypergrid");

  r.number("eval.every", c.eval_every);
  std::size_t window = c.window;
  r.number("eval.window", window);
  c.window = window;
  if (c.eval_every < 1) r.fail("eval.every", "every must be positive");
  if (c.window < 1) r.fail("eval.window", "window must be positive");

  if (auto v = r.text("output.dir")) c.output_dir = *v;

  r.reject_unused(env_name);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string ExperimentConfig::resolved_text() const {
  using config_detail::reading_name;
  std::ostringstream o;
  auto num = [](double v) { return checkpoint::format_double(v); };
  o << "[env]\n";
  if (env == EnvKind::hypergrid) {
    o << "env = hypergrid\n"
      << "horizon = " << horizon << "\n"
      << "dim = " << dim << "\n"
      << "r0 = " << num(r0) << "\n"
      << "symmetry = " << hypergrid::to_string(grid_symmetry) << "\n";
  } else {
    o << "env = graph\n"
      << "n_max = " << graph.n_max << "\n"
      << "n_colors = " << graph.n_colors << "\n"
      << "r0 = " << num(r0) << "\n"
      << "reward = " << graph::to_string(graph.reward) << "\n"
      << "symmetry = " << graph::to_string(graph.symmetry) << "\n";
    if (graph.symmetry == graph::GraphSymmetry::pe)
      o << "pe = " << graph.pe.name() << "\n"
        << "pe_level = " << (graph.pe.level == graph::PELevel::graph ? "graph" : "node_edge") << "\n"
        << "rw_powers = " << graph.pe.rw_powers << "\n"
        << "rw_reading = " << reading_name(graph.pe.rw_reading) << "\n"
        << "wl_colors = " << (graph.pe.wl_colors ? "true" : "false") << "\n";
  }
  o << "\n[train]\n"
    << "loss = " << to_string(train.loss) << "\n"
    << "epsilon = " << num(train.epsilon) << "\n"
    << "batch_size = " << train.batch_size << "\n"
    << "steps = " << train.steps << "\n"
    << "learning_rate = " << num(learning_rate) << "\n"
    << "seed = " << train.seed << "\n"
    << "learn_backward = " << (train.learn_backward ? "true" : "false") << "\n"
    << "model = " << (model == ModelKind::tabular ? "tabular" : "dense") << "\n";
  o << "hidden = ";
  for (std::size_t i = 0; i < hidden.size(); ++i) o << (i ? "," : "") << hidden[i];
  o << "\n"
    << "log_z_lr_scale = " << num(log_z_lr_scale) << "\n";
  o << "\n[eval]\n"
    << "every = " << eval_every << "\n"
    << "window = " << window << "\n";
  o << "\n[output]\n"
    << "dir = " << output_dir << "\n";
  return o.str();
}

}  // namespace symflows
