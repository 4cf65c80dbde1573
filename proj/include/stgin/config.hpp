/*
 * Copyright 2026 The stgin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stgin/eval.hpp"
#include "stgin/synth.hpp"
#include "stgin/train.hpp"

namespace stgin {

// Everything a run can configure, resolved from (defaults < config file <
// command-line overrides). Flat key=value text; unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  SynthConfig synth;
  EvalOptions eval;

  std::int64_t split_ts = 0;        // 0: derive from split_last_days
  int split_last_days = 4;          // test = trailing N days of the log
  std::string format = "jsonl";     // events file format: jsonl | csv

  std::string run_dir;              // default: runs/<utc stamp>-s<seed>
  std::string events_path;
  std::string truth_path;           // synth diagnostics sidecar
  std::string train_samples_path;
  std::string test_samples_path;
  std::string graph_path;
  std::string checkpoint_path;
  std::string snapshot_path;
  std::string poi_tsv_path;
  std::string views_tsv_path;
  std::string report_path;
  std::string train_log_path;

  std::string socket_path;          // serve on a unix socket when set
  int port = 0;                     // serve on loopback tcp when set
};

struct ConfigField {
  std::string key;
  std::string help;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("expected a boolean, got: " + v);
}

}  // namespace detail

// The single source of truth for config keys: parsing, printing and the
// documented defaults all walk this list.
inline std::vector<ConfigField> config_fields(RunConfig& c) {
  std::vector<ConfigField> fields;
  auto add_int = [&](const std::string& key, int* p, const std::string& help) {
    fields.push_back({key, help, [p] { return std::to_string(*p); },
                      [p](const std::string& v) { *p = std::stoi(v); }});
  };
  auto add_i64 = [&](const std::string& key, std::int64_t* p, const std::string& help) {
    fields.push_back({key, help, [p] { return std::to_string(*p); },
                      [p](const std::string& v) { *p = std::stoll(v); }});
  };
  auto add_u64 = [&](const std::string& key, std::uint64_t* p, const std::string& help) {
    fields.push_back({key, help, [p] { return std::to_string(*p); },
                      [p](const std::string& v) { *p = std::stoull(v); }});
  };
  auto add_size = [&](const std::string& key, std::size_t* p, const std::string& help) {
    fields.push_back({key, help, [p] { return std::to_string(*p); },
                      [p](const std::string& v) { *p = std::stoull(v); }});
  };
  auto add_double = [&](const std::string& key, double* p, const std::string& help) {
    fields.push_back({key, help,
                      [p] {
                        std::ostringstream s;
                        s << *p;
                        return s.str();
                      },
                      [p](const std::string& v) { *p = std::stod(v); }});
  };
  auto add_str = [&](const std::string& key, std::string* p, const std::string& help) {
    fields.push_back({key, help, [p] { return *p; }, [p](const std::string& v) { *p = v; }});
  };
  auto add_bool = [&](const std::string& key, bool* p, const std::string& help) {
    fields.push_back({key, help, [p] { return *p ? "true" : "false"; },
                      [p](const std::string& v) { *p = detail::parse_bool(v); }});
  };

  // model / training
  add_int("dim", &c.train.dim, "embedding dimension");
  add_double("lr", &c.train.lr, "Adam learning rate");
  add_int("batch", &c.train.batch, "training batch size");
  add_int("negatives", &c.train.negatives, "negative samples per positive");
  add_double("margin", &c.train.margin, "hinge margin");
  add_int("fanout1", &c.train.fanout1, "user tree hop-1 fanout");
  add_int("fanout2", &c.train.fanout2, "user tree hop-2 fanout");
  add_int("poi_fanout1", &c.train.poi_fanout1, "poi tree hop-1 fanout");
  add_int("poi_fanout2", &c.train.poi_fanout2, "poi tree hop-2 fanout");
  add_int("epochs", &c.train.epochs, "training epochs");
  add_int("max_steps", &c.train.max_steps, "step cap, 0 = none");
  add_u64("seed", &c.train.seed, "master seed for every random stream");
  add_i64("session_gap", &c.train.session_gap, "session split gap, seconds");
  add_i64("realtime_window", &c.train.realtime_window, "realtime window, seconds");
  add_int("max_realtime", &c.train.max_realtime, "realtime sequence cap M");
  add_i64("tz_offset", &c.train.tz_offset, "dataset utc offset, seconds");
  add_double("leaky_slope", &c.train.leaky_slope, "LeakyReLU negative slope");
  add_bool("mean_reduction", &c.train.mean_reduction, "mean batch loss instead of sum");
  add_double("hard_negative_frac", &c.train.hard_negative_frac,
             "fraction of negatives drawn from the query cell");
  fields.push_back({"variant", "model variant: none|rt|temporal|spatial|interaction|only_temporal|sum_temporal",
                    [&c] { return std::string(variant_name(c.train.variant)); },
                    [&c](const std::string& v) { c.train.variant = parse_variant(v); }});
  add_int("slot_morning", &c.train.slots.morning_start, "morning slot start hour");
  add_int("slot_noon", &c.train.slots.noon_start, "noon slot start hour");
  add_int("slot_dinner", &c.train.slots.dinner_start, "dinnertime slot start hour");
  add_int("slot_night", &c.train.slots.night_start, "night slot start hour");

  // synthetic data
  add_int("synth_users", &c.synth.n_users, "synthetic users");
  add_int("synth_pois", &c.synth.n_pois, "synthetic POIs");
  add_int("synth_cells", &c.synth.n_cells, "synthetic geo cells");
  add_int("synth_days", &c.synth.days, "synthetic log span, days");
  add_int("synth_categories", &c.synth.n_categories, "latent POI categories");
  add_int("synth_home_cells", &c.synth.home_cells, "home cells per user");
  add_double("synth_visits_per_day", &c.synth.visits_per_day, "visit rate per user-day");
  add_double("w_spatial", &c.synth.w_spatial, "mixture weight: per-cell preference");
  add_double("w_temporal", &c.synth.w_temporal, "mixture weight: per-slot preference");
  add_double("w_st", &c.synth.w_st, "mixture weight: per-(cell,slot) preference");
  add_double("w_recent", &c.synth.w_recent, "mixture weight: repeat a recent category");
  add_double("w_noise", &c.synth.w_noise, "mixture weight: uniform noise");
  add_int("favorites_per_pool", &c.synth.favorites_per_pool,
          "favorite POIs per (user, cell, category)");
  add_double("favorite_prob", &c.synth.favorite_prob, "probability a click hits a favorite");
  add_double("exact_revisit_prob", &c.synth.exact_revisit_prob,
             "recency channel: exact-POI revisit probability");
  add_double("usual_slot_prob", &c.synth.usual_slot_prob,
             "probability a visit lands in one of the cell's usual slots");
  add_int("habit_period_days", &c.synth.habit_period_days,
          "days between (cell,slot) preference re-rolls");
  add_i64("synth_start_ts", &c.synth.start_ts, "first day of the synthetic log");

  // dataset split / evaluation
  add_i64("split_ts", &c.split_ts, "train/test split timestamp, 0 = derive");
  add_int("split_last_days", &c.split_last_days, "test = trailing N days when split_ts=0");
  add_str("format", &c.format, "events file format: jsonl | csv");
  add_int("k", &c.eval.k, "retrieval depth K");
  add_size("eval_max_queries", &c.eval.max_queries, "evaluate at most N queries, 0 = all");
  add_i64("truth_window", &c.eval.truth_window, "ground-truth forward window, seconds");
  add_int("full_cap1", &c.eval.full_cap1, "hop-1 cap for deterministic trees");
  add_int("full_cap2", &c.eval.full_cap2, "hop-2 cap for deterministic trees");

  // paths
  add_str("run_dir", &c.run_dir, "artifact directory, default runs/<stamp>-s<seed>");
  add_str("events", &c.events_path, "events log path");
  add_str("truth_out", &c.truth_path, "synthetic ground-truth sidecar path");
  add_str("train_samples", &c.train_samples_path, "train samples jsonl");
  add_str("test_samples", &c.test_samples_path, "test samples jsonl");
  add_str("graph", &c.graph_path, "graph snapshot path");
  add_str("checkpoint", &c.checkpoint_path, "checkpoint path");
  add_str("snapshot", &c.snapshot_path, "serving snapshot path");
  add_str("poi_tsv", &c.poi_tsv_path, "poi vectors tsv path");
  add_str("views_tsv", &c.views_tsv_path, "user view vectors tsv path");
  add_str("report", &c.report_path, "eval report jsonl path");
  add_str("train_log", &c.train_log_path, "training log jsonl path");

  // serving
  add_str("socket", &c.socket_path, "serve on this unix socket instead of stdio");
  add_int("port", &c.port, "serve on loopback tcp port instead of stdio");
  return fields;
}

inline void apply_config_kv(RunConfig& c, const std::string& key, const std::string& value) {
  for (auto& f : config_fields(c)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ParseError("unknown config key: " + key);
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    const auto eq = line.find('=', start);
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      apply_config_kv(c, line.substr(start, eq - start), line.substr(eq + 1));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void print_config(RunConfig& c, std::ostream& out) {
  out << "# resolved configuration\n";
  for (auto& f : config_fields(c)) out << f.key << "=" << f.get() << "\n";
}

}  // namespace stgin
