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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stgin/ablate.hpp"
#include "stgin/config.hpp"
#include "stgin/serve.hpp"
#include "stgin/serve_socket.hpp"
#include "stgin/snapshot.hpp"

namespace fs = std::filesystem;
using namespace stgin;

namespace {

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Fills every unset path with a default inside the run directory.
void resolve_paths(RunConfig& cfg) {
  if (cfg.run_dir.empty())
    cfg.run_dir = "runs/" + utc_stamp() + "-s" + std::to_string(cfg.train.seed);
  fs::create_directories(cfg.run_dir);
  auto fallback = [&](std::string& path, const char* name) {
    if (path.empty()) path = cfg.run_dir + "/" + name;
  };
  fallback(cfg.events_path, "events.jsonl");
  fallback(cfg.truth_path, "synth_truth.json");
  fallback(cfg.train_samples_path, "train.jsonl");
  fallback(cfg.test_samples_path, "test.jsonl");
  fallback(cfg.graph_path, "graph.stgn");
  fallback(cfg.checkpoint_path, "model.stgc");
  fallback(cfg.snapshot_path, "snapshot.stgs");
  fallback(cfg.poi_tsv_path, "poi_vectors.tsv");
  fallback(cfg.views_tsv_path, "user_views.tsv");
  fallback(cfg.report_path, "report.jsonl");
  fallback(cfg.train_log_path, "train_log.jsonl");
}

DatasetOptions dataset_options(const RunConfig& cfg) {
  DatasetOptions opt;
  opt.realtime_window = cfg.train.realtime_window;
  opt.split_ts = cfg.split_ts;
  opt.max_realtime = cfg.train.max_realtime;
  opt.tz_offset = cfg.train.tz_offset;
  opt.slots = cfg.train.slots;
  return opt;
}

int cmd_synth(RunConfig& cfg) {
  cfg.synth.seed = cfg.train.seed;
  cfg.synth.tz_offset = cfg.train.tz_offset;
  cfg.synth.slots = cfg.train.slots;
  auto out = generate_synthetic(cfg.synth);
  write_event_log(cfg.events_path, out.events, parse_log_format(cfg.format));
  std::ofstream truth(cfg.truth_path, std::ios::trunc);
  truth << synth_truth_json(cfg.synth, out.truth).dump() << "\n";
  std::cout << "wrote " << out.events.size() << " events to " << cfg.events_path
            << "\nwrote ground-truth tables to " << cfg.truth_path << "\n";
  return 0;
}

int cmd_ingest(RunConfig& cfg) {
  ParseReport rep;
  auto events = parse_event_log(cfg.events_path, parse_log_format(cfg.format), &rep);
  if (events.empty()) throw Error("no valid events in " + cfg.events_path);
  DatasetOptions opt = dataset_options(cfg);
  if (opt.split_ts == 0) {
    std::int64_t max_ts = 0;
    for (const auto& e : events) max_ts = std::max(max_ts, e.ts);
    opt.split_ts = max_ts - std::int64_t(cfg.split_last_days) * 86400;
  }
  auto ds = build_dataset(events, opt);
  write_samples_jsonl(ds, ds.train, cfg.train_samples_path);
  write_samples_jsonl(ds, ds.test, cfg.test_samples_path);
  std::cout << "accepted " << rep.accepted << " events, rejected " << rep.rejected.size() << "\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, rep.rejected.size()); ++i)
    std::cout << "  line " << rep.rejected[i].first << ": " << rep.rejected[i].second << "\n";
  std::cout << "split at ts " << opt.split_ts << ": " << ds.train.size() << " train / "
            << ds.test.size() << " test samples\n";
  return 0;
}

int cmd_build_graph(RunConfig& cfg) {
  auto ds = read_samples_jsonl(cfg.train_samples_path, "", dataset_options(cfg));
  auto g = build_multiview_graph(ds, cfg.train.session_gap);
  save_graph(g, cfg.graph_path);
  std::size_t click_edges = 0;
  for (const auto& [view, by_user] : g.click_adj)
    for (const auto& [user, list] : by_user) click_edges += list.size();
  std::size_t coclick_edges = 0;
  for (const auto& list : g.coclick_adj) coclick_edges += list.size();
  std::cout << "graph: " << g.users.size() << " users, " << g.pois.size() << " pois, "
            << g.cells.size() << " cells, " << g.click_adj.size() << " views, " << click_edges
            << " click edges, " << coclick_edges / 2 << " co-click edges -> " << cfg.graph_path
            << "\n";
  return 0;
}

int cmd_train(RunConfig& cfg) {
  auto ds = read_samples_jsonl(cfg.train_samples_path, "", dataset_options(cfg));
  auto g = load_graph(cfg.graph_path);
  std::ofstream log(cfg.train_log_path, std::ios::trunc);
  auto res = train(cfg.train, ds, g, &log);
  save_checkpoint(res.params, res.manifest, cfg.checkpoint_path);
  const double last = res.step_losses.empty() ? 0.0 : res.step_losses.back();
  std::cout << "trained " << res.step_losses.size() << " steps, last batch loss " << last
            << " -> " << cfg.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(RunConfig& cfg) {
  auto ds = read_samples_jsonl(cfg.train_samples_path, cfg.test_samples_path,
                               dataset_options(cfg));
  auto g = load_graph(cfg.graph_path);
  auto [store, manifest] = load_checkpoint(cfg.checkpoint_path);
  auto rep = evaluate<float>(store, parse_variant(manifest.variant), ds, g, cfg.eval);
  std::ofstream out(cfg.report_path, std::ios::trunc);
  std::vector<EvalReport> reports{rep};
  write_reports_jsonl(reports, out);
  print_report_table(reports, std::cout);
  return 0;
}

int cmd_ablate(RunConfig& cfg) {
  auto ds = read_samples_jsonl(cfg.train_samples_path, cfg.test_samples_path,
                               dataset_options(cfg));
  auto g = load_graph(cfg.graph_path);
  auto reports = run_ablation_suite(cfg.train, ds, g, cfg.eval, &std::cerr);
  std::ofstream out(cfg.report_path, std::ios::trunc);
  write_reports_jsonl(reports, out);
  print_report_table(reports, std::cout);
  return 0;
}

int cmd_export(RunConfig& cfg) {
  auto g = load_graph(cfg.graph_path);
  auto [store, manifest] = load_checkpoint(cfg.checkpoint_path);
  ExportOptions eopt;
  eopt.cap1 = cfg.eval.full_cap1;
  eopt.cap2 = cfg.eval.full_cap2;
  eopt.build_ts = std::chrono::duration_cast<std::chrono::seconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  auto snap = export_snapshot(store, manifest, g, eopt, cfg.train);
  save_snapshot(snap, cfg.snapshot_path);
  write_snapshot_tsv(snap, cfg.poi_tsv_path, cfg.views_tsv_path);
  std::cout << "snapshot: " << snap.pois.size() << " poi vectors, " << snap.user_views.size()
            << " user-view vectors -> " << cfg.snapshot_path << " (+tsv)\n";
  return 0;
}

int cmd_serve(RunConfig& cfg) {
  auto snap = std::make_shared<Snapshot>(load_snapshot(cfg.snapshot_path));
  const std::size_t cap = std::max<std::size_t>(std::size_t(snap->max_realtime), 64);
  ServeEngine engine(std::move(snap), cap);
  if (!cfg.socket_path.empty()) {
    std::cerr << "serving on unix socket " << cfg.socket_path << "\n";
    serve_unix_socket(engine, cfg.socket_path);
  } else if (cfg.port != 0) {
    std::cerr << "serving on 127.0.0.1:" << cfg.port << "\n";
    serve_tcp(engine, cfg.port);
  } else {
    std::cerr << "serving on stdin/stdout\n";
    serve_stdio(engine, std::cin, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stgin: multi-view spatial-temporal graph POI retrieval engine"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::vector<std::string> set_overrides;
  // dedicated flags funnel into the same key=value machinery so precedence
  // stays simple: defaults < config file < --set < dedicated flags
  std::vector<std::pair<std::string, std::string>> flag_overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--set", set_overrides,
                    "override any config key, e.g. --set lr=0.01 (repeatable)");
    auto key_flag = [&flag_overrides, sub](const std::string& flag, const std::string& key,
                                           const std::string& help) {
      sub->add_option_function<std::string>(
          flag, [&flag_overrides, key](const std::string& v) { flag_overrides.emplace_back(key, v); },
          help);
    };
    key_flag("--run-dir", "run_dir", "artifact directory");
    key_flag("--seed", "seed", "master seed");
    return key_flag;
  };

  auto* synth = app.add_subcommand("synth", "generate a planted-preference click log");
  {
    auto key_flag = add_common(synth);
    key_flag("--users", "synth_users", "number of users");
    key_flag("--pois", "synth_pois", "number of POIs");
    key_flag("--cells", "synth_cells", "number of geo cells");
    key_flag("--days", "synth_days", "days of history");
    key_flag("--out", "events", "events output path");
  }

  auto* ingest = app.add_subcommand("ingest", "parse events, split train/test samples");
  {
    auto key_flag = add_common(ingest);
    key_flag("--events", "events", "events log path");
    key_flag("--format", "format", "jsonl or csv");
    key_flag("--split-ts", "split_ts", "train/test split timestamp");
    key_flag("--train-samples", "train_samples", "train samples output path");
    key_flag("--test-samples", "test_samples", "test samples output path");
  }

  auto* build_graph =
      app.add_subcommand("build-graph", "build the multi-view graph from train samples");
  {
    auto key_flag = add_common(build_graph);
    key_flag("--train-samples", "train_samples", "train samples jsonl");
    key_flag("--graph", "graph", "graph output path");
  }

  auto* train_cmd = app.add_subcommand("train", "train embeddings with the hinge loss");
  {
    auto key_flag = add_common(train_cmd);
    key_flag("--train-samples", "train_samples", "train samples jsonl");
    key_flag("--graph", "graph", "graph path");
    key_flag("--checkpoint", "checkpoint", "checkpoint output path");
    key_flag("--variant", "variant", "model variant to train");
    key_flag("--epochs", "epochs", "training epochs");
  }

  auto* eval_cmd = app.add_subcommand("eval", "HitRate@K / Recall@K on the test split");
  {
    auto key_flag = add_common(eval_cmd);
    key_flag("--k", "k", "retrieval depth K");
    key_flag("--checkpoint", "checkpoint", "checkpoint path");
    key_flag("--graph", "graph", "graph path");
    key_flag("--report", "report", "report jsonl output path");
  }

  auto* ablate_cmd =
      app.add_subcommand("ablate", "train and evaluate all seven model variants");
  {
    auto key_flag = add_common(ablate_cmd);
    key_flag("--k", "k", "retrieval depth K");
    key_flag("--report", "report", "report jsonl output path");
  }

  auto* export_cmd = app.add_subcommand("export", "export the serving snapshot (binary + tsv)");
  {
    auto key_flag = add_common(export_cmd);
    key_flag("--checkpoint", "checkpoint", "checkpoint path");
    key_flag("--graph", "graph", "graph path");
    key_flag("--snapshot", "snapshot", "snapshot output path");
  }

  auto* serve_cmd = app.add_subcommand("serve", "answer line-protocol queries");
  {
    auto key_flag = add_common(serve_cmd);
    key_flag("--snapshot", "snapshot", "snapshot path");
    key_flag("--socket", "socket", "unix socket path");
    key_flag("--port", "port", "loopback tcp port");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& kv : set_overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects key=value, got: " + kv);
      apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flag_overrides) apply_config_kv(cfg, key, value);

    resolve_paths(cfg);
    std::cerr << "seed=" << cfg.train.seed << "\n";
    print_config(cfg, std::cerr);

    if (app.got_subcommand(synth)) return cmd_synth(cfg);
    if (app.got_subcommand(ingest)) return cmd_ingest(cfg);
    if (app.got_subcommand(build_graph)) return cmd_build_graph(cfg);
    if (app.got_subcommand(train_cmd)) return cmd_train(cfg);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(cfg);
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(cfg);
    if (app.got_subcommand(export_cmd)) return cmd_export(cfg);
    if (app.got_subcommand(serve_cmd)) return cmd_serve(cfg);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
