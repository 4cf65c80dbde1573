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

#include <cinttypes>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "stgin/eval.hpp"

namespace stgin {

// Offline-computed key-value tables: every POI vector, every (user, view)
// vector, and the parameter subset the online interaction equations need.
// Immutable once built or loaded; online queries never touch the graph.
struct Snapshot {
  std::uint32_t dim = 0;
  Variant variant = Variant::Full;
  std::int64_t build_ts = 0;
  std::uint64_t seed = 0;
  std::int64_t realtime_window = kDefaultRealtimeWindow;
  std::int32_t max_realtime = kDefaultMaxRealtime;
  std::int64_t tz_offset = 0;
  SlotBoundaries slots;
  double leaky_slope = kDefaultLeakySlope;

  Vocab users, pois, cells;
  std::vector<float> poi_vecs;       // raw e_p, n_pois x dim
  std::vector<float> poi_vecs_norm;  // derived after build/load, never serialized
  std::map<std::pair<std::uint32_t, ViewKey>, std::vector<float>> user_views;
  ParamStore<float> online;

  std::span<const float> poi_vector(std::uint32_t p) const {
    return std::span<const float>(poi_vecs).subspan(std::size_t(p) * dim, dim);
  }
  std::span<const float> poi_vector_norm(std::uint32_t p) const {
    return std::span<const float>(poi_vecs_norm).subspan(std::size_t(p) * dim, dim);
  }
  const std::vector<float>* user_view(std::uint32_t user, const ViewKey& view) const {
    auto it = user_views.find({user, view});
    return it == user_views.end() ? nullptr : &it->second;
  }
  std::uint32_t cell_row(const std::string& cell) const {
    const std::uint32_t row = cells.find(cell);
    return row == kNoIndex ? cells.size() : row;  // reserved out-of-vocab row
  }

  void rebuild_norms() {
    poi_vecs_norm.assign(poi_vecs.size(), 0.0f);
    for (std::size_t p = 0; p < pois.size(); ++p) {
      double norm = 0.0;
      for (std::uint32_t j = 0; j < dim; ++j) {
        const float v = poi_vecs[p * dim + j];
        norm += double(v) * double(v);
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (std::uint32_t j = 0; j < dim; ++j)
          poi_vecs_norm[p * dim + j] = float(double(poi_vecs[p * dim + j]) / norm);
    }
  }
};

// Parameters the online equations read; id embeddings and GAT weights stay
// offline.
inline const std::vector<const char*>& online_param_names() {
  static const std::vector<const char*> names{
      pname::attn_t,   pname::attn_st,  pname::attn_r,        pname::attn_r_flat,
      pname::fuse_h,   pname::gate_h,   pname::gate_r,        pname::gate_c,
      pname::ctx_proj, pname::concat_proj, pname::slot_diff_emb, pname::dist_emb,
      pname::slot_emb, pname::cell_emb};
  return names;
}

struct ExportOptions {
  int cap1 = 64, cap2 = 32;  // weight-ranked tree caps
  std::int64_t build_ts = 0;
};

// Precomputes e_p for every catalog POI and u_view for every (user, present
// view) from the trained parameters and the graph, with deterministic
// weight-ranked trees.
inline Snapshot export_snapshot(const ParamStore<float>& store, const CheckpointManifest& manifest,
                                const MultiViewGraph& g, const ExportOptions& opt,
                                const TrainConfig& cfg) {
  if (!(manifest.users == g.users) || !(manifest.pois == g.pois) || !(manifest.cells == g.cells))
    throw VocabError("checkpoint and graph vocabularies disagree");
  Snapshot snap;
  snap.dim = std::uint32_t(manifest.dims.d);
  snap.variant = parse_variant(manifest.variant);
  snap.build_ts = opt.build_ts;
  snap.seed = manifest.seed;
  snap.realtime_window = cfg.realtime_window;
  snap.max_realtime = cfg.max_realtime;
  snap.tz_offset = cfg.tz_offset;
  snap.slots = cfg.slots;
  snap.leaky_slope = cfg.leaky_slope;
  snap.users = g.users;
  snap.pois = g.pois;
  snap.cells = g.cells;

  auto [raw, norm] = export_poi_matrix<float>(store, g, opt.cap1, opt.cap2, cfg.leaky_slope);
  snap.poi_vecs = std::move(raw);
  snap.poi_vecs_norm = std::move(norm);

  EncoderOptions eopt;
  eopt.full_trees = true;
  eopt.full_cap1 = opt.cap1;
  eopt.full_cap2 = opt.cap2;
  eopt.leaky_slope = cfg.leaky_slope;
  GraphEncoder<float> enc(g, eopt);
  Tape<float> tape(&store);
  for (std::uint32_t u = 0; u < g.users.size(); ++u) {
    tape.reset(&store);
    enc.begin_batch(tape, nullptr);
    for (const ViewKey& view : g.views_of(u)) {
      auto id = enc.user_view_vector(u, view);
      auto v = tape.value(id);
      snap.user_views[{u, view}] = std::vector<float>(v.begin(), v.end());
    }
  }

  for (const char* name : online_param_names()) snap.online.add(name, store.get(name));
  return snap;
}

// --- binary form ------------------------------------------------------------
//
// "STGS" | version | dim | variant | build_ts | seed | window | M | tz |
// slot boundaries | slope | vocab string tables | poi vectors | user views
// (u32 user, view key string, f32*dim)* | online params | crc32

inline constexpr std::uint32_t kSnapshotVersion = 1;

inline void save_snapshot(const Snapshot& s, const std::string& path) {
  ByteWriter w;
  w.magic("STGS");
  w.u32(kSnapshotVersion);
  w.u32(s.dim);
  w.str(variant_name(s.variant));
  w.i64(s.build_ts);
  w.u64(s.seed);
  w.i64(s.realtime_window);
  w.u32(std::uint32_t(s.max_realtime));
  w.i64(s.tz_offset);
  for (int b : {s.slots.morning_start, s.slots.noon_start, s.slots.dinner_start,
                s.slots.night_start})
    w.u32(std::uint32_t(b));
  w.f64(s.leaky_slope);
  w.u32(s.users.size());
  for (const auto& id : s.users.ids()) w.str(id);
  w.u32(s.pois.size());
  for (const auto& id : s.pois.ids()) w.str(id);
  w.u32(s.cells.size());
  for (const auto& id : s.cells.ids()) w.str(id);
  w.f32s(s.poi_vecs);
  w.u32(std::uint32_t(s.user_views.size()));
  for (const auto& [key, vec] : s.user_views) {
    w.u32(key.first);
    w.str(key.second.str());
    w.f32s(vec);
  }
  w.u32(std::uint32_t(s.online.count()));
  for (std::size_t i = 0; i < s.online.count(); ++i) {
    const auto& t = s.online.value(int(i));
    w.str(s.online.name(int(i)));
    w.u32(t.rows);
    w.u32(t.cols);
    w.f32s(t.data);
  }
  w.finish_with_crc();
  write_file(path, w.bytes());
}

inline Snapshot load_snapshot(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(check_crc_trailer(bytes, "snapshot"));
  r.expect_magic("STGS");
  if (std::uint32_t v = r.u32(); v != kSnapshotVersion)
    throw ParseError("unsupported snapshot version " + std::to_string(v));
  Snapshot s;
  s.dim = r.u32();
  s.variant = parse_variant(r.str());
  s.build_ts = r.i64();
  s.seed = r.u64();
  s.realtime_window = r.i64();
  s.max_realtime = std::int32_t(r.u32());
  s.tz_offset = r.i64();
  s.slots.morning_start = int(r.u32());
  s.slots.noon_start = int(r.u32());
  s.slots.dinner_start = int(r.u32());
  s.slots.night_start = int(r.u32());
  s.leaky_slope = r.f64();
  auto read_ids = [&] {
    std::vector<std::string> ids(r.u32());
    for (auto& id : ids) id = r.str();
    return ids;
  };
  s.users = Vocab(read_ids());
  s.pois = Vocab(read_ids());
  s.cells = Vocab(read_ids());
  if (s.pois.size() == 0) throw ParseError("snapshot has no POI vectors; refusing to activate");
  s.poi_vecs.resize(std::size_t(s.pois.size()) * s.dim);
  r.f32s(s.poi_vecs);
  const std::uint32_t n_views = r.u32();
  for (std::uint32_t i = 0; i < n_views; ++i) {
    const std::uint32_t user = r.u32();
    ViewKey view = ViewKey::parse(r.str());
    std::vector<float> vec(s.dim);
    r.f32s(vec);
    s.user_views[{user, view}] = std::move(vec);
  }
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.str();
    Tensor<float> t;
    t.rows = r.u32();
    t.cols = r.u32();
    t.data.resize(t.cols == 0 ? t.rows : std::size_t(t.rows) * t.cols);
    r.f32s(t.data);
    s.online.add(std::move(name), std::move(t));
  }
  if (!r.done()) throw ParseError("snapshot: trailing bytes");
  s.rebuild_norms();
  return s;
}

// --- tsv form --------------------------------------------------------------
//
// One row per key: key TAB space-separated values. "%.9g" round-trips f32
// exactly. POI keys are ids; user-view keys are "<user>|<view>".

inline void write_snapshot_tsv(const Snapshot& s, const std::string& poi_path,
                               const std::string& views_path) {
  auto fmt = [](std::FILE* f, std::span<const float> v) {
    for (std::size_t i = 0; i < v.size(); ++i) std::fprintf(f, i ? " %.9g" : "%.9g", double(v[i]));
    std::fputc('\n', f);
  };
  std::FILE* pf = std::fopen(poi_path.c_str(), "w");
  if (!pf) throw IoError("cannot open for writing: " + poi_path);
  for (std::uint32_t p = 0; p < s.pois.size(); ++p) {
    std::fprintf(pf, "%s\t", s.pois.id(p).c_str());
    fmt(pf, s.poi_vector(p));
  }
  std::fclose(pf);
  std::FILE* vf = std::fopen(views_path.c_str(), "w");
  if (!vf) throw IoError("cannot open for writing: " + views_path);
  for (const auto& [key, vec] : s.user_views) {
    std::fprintf(vf, "%s|%s\t", s.users.id(key.first).c_str(), key.second.str().c_str());
    fmt(vf, vec);
  }
  std::fclose(vf);
}

inline std::vector<std::pair<std::string, std::vector<float>>> read_tsv_vectors(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tsv: " + path);
  std::vector<std::pair<std::string, std::vector<float>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("tsv row without tab: " + line);
    std::vector<float> vals;
    const char* p = line.c_str() + tab + 1;
    char* end = nullptr;
    while (*p) {
      const float v = std::strtof(p, &end);
      if (end == p) break;
      vals.push_back(v);
      p = end;
    }
    out.emplace_back(line.substr(0, tab), std::move(vals));
  }
  return out;
}

}  // namespace stgin
