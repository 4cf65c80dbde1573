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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgin/binio.hpp"
#include "stgin/geo.hpp"
#include "stgin/rng.hpp"
#include "stgin/tensor.hpp"
#include "stgin/timeslot.hpp"
#include "stgin/vocab.hpp"

namespace stgin {

// Named trainable tensors, registered once, shapes fixed at init.
template <typename Real>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Real> value;
  };

  int add(std::string name, Tensor<Real> value) {
    if (index_.count(name)) throw Error("parameter registered twice: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(value)});
    return static_cast<int>(entries_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  int at(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw Error("unknown parameter: " + name);
    return i;
  }

  const Tensor<Real>& get(const std::string& name) const { return entries_[at(name)].value; }
  Tensor<Real>& mut(const std::string& name) { return entries_[at(name)].value; }
  const Tensor<Real>& value(int i) const { return entries_[std::size_t(i)].value; }
  Tensor<Real>& value(int i) { return entries_[std::size_t(i)].value; }
  const std::string& name(int i) const { return entries_[std::size_t(i)].name; }
  std::size_t count() const { return entries_.size(); }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<Other>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

struct ModelDims {
  int d = 16;
  std::uint32_t n_users = 0;
  std::uint32_t n_pois = 0;
  std::uint32_t n_cells = 0;  // observed cells; one extra row is reserved for out-of-vocab
};

// Parameter names. The towers share POI id embeddings; everything else is
// disjoint between the user and POI sides.
namespace pname {
inline constexpr const char* user_emb = "user_emb";
inline constexpr const char* poi_emb = "poi_emb";
inline constexpr const char* gat_u1_w = "gat_u1_w";
inline constexpr const char* gat_u1_a = "gat_u1_a";
inline constexpr const char* gat_u2_w = "gat_u2_w";
inline constexpr const char* gat_u2_a = "gat_u2_a";
inline constexpr const char* gat_p1_w = "gat_p1_w";
inline constexpr const char* gat_p1_a = "gat_p1_a";
inline constexpr const char* gat_p2_w = "gat_p2_w";
inline constexpr const char* gat_p2_a = "gat_p2_a";
inline constexpr const char* attn_t = "attn_t";           // temporal interaction, [3d]
inline constexpr const char* attn_st = "attn_st";         // spatial-temporal interaction, [3d]
inline constexpr const char* attn_r = "attn_r";           // realtime attention, [4d]
inline constexpr const char* attn_r_flat = "attn_r_flat"; // realtime attention w/o u_h, [3d]
inline constexpr const char* fuse_h = "fuse_h";           // view fusion, [d x 4d]
inline constexpr const char* gate_h = "gate_h";           // [d]
inline constexpr const char* gate_r = "gate_r";           // [d]
inline constexpr const char* gate_c = "gate_c";           // [2d]
inline constexpr const char* ctx_proj = "ctx_proj";       // [d x 2d]
inline constexpr const char* concat_proj = "concat_proj"; // plain-concat fusion, [d x 2d]
inline constexpr const char* slot_diff_emb = "slot_diff_emb";  // [3 x d]
inline constexpr const char* dist_emb = "dist_emb";            // [6 x d]
inline constexpr const char* slot_emb = "slot_emb";            // [4 x d]
inline constexpr const char* cell_emb = "cell_emb";            // [(n_cells+1) x d]
}  // namespace pname

// Uniform init in [-1/sqrt(d), 1/sqrt(d)], every tensor from one seeded
// stream in registration order.
template <typename Real>
ParamStore<Real> init_params(const ModelDims& dims, std::uint64_t seed) {
  ParamStore<Real> store;
  Rng rng(seed, "init");
  const auto d = static_cast<std::uint32_t>(dims.d);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.d));
  auto fill = [&](Tensor<Real> t) {
    for (auto& x : t.data) x = static_cast<Real>(rng.uniform(-bound, bound));
    return t;
  };
  auto add_vec = [&](const char* name, std::uint32_t n) {
    store.add(name, fill(Tensor<Real>::vec(n)));
  };
  auto add_mat = [&](const char* name, std::uint32_t r, std::uint32_t c) {
    store.add(name, fill(Tensor<Real>::mat(r, c)));
  };

  add_mat(pname::user_emb, dims.n_users, d);
  add_mat(pname::poi_emb, dims.n_pois, d);
  for (const char* n : {pname::gat_u1_w, pname::gat_u2_w, pname::gat_p1_w, pname::gat_p2_w})
    add_mat(n, d, d);
  for (const char* n : {pname::gat_u1_a, pname::gat_u2_a, pname::gat_p1_a, pname::gat_p2_a})
    add_vec(n, 2 * d);
  add_vec(pname::attn_t, 3 * d);
  add_vec(pname::attn_st, 3 * d);
  add_vec(pname::attn_r, 4 * d);
  add_vec(pname::attn_r_flat, 3 * d);
  add_mat(pname::fuse_h, d, 4 * d);
  add_vec(pname::gate_h, d);
  add_vec(pname::gate_r, d);
  add_vec(pname::gate_c, 2 * d);
  add_mat(pname::ctx_proj, d, 2 * d);
  add_mat(pname::concat_proj, d, 2 * d);
  add_mat(pname::slot_diff_emb, kNumSlotDistances, d);
  add_mat(pname::dist_emb, kNumDistanceBuckets, d);
  add_mat(pname::slot_emb, kNumSlots, d);
  add_mat(pname::cell_emb, dims.n_cells + 1, d);
  return store;
}

// --- checkpoint -----------------------------------------------------------
//
// <path>: binary records {name, shape, f32 data}, crc32 trailer.
// <path>.manifest: plain-text sidecar with dims, vocab lists, seed, step.

struct CheckpointManifest {
  ModelDims dims;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::string variant = "none";
  Vocab users, pois, cells;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const ParamStore<float>& store, const CheckpointManifest& m,
                            const std::string& path) {
  ByteWriter w;
  w.magic("STGC");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.count()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto& t = store.value(static_cast<int>(i));
    w.str(store.name(static_cast<int>(i)));
    w.u32(t.rows);
    w.u32(t.cols);
    w.f32s(t.data);
  }
  w.finish_with_crc();
  write_file(path, w.bytes());

  std::ofstream mf(path + ".manifest", std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest: " + path + ".manifest");
  mf << "stgin-checkpoint v" << kCheckpointVersion << "\n";
  mf << "dim=" << m.dims.d << "\n";
  mf << "seed=" << m.seed << "\n";
  mf << "step=" << m.step << "\n";
  mf << "variant=" << m.variant << "\n";
  mf << "users=" << m.users.size() << "\n";
  mf << "pois=" << m.pois.size() << "\n";
  mf << "cells=" << m.cells.size() << "\n";
  mf << "[users]\n";
  for (const auto& id : m.users.ids()) mf << id << "\n";
  mf << "[pois]\n";
  for (const auto& id : m.pois.ids()) mf << id << "\n";
  mf << "[cells]\n";
  for (const auto& id : m.cells.ids()) mf << id << "\n";
  if (!mf) throw IoError("manifest write failed");
}

inline std::pair<ParamStore<float>, CheckpointManifest> load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(check_crc_trailer(bytes, "checkpoint"));
  r.expect_magic("STGC");
  if (std::uint32_t v = r.u32(); v != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(v));
  ParamStore<float> store;
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Tensor<float> t;
    t.rows = r.u32();
    t.cols = r.u32();
    t.data.resize(t.cols == 0 ? t.rows : std::size_t(t.rows) * t.cols);
    r.f32s(t.data);
    store.add(std::move(name), std::move(t));
  }

  CheckpointManifest m;
  std::ifstream mf(path + ".manifest");
  if (!mf) throw IoError("cannot read manifest: " + path + ".manifest");
  std::string line;
  std::getline(mf, line);  // banner
  std::vector<std::string>* section = nullptr;
  std::vector<std::string> users, pois, cells;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    if (line == "[users]") { section = &users; continue; }
    if (line == "[pois]") { section = &pois; continue; }
    if (line == "[cells]") { section = &cells; continue; }
    if (section) {
      section->push_back(line);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("bad manifest line: " + line);
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "dim") m.dims.d = std::stoi(val);
    else if (key == "seed") m.seed = std::stoull(val);
    else if (key == "step") m.step = std::stoll(val);
    else if (key == "variant") m.variant = val;
    else if (key == "users" || key == "pois" || key == "cells") { /* counts, re-derived */ }
    else throw ParseError("unknown manifest key: " + key);
  }
  m.users = Vocab(std::move(users));
  m.pois = Vocab(std::move(pois));
  m.cells = Vocab(std::move(cells));
  m.dims.n_users = m.users.size();
  m.dims.n_pois = m.pois.size();
  m.dims.n_cells = m.cells.size();
  return {std::move(store), std::move(m)};
}

}  // namespace stgin
