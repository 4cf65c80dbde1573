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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stgin/dataset.hpp"
#include "stgin/graph.hpp"
#include "stgin/model.hpp"

namespace stgin {

struct EncoderOptions {
  Variant variant = Variant::Full;
  int fanout1 = 20, fanout2 = 10;          // user trees
  int poi_fanout1 = 10, poi_fanout2 = 10;  // poi trees
  int full_cap1 = 64, full_cap2 = 32;      // deterministic trees (eval/export)
  double leaky_slope = kDefaultLeakySlope;
  bool full_trees = false;  // weight-ranked deterministic trees instead of sampling
};

// Everything one query encode needs, independent of where it came from.
struct QueryContext {
  std::string user_id;
  std::string cell;
  int slot = 0;
  std::int64_t ts = 0;
  double lat = 0.0, lon = 0.0;
  std::vector<InteractionEvent> realtime;  // oldest first, already capped at M
};

inline QueryContext query_context(const Dataset& ds, const QuerySample& q) {
  QueryContext ctx;
  ctx.user_id = ds.users[q.user].id;
  ctx.cell = q.cell;
  ctx.slot = q.slot;
  ctx.ts = q.ts;
  ctx.lat = q.lat;
  ctx.lon = q.lon;
  auto rt = ds.realtime(q);
  ctx.realtime.assign(rt.begin(), rt.end());
  return ctx;
}

// Encodes queries and POIs against the multi-view graph: samples meta-path
// trees, runs the two GAT towers, then the interaction equations. Within one
// batch, per-(user, view) and per-POI subtrees are built once and shared.
template <typename Real>
class GraphEncoder {
 public:
  using Id = typename Tape<Real>::Id;

  GraphEncoder(const MultiViewGraph& g, EncoderOptions opt) : g_(g), opt_(opt) {}

  const EncoderOptions& options() const { return opt_; }
  const MultiViewGraph& graph() const { return g_; }

  // Starts a batch on `tape`; `rng` drives tree sampling (unused when
  // options().full_trees is set, which is the deterministic path).
  void begin_batch(Tape<Real>& tape, Rng* rng) {
    tape_ = &tape;
    rng_ = rng;
    user_view_cache_.clear();
    poi_cache_.clear();
    dim_ = static_cast<std::uint32_t>(
        tape.store() ? tape.store()->get(pname::poi_emb).cols : 0);
  }

  // e_p: two-layer GAT over the POI's co-click tree. Shared across views.
  Id poi_vector(std::uint32_t poi, AttnProbe<Real>* probe = nullptr) {
    if (auto it = poi_cache_.find(poi); it != poi_cache_.end()) return it->second;
    NeighborTree tree = opt_.full_trees
                            ? full_poi_tree(g_, poi, opt_.full_cap1, opt_.full_cap2)
                            : sample_poi_neighbors(g_, poi, opt_.poi_fanout1, opt_.poi_fanout2,
                                                   *rng_);
    Tape<Real>& t = *tape_;
    const int poi_emb = t.param_index(pname::poi_emb);
    Id out = tree_embedding<Real>(t, tree, t.lookup(poi_emb, poi), poi_emb, pname::gat_p1_w,
                                  pname::gat_p1_a, pname::gat_p2_w, pname::gat_p2_a,
                                  static_cast<Real>(opt_.leaky_slope), probe);
    poi_cache_.emplace(poi, out);
    return out;
  }

  // u_view for one (user, view): GAT over the clicked-POI tree, -1 if the
  // user has no edges under the view.
  Id user_view_vector(std::uint32_t user, const ViewKey& view, AttnProbe<Real>* probe = nullptr) {
    const auto key = std::make_pair(user, view);
    if (auto it = user_view_cache_.find(key); it != user_view_cache_.end()) return it->second;
    Id out = -1;
    if (g_.click_neighbors(view, user) != nullptr) {
      NeighborTree tree = opt_.full_trees
                              ? full_user_tree(g_, user, view, opt_.full_cap1, opt_.full_cap2)
                              : sample_user_neighbors(g_, user, view, opt_.fanout1, opt_.fanout2,
                                                      *rng_);
      Tape<Real>& t = *tape_;
      const int poi_emb = t.param_index(pname::poi_emb);
      out = tree_embedding<Real>(t, tree, t.lookup(pname::user_emb, user), poi_emb,
                                 pname::gat_u1_w, pname::gat_u1_a, pname::gat_u2_w,
                                 pname::gat_u2_a, static_cast<Real>(opt_.leaky_slope), probe);
    }
    user_view_cache_.emplace(key, out);
    return out;
  }

  // All view embeddings for a query; unknown users get everything absent.
  ViewNodes<Real> user_views(const std::string& user_id, const std::string& cell,
                             AttnProbe<Real>* probe = nullptr) {
    ViewNodes<Real> views;
    const std::uint32_t user = g_.users.find(user_id);
    if (user == kNoIndex) return views;
    views.u_g = user_view_vector(user, ViewKey::global(), probe);
    if (opt_.variant != Variant::NoSpatial)
      views.u_s = user_view_vector(user, ViewKey::spatial(cell), probe);
    if (opt_.variant != Variant::NoTemporal)
      for (int slot = 0; slot < kNumSlots; ++slot)
        views.u_t[std::size_t(slot)] = user_view_vector(user, ViewKey::temporal(slot), probe);
    for (int slot = 0; slot < kNumSlots; ++slot)
      views.u_st[std::size_t(slot)] =
          user_view_vector(user, ViewKey::spatio_temporal(cell, slot), probe);
    return views;
  }

  // Full query encode, Eqs. 2 through 9.
  EncodedQuery<Real> encode(const QueryContext& q, AttnProbe<Real>* probe = nullptr) {
    Tape<Real>& t = *tape_;
    ViewNodes<Real> views = user_views(q.user_id, q.cell, probe);

    std::vector<RealtimeItem<Real>> items;
    if (opt_.variant != Variant::NoRealtime) {
      items.reserve(q.realtime.size());
      for (const auto& e : q.realtime) {
        const std::uint32_t poi = g_.pois.find(e.poi_id);
        if (poi == kNoIndex) continue;  // POI unseen in training: skip at encode time
        RealtimeItem<Real> item;
        item.e_p = poi_vector(poi, probe);
        item.slot_distance =
            circular_slot_distance(slot_of(e.ts, tz_offset, slot_bounds), q.slot);
        item.distance_bucket = haversine_bucket(e.lat, e.lon, q.lat, q.lon);
        items.push_back(item);
      }
    }

    const std::uint32_t cell_row = cell_row_of(q.cell);
    return encode_from_views<Real>(t, views, items, q.slot, cell_row, dim_, opt_.variant,
                                   static_cast<Real>(opt_.leaky_slope), probe);
  }

  // Cell-table row; unseen cells use the reserved out-of-vocab row.
  std::uint32_t cell_row_of(const std::string& cell) const {
    const std::uint32_t row = g_.cells.find(cell);
    return row == kNoIndex ? g_.cells.size() : row;
  }

  std::int64_t tz_offset = 0;
  SlotBoundaries slot_bounds;

 private:
  const MultiViewGraph& g_;
  EncoderOptions opt_;
  Tape<Real>* tape_ = nullptr;
  Rng* rng_ = nullptr;
  std::uint32_t dim_ = 0;
  std::map<std::pair<std::uint32_t, ViewKey>, Id> user_view_cache_;
  std::map<std::uint32_t, Id> poi_cache_;
};

}  // namespace stgin
