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

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stgin/binio.hpp"
#include "stgin/dataset.hpp"
#include "stgin/rng.hpp"
#include "stgin/sessions.hpp"
#include "stgin/vocab.hpp"

namespace stgin {

enum class ViewKind : std::uint8_t { Global = 0, Spatial = 1, Temporal = 2, SpatioTemporal = 3 };

// Key of one subgraph view: global, a geo cell, a time slot, or a
// (cell, slot) pair.
struct ViewKey {
  ViewKind kind = ViewKind::Global;
  int slot = -1;       // Temporal / SpatioTemporal
  std::string cell;    // Spatial / SpatioTemporal

  static ViewKey global() { return {}; }
  static ViewKey spatial(std::string cell) { return {ViewKind::Spatial, -1, std::move(cell)}; }
  static ViewKey temporal(int slot) { return {ViewKind::Temporal, slot, {}}; }
  static ViewKey spatio_temporal(std::string cell, int slot) {
    return {ViewKind::SpatioTemporal, slot, std::move(cell)};
  }

  auto operator<=>(const ViewKey&) const = default;

  std::string str() const {
    switch (kind) {
      case ViewKind::Global: return "G";
      case ViewKind::Spatial: return "S:" + cell;
      case ViewKind::Temporal: return "T:" + std::to_string(slot);
      case ViewKind::SpatioTemporal: return "ST:" + cell + ":" + std::to_string(slot);
    }
    return "?";
  }

  static ViewKey parse(const std::string& s) {
    if (s == "G") return global();
    if (s.rfind("S:", 0) == 0) return spatial(s.substr(2));
    if (s.rfind("T:", 0) == 0) return temporal(std::stoi(s.substr(2)));
    if (s.rfind("ST:", 0) == 0) {
      auto colon = s.rfind(':');
      return spatio_temporal(s.substr(3, colon - 3), std::stoi(s.substr(colon + 1)));
    }
    throw ParseError("bad view key: " + s);
  }
};

// Neighbor id paired with an edge weight (click count or co-click count).
using WeightedIds = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Meta-path neighborhood of one node: hop 1 via clicking (users) or
// co-clicking (POIs), hop 2 via co-clicking.
struct NeighborTree {
  std::uint32_t center = 0;
  ViewKey view;
  struct Hop {
    std::uint32_t node = 0;
    std::vector<std::uint32_t> hop2;
    bool operator==(const Hop&) const = default;
  };
  std::vector<Hop> hop1;

  bool operator==(const NeighborTree&) const = default;
};

// Per-view user->POI clicking adjacency plus the one co-clicking POI-POI
// adjacency shared by every view. Immutable once built.
struct MultiViewGraph {
  Vocab users;
  Vocab pois;
  Vocab cells;
  std::vector<std::pair<double, double>> poi_latlon;  // representative coordinates

  // view -> (user index -> weighted POI list, sorted by POI index)
  std::map<ViewKey, std::map<std::uint32_t, WeightedIds>> click_adj;
  // POI index -> weighted co-click partners, sorted by partner index
  std::vector<WeightedIds> coclick_adj;

  const WeightedIds* click_neighbors(const ViewKey& view, std::uint32_t user) const {
    auto vit = click_adj.find(view);
    if (vit == click_adj.end()) return nullptr;
    auto uit = vit->second.find(user);
    return uit == vit->second.end() ? nullptr : &uit->second;
  }

  // All views under which the user has at least one click edge. Empty for
  // unknown users; Global is always first for known users.
  std::vector<ViewKey> views_of(std::uint32_t user) const {
    std::vector<ViewKey> out;
    for (const auto& [view, by_user] : click_adj)
      if (by_user.count(user)) out.push_back(view);
    return out;
  }
  std::vector<ViewKey> views_of(const std::string& user_id) const {
    auto idx = users.find(user_id);
    return idx == kNoIndex ? std::vector<ViewKey>{} : views_of(idx);
  }
};

// --- construction --------------------------------------------------------

// Builds the four view families from the training samples' history events
// only. Click edges: user u clicked POI p in context (cell, slot) adds p
// under Global, Spatial(cell), Temporal(slot) and SpatioTemporal(cell, slot)
// for u. Co-click edges: every unordered POI pair co-occurring inside one
// session, weight = number of co-occurring sessions, shared across views.
inline MultiViewGraph build_multiview_graph(const Dataset& ds,
                                            std::int64_t session_gap = kDefaultSessionGap) {
  MultiViewGraph g;

  // Per user, histories of a user's train samples are nested prefixes, so
  // their union is the longest one.
  std::vector<std::uint32_t> hist_len(ds.users.size(), 0);
  for (const auto& q : ds.train) hist_len[q.user] = std::max(hist_len[q.user], q.hist_end);

  // vocab covers everything the training period can touch
  std::vector<std::string> user_ids, poi_ids, cell_codes;
  for (const auto& q : ds.train) {
    user_ids.push_back(ds.users[q.user].id);
    poi_ids.push_back(q.positive_poi);
    cell_codes.push_back(q.cell);
    for (const auto& e : ds.realtime(q)) poi_ids.push_back(e.poi_id);
    for (const auto& e : ds.history(q)) poi_ids.push_back(e.poi_id);
  }
  g.users = Vocab(std::move(user_ids));
  g.pois = Vocab(std::move(poi_ids));
  g.cells = Vocab(std::move(cell_codes));
  g.poi_latlon.assign(g.pois.size(), {0.0, 0.0});
  g.coclick_adj.assign(g.pois.size(), {});

  // representative POI coordinates: last seen in time order, train period only
  {
    std::vector<std::int64_t> seen_ts(g.pois.size(), std::numeric_limits<std::int64_t>::min());
    for (const auto& u : ds.users)
      for (const auto& e : u.events) {
        auto p = g.pois.find(e.poi_id);
        if (p == kNoIndex) continue;
        if (ds.options.split_ts > 0 && e.ts >= ds.options.split_ts) continue;
        if (e.ts >= seen_ts[p]) {
          seen_ts[p] = e.ts;
          g.poi_latlon[p] = {e.lat, e.lon};
        }
      }
  }

  std::map<std::uint32_t, std::map<std::uint32_t, std::uint32_t>> coclick_acc;
  for (std::uint32_t ui = 0; ui < ds.users.size(); ++ui) {
    if (hist_len[ui] == 0) continue;
    std::span<const InteractionEvent> hist(ds.users[ui].events.data(), hist_len[ui]);
    const std::uint32_t user = g.users.at(ds.users[ui].id);

    for (const auto& e : hist) {
      const std::uint32_t poi = g.pois.at(e.poi_id);
      const std::string cell = cell_of(e.lat, e.lon);
      const int slot = slot_of(e.ts, ds.options.tz_offset, ds.options.slots);
      for (const ViewKey& v : {ViewKey::global(), ViewKey::spatial(cell), ViewKey::temporal(slot),
                               ViewKey::spatio_temporal(cell, slot)}) {
        auto& list = g.click_adj[v][user];
        auto it = std::lower_bound(list.begin(), list.end(), poi,
                                   [](const auto& a, std::uint32_t b) { return a.first < b; });
        if (it != list.end() && it->first == poi)
          ++it->second;
        else
          list.insert(it, {poi, 1});
      }
    }

    auto ranges = session_ranges<InteractionEvent>(
        hist, session_gap, [](const InteractionEvent& e) { return e.ts; });
    for (auto [b, e] : ranges) {
      std::set<std::uint32_t> distinct;
      for (std::size_t k = b; k < e; ++k) distinct.insert(g.pois.at(hist[k].poi_id));
      for (auto it = distinct.begin(); it != distinct.end(); ++it)
        for (auto jt = std::next(it); jt != distinct.end(); ++jt) {
          ++coclick_acc[*it][*jt];
          ++coclick_acc[*jt][*it];
        }
    }
  }
  for (auto& [poi, partners] : coclick_acc) {
    auto& list = g.coclick_adj[poi];
    list.reserve(partners.size());
    for (auto& [p, w] : partners) list.emplace_back(p, w);
  }
  return g;
}

// --- sampling -------------------------------------------------------------

namespace detail {

// Uniform sample of up to `fanout` entries, without replacement.
inline std::vector<std::uint32_t> sample_uniform(const WeightedIds& from, int fanout, Rng& rng) {
  std::vector<std::uint32_t> pool;
  pool.reserve(from.size());
  for (const auto& [id, w] : from) pool.push_back(id);
  if (static_cast<int>(pool.size()) <= fanout) return pool;
  // partial Fisher-Yates
  for (int i = 0; i < fanout; ++i) {
    std::size_t j = i + rng.below(static_cast<std::uint32_t>(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(fanout));
  return pool;
}

// Weight-proportional sample of up to `fanout` entries, without replacement.
inline std::vector<std::uint32_t> sample_weighted(const WeightedIds& from, int fanout, Rng& rng) {
  if (static_cast<int>(from.size()) <= fanout) {
    std::vector<std::uint32_t> all;
    all.reserve(from.size());
    for (const auto& [id, w] : from) all.push_back(id);
    return all;
  }
  std::vector<double> weights;
  weights.reserve(from.size());
  double total = 0.0;
  for (const auto& [id, w] : from) {
    weights.push_back(static_cast<double>(w));
    total += w;
  }
  std::vector<std::uint32_t> picked;
  picked.reserve(static_cast<std::size_t>(fanout));
  for (int i = 0; i < fanout; ++i) {
    std::size_t j = rng.weighted_pick(weights, total);
    picked.push_back(from[j].first);
    total -= weights[j];
    weights[j] = 0.0;
  }
  return picked;
}

}  // namespace detail

// Meta-path "user -click-> POI -co-click-> POI". Hop 1 is a uniform sample
// of the user's clicked POIs under `view`; hop 2 is a co-click-count-weighted
// sample per hop-1 POI. Throws VocabError when the user has no edges under
// the view; callers mask absent views instead of sampling them.
inline NeighborTree sample_user_neighbors(const MultiViewGraph& g, std::uint32_t user,
                                          const ViewKey& view, int fanout1, int fanout2,
                                          Rng& rng) {
  const WeightedIds* clicked = g.click_neighbors(view, user);
  if (!clicked) throw VocabError("user has no clicks under view " + view.str());
  NeighborTree tree;
  tree.center = user;
  tree.view = view;
  for (std::uint32_t poi : detail::sample_uniform(*clicked, fanout1, rng)) {
    NeighborTree::Hop hop;
    hop.node = poi;
    hop.hop2 = detail::sample_weighted(g.coclick_adj[poi], fanout2, rng);
    tree.hop1.push_back(std::move(hop));
  }
  return tree;
}

// Meta-path "POI -co-click-> POI -co-click-> POI"; user nodes are skipped
// entirely. Both hops are co-click-count-weighted. An isolated POI yields
// empty hops.
inline NeighborTree sample_poi_neighbors(const MultiViewGraph& g, std::uint32_t poi, int fanout1,
                                         int fanout2, Rng& rng) {
  if (poi >= g.pois.size()) throw VocabError("unknown poi index " + std::to_string(poi));
  NeighborTree tree;
  tree.center = poi;
  for (std::uint32_t n : detail::sample_weighted(g.coclick_adj[poi], fanout1, rng)) {
    NeighborTree::Hop hop;
    hop.node = n;
    hop.hop2 = detail::sample_weighted(g.coclick_adj[n], fanout2, rng);
    tree.hop1.push_back(std::move(hop));
  }
  return tree;
}

namespace detail {

// Deterministic non-sampled neighbor list: heaviest edges first, index
// ascending on ties, capped to keep offline export bounded.
inline std::vector<std::uint32_t> top_by_weight(const WeightedIds& from, int cap) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted(from.begin(), from.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(sorted.size()) > cap) sorted.resize(static_cast<std::size_t>(cap));
  std::vector<std::uint32_t> out;
  out.reserve(sorted.size());
  for (const auto& [id, w] : sorted) out.push_back(id);
  return out;
}

}  // namespace detail

// Full (deterministic) trees, used for evaluation and snapshot export.
inline NeighborTree full_user_tree(const MultiViewGraph& g, std::uint32_t user,
                                   const ViewKey& view, int cap1, int cap2) {
  const WeightedIds* clicked = g.click_neighbors(view, user);
  if (!clicked) throw VocabError("user has no clicks under view " + view.str());
  NeighborTree tree;
  tree.center = user;
  tree.view = view;
  for (std::uint32_t poi : detail::top_by_weight(*clicked, cap1)) {
    NeighborTree::Hop hop;
    hop.node = poi;
    hop.hop2 = detail::top_by_weight(g.coclick_adj[poi], cap2);
    tree.hop1.push_back(std::move(hop));
  }
  return tree;
}

inline NeighborTree full_poi_tree(const MultiViewGraph& g, std::uint32_t poi, int cap1, int cap2) {
  if (poi >= g.pois.size()) throw VocabError("unknown poi index " + std::to_string(poi));
  NeighborTree tree;
  tree.center = poi;
  for (std::uint32_t n : detail::top_by_weight(g.coclick_adj[poi], cap1)) {
    NeighborTree::Hop hop;
    hop.node = n;
    hop.hop2 = detail::top_by_weight(g.coclick_adj[n], cap2);
    tree.hop1.push_back(std::move(hop));
  }
  return tree;
}

// --- snapshot file --------------------------------------------------------
//
// Binary, little-endian:
//   "STGN" | version u32 | user/poi/cell counts u32
//   string tables (users, pois, cells; each: u32 len + bytes per id)
//   poi_latlon (f64 pairs)
//   click sections: u32 n_views, then per view
//     key string | u32 n_users, per user: u32 user, u32 n, (u32 poi, u32 w)*
//   coclick section: per poi: u32 n, (u32 partner, u32 w)*
//   crc32 of everything above

inline constexpr std::uint32_t kGraphVersion = 1;

inline void save_graph(const MultiViewGraph& g, const std::string& path) {
  ByteWriter w;
  w.magic("STGN");
  w.u32(kGraphVersion);
  w.u32(g.users.size());
  w.u32(g.pois.size());
  w.u32(g.cells.size());
  for (const auto& id : g.users.ids()) w.str(id);
  for (const auto& id : g.pois.ids()) w.str(id);
  for (const auto& id : g.cells.ids()) w.str(id);
  for (const auto& [lat, lon] : g.poi_latlon) {
    w.f64(lat);
    w.f64(lon);
  }
  w.u32(static_cast<std::uint32_t>(g.click_adj.size()));
  for (const auto& [view, by_user] : g.click_adj) {
    w.str(view.str());
    w.u32(static_cast<std::uint32_t>(by_user.size()));
    for (const auto& [user, list] : by_user) {
      w.u32(user);
      w.u32(static_cast<std::uint32_t>(list.size()));
      for (const auto& [poi, weight] : list) {
        w.u32(poi);
        w.u32(weight);
      }
    }
  }
  for (const auto& list : g.coclick_adj) {
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& [poi, weight] : list) {
      w.u32(poi);
      w.u32(weight);
    }
  }
  w.finish_with_crc();
  write_file(path, w.bytes());
}

inline MultiViewGraph load_graph(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(check_crc_trailer(bytes, "graph snapshot"));
  r.expect_magic("STGN");
  if (std::uint32_t v = r.u32(); v != kGraphVersion)
    throw ParseError("unsupported graph version " + std::to_string(v));
  const std::uint32_t n_users = r.u32(), n_pois = r.u32(), n_cells = r.u32();
  auto read_ids = [&](std::uint32_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ids.push_back(r.str());
    return ids;
  };
  MultiViewGraph g;
  g.users = Vocab(read_ids(n_users));
  g.pois = Vocab(read_ids(n_pois));
  g.cells = Vocab(read_ids(n_cells));
  g.poi_latlon.resize(n_pois);
  for (auto& [lat, lon] : g.poi_latlon) {
    lat = r.f64();
    lon = r.f64();
  }
  const std::uint32_t n_views = r.u32();
  for (std::uint32_t v = 0; v < n_views; ++v) {
    ViewKey key = ViewKey::parse(r.str());
    auto& by_user = g.click_adj[key];
    const std::uint32_t nu = r.u32();
    for (std::uint32_t i = 0; i < nu; ++i) {
      const std::uint32_t user = r.u32();
      WeightedIds list(r.u32());
      for (auto& [poi, weight] : list) {
        poi = r.u32();
        weight = r.u32();
      }
      by_user.emplace(user, std::move(list));
    }
  }
  g.coclick_adj.resize(n_pois);
  for (auto& list : g.coclick_adj) {
    list.resize(r.u32());
    for (auto& [poi, weight] : list) {
      poi = r.u32();
      weight = r.u32();
    }
  }
  if (!r.done()) throw ParseError("graph snapshot: trailing bytes");
  return g;
}

inline bool graphs_equal(const MultiViewGraph& a, const MultiViewGraph& b) {
  return a.users == b.users && a.pois == b.pois && a.cells == b.cells &&
         a.poi_latlon == b.poi_latlon && a.click_adj == b.click_adj &&
         a.coclick_adj == b.coclick_adj;
}

}  // namespace stgin
