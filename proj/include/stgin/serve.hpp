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

#include <chrono>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stgin/snapshot.hpp"
#include "stgin/topk.hpp"

namespace stgin {

// Per-user ring of recent clicks. Kept sorted by ts (out-of-order arrivals
// are inserted in place); the oldest entry is evicted at capacity. Reads
// prune to the realtime window.
class SessionStore {
 public:
  struct Click {
    std::string poi_id;
    std::int64_t ts = 0;
    double lat = 0.0, lon = 0.0;
  };

  explicit SessionStore(std::size_t capacity) : capacity_(capacity) {}

  void record(const std::string& user, std::string poi, std::int64_t ts, double lat, double lon) {
    std::unique_lock lock(mu_);
    auto& buf = users_[user];
    Click c{std::move(poi), ts, lat, lon};
    auto it = std::upper_bound(buf.begin(), buf.end(), ts,
                               [](std::int64_t t, const Click& x) { return t < x.ts; });
    buf.insert(it, std::move(c));
    if (buf.size() > capacity_) buf.erase(buf.begin());
  }

  // Clicks in [now - window, now), newest last, at most max_items (the most
  // recent ones win).
  std::vector<Click> recent(const std::string& user, std::int64_t now, std::int64_t window,
                            std::size_t max_items) const {
    std::shared_lock lock(mu_);
    auto it = users_.find(user);
    if (it == users_.end()) return {};
    std::vector<Click> out;
    for (const Click& c : it->second)
      if (c.ts >= now - window && c.ts < now) out.push_back(c);
    if (out.size() > max_items) out.erase(out.begin(), out.end() - std::ptrdiff_t(max_items));
    return out;
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::vector<Click>> users_;
};

// Online retrieval over an immutable snapshot: fetches the stored view
// vectors, runs the interaction equations with the live session buffer, and
// brute-force scores every POI. Snapshot swaps are atomic; in-flight queries
// finish on the snapshot they started with.
class ServeEngine {
 public:
  explicit ServeEngine(std::shared_ptr<const Snapshot> snap, std::size_t session_capacity = 512)
      : snap_(std::move(snap)), sessions_(session_capacity) {
    if (!snap_) throw Error("serve: no active snapshot");
  }

  std::shared_ptr<const Snapshot> active() const {
    std::lock_guard lock(snap_mu_);
    return snap_;
  }

  void swap(std::shared_ptr<const Snapshot> next) {
    if (!next) throw Error("swap: null snapshot");
    std::lock_guard lock(snap_mu_);
    snap_ = std::move(next);
  }

  // Validates the file before activation; on any failure the previous
  // snapshot keeps serving and the error is reported.
  bool swap_from_file(const std::string& path, std::string* error) {
    try {
      auto next = std::make_shared<Snapshot>(load_snapshot(path));
      swap(std::move(next));
      return true;
    } catch (const std::exception& e) {
      if (error) *error = e.what();
      return false;
    }
  }

  void record_click(const std::string& user, const std::string& poi, std::int64_t ts, double lat,
                    double lon) {
    // unknown POIs are accepted and stored; encode skips whatever the active
    // snapshot cannot resolve
    sessions_.record(user, poi, ts, lat, lon);
  }

  // e_q for a live query against the active snapshot.
  std::vector<float> encode(const std::string& user, double lat, double lon,
                            std::int64_t ts) const {
    auto snap = active();
    Tape<float> tape(&snap->online);
    return encode_on(*snap, tape, user, lat, lon, ts);
  }

  struct QueryResult {
    std::vector<std::pair<std::string, float>> items;  // (poi id, score), best first
    std::int64_t latency_us = 0;
    const Snapshot* served_by = nullptr;  // identity tag for swap tests
  };

  QueryResult query(const std::string& user, double lat, double lon, std::int64_t ts,
                    int k) const {
    const auto t0 = std::chrono::steady_clock::now();
    auto snap = active();
    QueryResult res;
    res.served_by = snap.get();
    if (k > 0) {
      thread_local Tape<float> tape;
      tape.reset(&snap->online);
      const std::vector<float> eq = encode_on(*snap, tape, user, lat, lon, ts);
      thread_local std::vector<float> scores;
      scores.assign(snap->pois.size(), 0.0f);
      const std::uint32_t d = snap->dim;
      for (std::uint32_t p = 0; p < snap->pois.size(); ++p) {
        const float* row = snap->poi_vecs_norm.data() + std::size_t(p) * d;
        float s = 0.0f;
        for (std::uint32_t j = 0; j < d; ++j) s += row[j] * eq[j];
        scores[p] = s;
      }
      for (const Scored& s : top_k_by_score(scores, std::size_t(k)))
        res.items.emplace_back(snap->pois.id(s.index), s.score);
    }
    res.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return res;
  }

  SessionStore& sessions() { return sessions_; }

 private:
  std::vector<float> encode_on(const Snapshot& snap, Tape<float>& tape, const std::string& user,
                               double lat, double lon, std::int64_t ts) const {
    const int slot = slot_of(ts, snap.tz_offset, snap.slots);
    const std::string cell = cell_of(lat, lon);
    const std::uint32_t d = snap.dim;

    ViewNodes<float> views;
    const std::uint32_t uidx = snap.users.find(user);
    if (uidx != kNoIndex) {
      auto view_node = [&](const ViewKey& key) -> Tape<float>::Id {
        const std::vector<float>* v = snap.user_view(uidx, key);
        return v ? tape.constant(std::span<const float>(*v)) : -1;
      };
      views.u_g = view_node(ViewKey::global());
      if (snap.variant != Variant::NoSpatial) views.u_s = view_node(ViewKey::spatial(cell));
      if (snap.variant != Variant::NoTemporal)
        for (int s = 0; s < kNumSlots; ++s)
          views.u_t[std::size_t(s)] = view_node(ViewKey::temporal(s));
      for (int s = 0; s < kNumSlots; ++s)
        views.u_st[std::size_t(s)] = view_node(ViewKey::spatio_temporal(cell, s));
    }

    std::vector<RealtimeItem<float>> items;
    if (snap.variant != Variant::NoRealtime) {
      const auto clicks = sessions_.recent(user, ts, snap.realtime_window,
                                           std::size_t(snap.max_realtime));
      items.reserve(clicks.size());
      for (const auto& c : clicks) {
        const std::uint32_t poi = snap.pois.find(c.poi_id);
        if (poi == kNoIndex) continue;  // acked but unknown to this snapshot
        RealtimeItem<float> item;
        item.e_p = tape.constant(snap.poi_vector(poi));
        item.slot_distance =
            circular_slot_distance(slot_of(c.ts, snap.tz_offset, snap.slots), slot);
        item.distance_bucket = haversine_bucket(c.lat, c.lon, lat, lon);
        items.push_back(item);
      }
    }

    auto eq = encode_from_views<float>(tape, views, items, slot, snap.cell_row(cell), d,
                                       snap.variant, float(snap.leaky_slope));
    auto v = tape.value(eq.e_q);
    return {v.begin(), v.end()};
  }

  std::shared_ptr<const Snapshot> snap_;
  mutable std::mutex snap_mu_;
  SessionStore sessions_;
};

// --- line protocol -----------------------------------------------------------
//
// One JSON object per line.
//   {"op":"click","user":u,"poi":p,"ts":t,"lat":y,"lon":x} -> {"ok":true}
//   {"op":"query","user":u,"lat":y,"lon":x,"ts":t,"k":K}
//     -> {"ok":true,"results":[{"poi":p,"score":s},..],"latency_us":n}
//   {"op":"swap","path":f} -> {"ok":true} | {"ok":false,"error":e}

inline std::string handle_request_line(ServeEngine& engine, const std::string& line) {
  nlohmann::json reply;
  try {
    nlohmann::json req = nlohmann::json::parse(line);
    const std::string op = req.at("op").get<std::string>();
    if (op == "click") {
      engine.record_click(req.at("user").get<std::string>(), req.at("poi").get<std::string>(),
                          req.at("ts").get<std::int64_t>(), req.at("lat").get<double>(),
                          req.at("lon").get<double>());
      reply["ok"] = true;
    } else if (op == "query") {
      auto res = engine.query(req.at("user").get<std::string>(), req.at("lat").get<double>(),
                              req.at("lon").get<double>(), req.at("ts").get<std::int64_t>(),
                              req.at("k").get<int>());
      nlohmann::json results = nlohmann::json::array();
      for (const auto& [poi, score] : res.items)
        results.push_back(nlohmann::json{{"poi", poi}, {"score", score}});
      reply["ok"] = true;
      reply["results"] = std::move(results);
      reply["latency_us"] = res.latency_us;
    } else if (op == "swap") {
      std::string error;
      if (engine.swap_from_file(req.at("path").get<std::string>(), &error)) {
        reply["ok"] = true;
      } else {
        reply["ok"] = false;
        reply["error"] = error;
      }
    } else {
      reply["ok"] = false;
      reply["error"] = "unknown op: " + op;
    }
  } catch (const std::exception& e) {
    reply["ok"] = false;
    reply["error"] = e.what();
  }
  return reply.dump();
}

inline void serve_stdio(ServeEngine& engine, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request_line(engine, line) << "\n" << std::flush;
  }
}

}  // namespace stgin
