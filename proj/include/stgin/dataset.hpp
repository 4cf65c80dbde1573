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
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgin/errors.hpp"
#include "stgin/events.hpp"
#include "stgin/geo.hpp"
#include "stgin/timeslot.hpp"

namespace stgin {

inline constexpr std::int64_t kDefaultRealtimeWindow = 86400;  // 24 h
inline constexpr int kDefaultMaxRealtime = 50;                 // M

// One training/serving unit: a user asking for POIs at (cell, slot, ts).
// History and realtime behaviors are index ranges into the owning Dataset's
// per-user event vector: history is everything strictly older than
// ts - window, realtime is [ts - window, ts) capped at the M most recent.
struct QuerySample {
  std::uint32_t user = 0;  // index into Dataset::users
  std::string cell;        // s_q
  int slot = 0;            // t_q
  std::int64_t ts = 0;
  double lat = 0.0, lon = 0.0;  // query location = the click's coordinates
  std::string positive_poi;
  std::uint32_t hist_end = 0;              // history = events [0, hist_end)
  std::uint32_t rt_begin = 0, rt_end = 0;  // realtime = events [rt_begin, rt_end)
};

struct DatasetOptions {
  std::int64_t realtime_window = kDefaultRealtimeWindow;
  std::int64_t split_ts = 0;  // samples with ts < split_ts train, others test
  int max_realtime = kDefaultMaxRealtime;
  std::int64_t tz_offset = 0;
  SlotBoundaries slots;
};

struct Dataset {
  struct User {
    std::string id;
    std::vector<InteractionEvent> events;  // sorted by ts
  };
  std::vector<User> users;  // sorted by id
  std::vector<QuerySample> train;
  std::vector<QuerySample> test;
  DatasetOptions options;

  std::span<const InteractionEvent> history(const QuerySample& q) const {
    return std::span(users[q.user].events).subspan(0, q.hist_end);
  }
  std::span<const InteractionEvent> realtime(const QuerySample& q) const {
    return std::span(users[q.user].events).subspan(q.rt_begin, q.rt_end - q.rt_begin);
  }
};

// Turns a parsed, (user_id, ts)-sorted click log into next-click prediction
// samples: every click becomes one QuerySample whose positive is that click's
// POI and whose context is the click's cell and slot.
inline Dataset build_dataset(const std::vector<InteractionEvent>& events, const DatasetOptions& opt) {
  Dataset ds;
  ds.options = opt;
  // group by user; input is sorted by (user_id, ts) already
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && events[j].user_id == events[i].user_id) ++j;
    Dataset::User u;
    u.id = events[i].user_id;
    u.events.assign(events.begin() + static_cast<std::ptrdiff_t>(i),
                    events.begin() + static_cast<std::ptrdiff_t>(j));
    ds.users.push_back(std::move(u));
    i = j;
  }
  std::sort(ds.users.begin(), ds.users.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  for (std::uint32_t ui = 0; ui < ds.users.size(); ++ui) {
    const auto& ev = ds.users[ui].events;
    for (std::uint32_t k = 0; k < ev.size(); ++k) {
      const auto& e = ev[k];
      QuerySample q;
      q.user = ui;
      q.ts = e.ts;
      q.lat = e.lat;
      q.lon = e.lon;
      q.cell = cell_of(e.lat, e.lon);
      q.slot = slot_of(e.ts, opt.tz_offset, opt.slots);
      q.positive_poi = e.poi_id;
      // events strictly older than ts, partitioned at ts - window
      std::uint32_t n_prior = 0;
      while (n_prior < k && ev[n_prior].ts < e.ts) ++n_prior;
      // among [0, n_prior): history has ts < ts - window, realtime the rest
      std::uint32_t cut = 0;
      while (cut < n_prior && ev[cut].ts < e.ts - opt.realtime_window) ++cut;
      q.hist_end = cut;
      q.rt_end = n_prior;
      q.rt_begin = cut;
      if (q.rt_end - q.rt_begin > static_cast<std::uint32_t>(opt.max_realtime))
        q.rt_begin = q.rt_end - static_cast<std::uint32_t>(opt.max_realtime);
      (e.ts < opt.split_ts ? ds.train : ds.test).push_back(std::move(q));
    }
  }
  return ds;
}

// --- JSONL external form -----------------------------------------------
//
// One object per line:
//   {"user_id":..,"cell":..,"slot":..,"ts":..,"lat":..,"lon":..,
//    "positive_poi":..,"history":[[poi,ts,lat,lon],..],"realtime":[[..],..]}

namespace detail {

inline nlohmann::json event_tuple(const InteractionEvent& e) {
  return nlohmann::json::array({e.poi_id, e.ts, e.lat, e.lon});
}

}  // namespace detail

inline void write_samples_jsonl(const Dataset& ds, const std::vector<QuerySample>& samples,
                                const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& q : samples) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : ds.history(q)) hist.push_back(detail::event_tuple(e));
    nlohmann::json rt = nlohmann::json::array();
    for (const auto& e : ds.realtime(q)) rt.push_back(detail::event_tuple(e));
    nlohmann::json j{{"user_id", ds.users[q.user].id},
                     {"cell", q.cell},
                     {"slot", q.slot},
                     {"ts", q.ts},
                     {"lat", q.lat},
                     {"lon", q.lon},
                     {"positive_poi", q.positive_poi},
                     {"history", std::move(hist)},
                     {"realtime", std::move(rt)}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

// Reads sample files back into a Dataset. Per-user event lists are
// reconstructed from the union of every sample's history, realtime and
// positive events; since samples cover every click this recovers the
// original per-user sequences for the covered period.
inline Dataset read_samples_jsonl(const std::string& train_path, const std::string& test_path,
                                  const DatasetOptions& opt) {
  Dataset ds;
  ds.options = opt;
  struct Raw {
    std::string user_id;
    QuerySample q;  // user index filled later
    bool is_train;
  };
  std::vector<Raw> raws;
  std::map<std::string, std::vector<InteractionEvent>> per_user;

  auto load = [&](const std::string& path, bool is_train) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open samples file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw ParseError(path + ":" + std::to_string(lineno) + ": invalid json");
      Raw r;
      r.is_train = is_train;
      r.user_id = j.at("user_id").get<std::string>();
      r.q.cell = j.at("cell").get<std::string>();
      r.q.slot = j.at("slot").get<int>();
      r.q.ts = j.at("ts").get<std::int64_t>();
      r.q.lat = j.at("lat").get<double>();
      r.q.lon = j.at("lon").get<double>();
      r.q.positive_poi = j.at("positive_poi").get<std::string>();
      auto& evs = per_user[r.user_id];
      auto add_tuple = [&](const nlohmann::json& t) {
        evs.push_back(InteractionEvent{r.user_id, t.at(0).get<std::string>(),
                                       t.at(1).get<std::int64_t>(), t.at(2).get<double>(),
                                       t.at(3).get<double>()});
      };
      for (const auto& t : j.at("history")) add_tuple(t);
      for (const auto& t : j.at("realtime")) add_tuple(t);
      evs.push_back(InteractionEvent{r.user_id, r.q.positive_poi, r.q.ts, r.q.lat, r.q.lon});
      raws.push_back(std::move(r));
    }
  };
  load(train_path, true);
  load(test_path, false);

  for (auto& [id, evs] : per_user) {
    std::sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) {
      if (a.ts != b.ts) return a.ts < b.ts;
      return a.poi_id < b.poi_id;
    });
    evs.erase(std::unique(evs.begin(), evs.end()), evs.end());
    ds.users.push_back(Dataset::User{id, std::move(evs)});
  }
  // std::map iteration is sorted by id already

  auto user_index = [&](const std::string& id) -> std::uint32_t {
    auto it = std::lower_bound(ds.users.begin(), ds.users.end(), id,
                               [](const auto& u, const std::string& s) { return u.id < s; });
    return static_cast<std::uint32_t>(it - ds.users.begin());
  };

  for (auto& r : raws) {
    r.q.user = user_index(r.user_id);
    const auto& ev = ds.users[r.q.user].events;
    std::uint32_t n_prior = 0;
    while (n_prior < ev.size() && ev[n_prior].ts < r.q.ts) ++n_prior;
    std::uint32_t cut = 0;
    while (cut < n_prior && ev[cut].ts < r.q.ts - opt.realtime_window) ++cut;
    r.q.hist_end = cut;
    r.q.rt_begin = cut;
    r.q.rt_end = n_prior;
    if (r.q.rt_end - r.q.rt_begin > static_cast<std::uint32_t>(opt.max_realtime))
      r.q.rt_begin = r.q.rt_end - static_cast<std::uint32_t>(opt.max_realtime);
    (r.is_train ? ds.train : ds.test).push_back(std::move(r.q));
  }
  return ds;
}

}  // namespace stgin
