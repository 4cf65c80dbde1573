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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgin/events.hpp"
#include "stgin/geo.hpp"
#include "stgin/rng.hpp"
#include "stgin/timeslot.hpp"

namespace stgin {

// Planted-preference click log generator. Stands in for production data:
// every click is drawn from a mixture of context-keyed preferences so that
// spatial, temporal, spatial-temporal and recent-behavior signals each carry
// real predictive power, and an engine that uses them all should beat any
// ablation.
struct SynthConfig {
  int n_users = 1000;
  int n_pois = 5000;
  int n_cells = 16;
  int days = 28;
  std::uint64_t seed = 7;

  int n_categories = 24;
  int home_cells = 3;           // cells a user actually visits
  double visits_per_day = 1.4;  // Poisson rate
  int session_max_clicks = 3;

  // Click-category mixture. Weights need not sum to 1; the remainder after
  // normalization is uniform noise.
  double w_spatial = 0.26;   // per-home-cell category (slot independent)
  double w_temporal = 0.20;  // per-slot category (cell independent)
  double w_st = 0.26;        // per-(cell, slot) category
  double w_recent = 0.22;    // repeat the category of a click from the last 24 h
  double w_noise = 0.06;

  // Once a channel picks the category, the user clicks one of a small set
  // of personal favorites within (cell, category) most of the time; real
  // click logs are dominated by revisits.
  int favorites_per_pool = 2;
  double favorite_prob = 0.9;
  double exact_revisit_prob = 0.55;  // recency channel: same POI, not just same category
  double usual_slot_prob = 0.55;     // how concentrated a cell's visits are on its 2 usual slots

  // Habit drift: every (cell, slot) preference re-rolls each period while
  // per-cell and per-slot preferences stay put. Slot-sliced views carry a
  // mix of stale epochs; slot-pooled views stay clean. The drift being
  // visible inside the training span is what lets the model learn to lean
  // on the pooled spatial view.
  int habit_period_days = 12;

  double base_lat = 30.6;
  double base_lon = 120.4;
  std::int64_t start_ts = 1706745600;  // 2024-02-01 00:00 utc
  std::int64_t tz_offset = 0;
  SlotBoundaries slots;
};

struct SynthGroundTruth {
  // per user: planted preference tables (categories)
  struct UserPlan {
    std::vector<std::string> home_cells;
    std::map<std::string, int> spatial_pref;              // cell -> category
    std::array<int, kNumSlots> slot_pref{0, 0, 0, 0};     // slot -> category
    std::map<std::string, int> st_pref;  // "cell:slot" -> category (first epoch)
    std::map<std::string, std::array<int, 2>> usual_slots;  // cell -> two usual slots
  };
  std::vector<UserPlan> users;
  std::vector<int> poi_category;          // per poi
  std::vector<std::string> poi_cell;      // per poi
  std::vector<std::string> cells;         // planted cell codes
};

struct SynthOutput {
  std::vector<InteractionEvent> events;  // sorted by (user_id, ts)
  SynthGroundTruth truth;
};

namespace detail {

inline std::string synth_id(const char* prefix, int i, int width) {
  std::string n = std::to_string(i);
  std::string out(prefix);
  out.append(std::size_t(width > int(n.size()) ? width - int(n.size()) : 0), '0');
  out += n;
  return out;
}

}  // namespace detail

// The (cell, slot) preference of one user during one drift epoch;
// deterministic in (seed, user, cell, slot, epoch).
inline int st_category(const SynthConfig& cfg, int user, int cell, int slot, int epoch) {
  std::uint64_t h = cfg.seed ^ 0x5bd1e995u;
  h ^= std::uint64_t(user) * 0x9e3779b97f4a7c15ULL;
  h ^= (std::uint64_t(cell) << 32) ^ (std::uint64_t(slot) << 16) ^ std::uint64_t(epoch);
  splitmix64(h);
  return int(splitmix64(h) % std::uint64_t(cfg.n_categories));
}

inline SynthOutput generate_synthetic(const SynthConfig& cfg) {
  SynthOutput out;
  Rng rng(cfg.seed, "synth");

  // cell grid: spaced ~10 km so codes are distinct length-5 geohashes
  std::vector<std::pair<double, double>> cell_anchor;
  for (int c = 0; c < cfg.n_cells; ++c) {
    const int gx = c % 4, gy = c / 4;
    cell_anchor.emplace_back(cfg.base_lat + 0.105 * gy, cfg.base_lon + 0.125 * gx);
  }
  std::vector<std::string> cell_code;
  for (auto& [lat, lon] : cell_anchor) cell_code.push_back(cell_of(lat, lon));
  out.truth.cells = cell_code;

  // POIs: evenly spread over (cell, category); coordinates jittered inside
  // the cell (re-sampled if the jitter crosses a geohash boundary)
  const int n_pois = cfg.n_pois;
  std::vector<std::pair<double, double>> poi_coord(static_cast<std::size_t>(n_pois));
  out.truth.poi_category.resize(std::size_t(n_pois));
  out.truth.poi_cell.resize(std::size_t(n_pois));
  // per (cell, category) pool of poi indices, plus a per-cell fallback for
  // (cell, category) pairs that got no POI at small catalog sizes
  std::map<std::pair<int, int>, std::vector<int>> pool;
  std::map<int, std::vector<int>> cell_pool;
  for (int p = 0; p < n_pois; ++p) {
    const int cell = p % cfg.n_cells;
    const int cat = (p / cfg.n_cells) % cfg.n_categories;
    double lat = 0, lon = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      lat = cell_anchor[std::size_t(cell)].first + rng.uniform(-0.012, 0.012);
      lon = cell_anchor[std::size_t(cell)].second + rng.uniform(-0.012, 0.012);
      if (cell_of(lat, lon) == cell_code[std::size_t(cell)]) break;
    }
    poi_coord[std::size_t(p)] = {lat, lon};
    out.truth.poi_category[std::size_t(p)] = cat;
    out.truth.poi_cell[std::size_t(p)] = cell_code[std::size_t(cell)];
    pool[{cell, cat}].push_back(p);
    cell_pool[cell].push_back(p);
  }

  // users
  out.truth.users.resize(std::size_t(cfg.n_users));
  for (int u = 0; u < cfg.n_users; ++u) {
    auto& plan = out.truth.users[std::size_t(u)];
    std::vector<int> cells(std::size_t(cfg.n_cells));
    for (int c = 0; c < cfg.n_cells; ++c) cells[std::size_t(c)] = c;
    rng.shuffle(cells);
    cells.resize(std::size_t(std::min(cfg.home_cells, cfg.n_cells)));
    for (int c : cells) plan.home_cells.push_back(cell_code[std::size_t(c)]);
    // distinct per-cell and per-slot categories: a unified view of this user
    // mixes conflicting contexts, which is exactly what the context-specific
    // views are supposed to untangle
    std::vector<int> cats(std::size_t(cfg.n_categories));
    for (int i = 0; i < cfg.n_categories; ++i) cats[std::size_t(i)] = i;
    rng.shuffle(cats);
    for (std::size_t i = 0; i < cells.size(); ++i)
      plan.spatial_pref[cell_code[std::size_t(cells[i])]] = cats[i % cats.size()];
    rng.shuffle(cats);
    for (int s = 0; s < kNumSlots; ++s)
      plan.slot_pref[std::size_t(s)] = cats[std::size_t(s) % cats.size()];
    for (int c : cells)
      for (int s = 0; s < kNumSlots; ++s)
        plan.st_pref[cell_code[std::size_t(c)] + ":" + std::to_string(s)] =
            st_category(cfg, u, c, s, 0);
    // sparse spatial-temporal coverage: each home cell gets two usual slots
    for (int c : cells) {
      const int s1 = int(rng.below(kNumSlots));
      int s2 = int(rng.below(kNumSlots));
      if (s2 == s1) s2 = (s2 + 1) % kNumSlots;
      plan.usual_slots[cell_code[std::size_t(c)]] = {s1, s2};
    }
  }

  // slot -> local second-of-day window (uniform inside, away from edges)
  auto slot_time = [&](int slot, Rng& r) -> std::int64_t {
    const auto& b = cfg.slots;
    int lo = 0, hi = 0;
    switch (slot) {
      case 0: lo = b.morning_start; hi = b.noon_start; break;
      case 1: lo = b.noon_start; hi = b.dinner_start; break;
      case 2: lo = b.dinner_start; hi = b.night_start; break;
      default: lo = b.night_start; hi = b.morning_start + 24; break;
    }
    return (std::int64_t(lo) * 3600 + std::int64_t(r.below(std::uint32_t((hi - lo) * 3600 - 1200))))
           % 86400;
  };

  const double w_total =
      cfg.w_spatial + cfg.w_temporal + cfg.w_st + cfg.w_recent + cfg.w_noise;
  const int habit_period = std::max(1, cfg.habit_period_days);

  // deterministic per-(user, cell, category) favorite POIs
  auto favorites = [&](int u, int cell, int cat) {
    const auto& candidates = [&]() -> const std::vector<int>& {
      auto it = pool.find({cell, cat});
      return it != pool.end() ? it->second : cell_pool.at(cell);
    }();
    std::uint64_t h = cfg.seed ^ (std::uint64_t(u) * 0x9e3779b97f4a7c15ULL) ^
                      (std::uint64_t(cell) << 40) ^ (std::uint64_t(cat) << 20);
    Rng fav_rng(h, "favorites");
    std::vector<int> favs;
    const int want = std::min<int>(cfg.favorites_per_pool, int(candidates.size()));
    std::set<std::size_t> taken;
    while (int(favs.size()) < want) {
      const std::size_t i = fav_rng.below(std::uint32_t(candidates.size()));
      if (taken.insert(i).second) favs.push_back(candidates[i]);
    }
    return favs;
  };

  for (int u = 0; u < cfg.n_users; ++u) {
    const auto& plan = out.truth.users[std::size_t(u)];
    const std::string user_id = detail::synth_id("u", u, 6);
    std::vector<InteractionEvent> user_events;
    // (ts, category, poi) of this user's past clicks, for the recency channel
    std::vector<std::tuple<std::int64_t, int, int>> past;

    for (int day = 0; day < cfg.days; ++day) {
      int visits = rng.poisson(cfg.visits_per_day);
      for (int v = 0; v < visits; ++v) {
        // pick a home cell, then one of its usual slots (80%) or any slot
        const std::size_t ci = rng.below(std::uint32_t(plan.home_cells.size()));
        const std::string& cell = plan.home_cells[ci];
        int cell_idx = 0;
        for (int c = 0; c < cfg.n_cells; ++c)
          if (cell_code[std::size_t(c)] == cell) cell_idx = c;
        int slot;
        const auto& usual = plan.usual_slots.at(cell);
        if (rng.uniform() < cfg.usual_slot_prob)
          slot = usual[rng.below(2)];
        else
          slot = int(rng.below(kNumSlots));

        std::int64_t ts = cfg.start_ts + std::int64_t(day) * 86400 + slot_time(slot, rng) -
                          cfg.tz_offset;
        const int clicks = 1 + int(rng.below(std::uint32_t(cfg.session_max_clicks)));
        for (int k = 0; k < clicks; ++k) {
          // category per the mixture
          const double roll = rng.uniform() * w_total;
          int cat;
          int exact_poi = -1;  // recency channel may revisit one exact POI
          if (roll < cfg.w_spatial) {
            cat = plan.spatial_pref.at(cell);
          } else if (roll < cfg.w_spatial + cfg.w_temporal) {
            cat = plan.slot_pref[std::size_t(slot)];
          } else if (roll < cfg.w_spatial + cfg.w_temporal + cfg.w_st) {
            cat = st_category(cfg, u, cell_idx, slot, day / habit_period);
          } else if (roll < cfg.w_spatial + cfg.w_temporal + cfg.w_st + cfg.w_recent) {
            // revisit something clicked within the last 24 h, if anything
            // (visits are not generated in ts order, so scan the window)
            std::vector<std::pair<int, int>> recent;  // (category, poi)
            for (const auto& [pts, pcat, ppoi] : past)
              if (pts < ts && pts >= ts - 86400) recent.emplace_back(pcat, ppoi);
            if (!recent.empty()) {
              const auto [rcat, rpoi] = recent[rng.below(std::uint32_t(recent.size()))];
              cat = rcat;
              // exact revisit only works when the POI is in the current cell
              if (out.truth.poi_cell[std::size_t(rpoi)] == cell &&
                  rng.uniform() < cfg.exact_revisit_prob)
                exact_poi = rpoi;
            } else {
              cat = int(rng.below(std::uint32_t(cfg.n_categories)));
            }
          } else {
            cat = int(rng.below(std::uint32_t(cfg.n_categories)));
          }
          int poi;
          if (exact_poi >= 0) {
            poi = exact_poi;
          } else if (rng.uniform() < cfg.favorite_prob) {
            const auto favs = favorites(u, cell_idx, cat);
            poi = favs[rng.below(std::uint32_t(favs.size()))];
          } else {
            const auto pit = pool.find({cell_idx, cat});
            const auto& candidates = pit != pool.end() ? pit->second : cell_pool.at(cell_idx);
            poi = candidates[rng.below(std::uint32_t(candidates.size()))];
          }
          user_events.push_back(InteractionEvent{user_id, detail::synth_id("p", poi, 6), ts,
                                                 poi_coord[std::size_t(poi)].first,
                                                 poi_coord[std::size_t(poi)].second});
          past.emplace_back(ts, cat, poi);
          ts += 60 + std::int64_t(rng.below(240));  // next click in the session
        }
      }
    }
    std::stable_sort(user_events.begin(), user_events.end(),
                     [](const auto& a, const auto& b) { return a.ts < b.ts; });
    // de-collide timestamps so event identity is unambiguous
    for (std::size_t i = 1; i < user_events.size(); ++i)
      if (user_events[i].ts <= user_events[i - 1].ts)
        user_events[i].ts = user_events[i - 1].ts + 1;
    out.events.insert(out.events.end(), user_events.begin(), user_events.end());
  }

  std::stable_sort(out.events.begin(), out.events.end(), [](const auto& a, const auto& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.ts < b.ts;
  });
  return out;
}

// Diagnostics sidecar: the planted preference tables, one JSON document.
inline nlohmann::json synth_truth_json(const SynthConfig& cfg, const SynthGroundTruth& truth) {
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t u = 0; u < truth.users.size(); ++u) {
    const auto& plan = truth.users[u];
    nlohmann::json st;
    for (const auto& [key, cat] : plan.st_pref) st[key] = cat;
    nlohmann::json sp;
    for (const auto& [cell, cat] : plan.spatial_pref) sp[cell] = cat;
    users.push_back(nlohmann::json{{"user", detail::synth_id("u", int(u), 6)},
                                   {"home_cells", plan.home_cells},
                                   {"spatial_pref", sp},
                                   {"slot_pref", plan.slot_pref},
                                   {"st_pref", st}});
  }
  nlohmann::json pois = nlohmann::json::array();
  for (std::size_t p = 0; p < truth.poi_category.size(); ++p)
    pois.push_back(nlohmann::json{{"poi", detail::synth_id("p", int(p), 6)},
                                  {"cell", truth.poi_cell[p]},
                                  {"category", truth.poi_category[p]}});
  return nlohmann::json{{"seed", cfg.seed},
                        {"cells", truth.cells},
                        {"users", users},
                        {"pois", pois}};
}

}  // namespace stgin
