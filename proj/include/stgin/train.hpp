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
#include <ostream>
#include <set>
#include <vector>

#include <json.hpp>

#include "stgin/adam.hpp"
#include "stgin/encoder.hpp"
#include "stgin/model.hpp"

namespace stgin {

struct TrainConfig {
  int dim = 16;
  double lr = 0.001;
  int batch = 64;  // 1024 upstream; 64 is the desk-scale default
  int negatives = 6;
  double margin = kDefaultMargin;
  int fanout1 = 20, fanout2 = 10;
  int poi_fanout1 = 10, poi_fanout2 = 10;
  int epochs = 1;
  int max_steps = 0;  // 0 = run every batch of every epoch
  std::uint64_t seed = 42;
  SlotBoundaries slots;
  std::int64_t session_gap = kDefaultSessionGap;
  std::int64_t realtime_window = kDefaultRealtimeWindow;
  int max_realtime = kDefaultMaxRealtime;
  std::int64_t tz_offset = 0;
  Variant variant = Variant::Full;
  double leaky_slope = kDefaultLeakySlope;
  bool mean_reduction = false;  // Eq. 10 sums per-sample losses; mean is opt-in
  // Fraction of negatives drawn from the query's own geo cell instead of the
  // whole catalog. 0 keeps plain uniform sampling; desk-scale catalogs need
  // some same-cell negatives or the loss never exercises within-cell ranking.
  double hard_negative_frac = 0.0;
};

// Uniform draw of k POIs from the catalog minus `exclude`, without
// replacement.
inline std::vector<std::uint32_t> sample_negatives(std::uint32_t catalog_size,
                                                   const std::set<std::uint32_t>& exclude, int k,
                                                   Rng& rng) {
  if (catalog_size < exclude.size() + std::size_t(k))
    throw Error("catalog too small: need " + std::to_string(k) + " negatives from " +
                std::to_string(catalog_size) + " minus " + std::to_string(exclude.size()) +
                " excluded");
  std::set<std::uint32_t> taken;
  std::vector<std::uint32_t> out;
  out.reserve(std::size_t(k));
  while (out.size() < std::size_t(k)) {
    const std::uint32_t cand = rng.below(catalog_size);
    if (exclude.count(cand) || !taken.insert(cand).second) continue;
    out.push_back(cand);
  }
  return out;
}

// Mixed draw: each negative comes from `pool` (the query cell's POIs) with
// probability pool_frac, otherwise from the whole catalog. Falls back to the
// catalog when the pool is exhausted.
inline std::vector<std::uint32_t> sample_negatives_mixed(std::uint32_t catalog_size,
                                                         std::span<const std::uint32_t> pool,
                                                         double pool_frac,
                                                         const std::set<std::uint32_t>& exclude,
                                                         int k, Rng& rng) {
  if (pool_frac <= 0.0 || pool.empty()) return sample_negatives(catalog_size, exclude, k, rng);
  std::set<std::uint32_t> taken;
  std::vector<std::uint32_t> out;
  out.reserve(std::size_t(k));
  int guard = 0;
  while (out.size() < std::size_t(k)) {
    std::uint32_t cand;
    if (rng.uniform() < pool_frac && guard < 64) {
      cand = pool[rng.below(std::uint32_t(pool.size()))];
    } else {
      cand = rng.below(catalog_size);
    }
    if (exclude.count(cand) || taken.count(cand)) {
      ++guard;  // small pools can run dry; lean on the catalog instead
      continue;
    }
    taken.insert(cand);
    guard = 0;
    out.push_back(cand);
  }
  return out;
}

struct TrainResult {
  ParamStore<float> params;
  CheckpointManifest manifest;
  std::vector<double> step_losses;
};

// Pairwise hinge training over the multi-view graph: per batch, sample
// meta-path trees, encode e_q, draw negatives, minimize Eq. 10 with Adam.
// Writes one JSONL line per step to `log` when given.
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds, const MultiViewGraph& g,
                         std::ostream* log = nullptr) {
  ModelDims dims;
  dims.d = cfg.dim;
  dims.n_users = g.users.size();
  dims.n_pois = g.pois.size();
  dims.n_cells = g.cells.size();

  TrainResult result;
  result.params = init_params<float>(dims, cfg.seed);
  result.manifest.dims = dims;
  result.manifest.seed = cfg.seed;
  result.manifest.variant = variant_name(cfg.variant);
  result.manifest.users = g.users;
  result.manifest.pois = g.pois;
  result.manifest.cells = g.cells;

  EncoderOptions eopt;
  eopt.variant = cfg.variant;
  eopt.fanout1 = cfg.fanout1;
  eopt.fanout2 = cfg.fanout2;
  eopt.poi_fanout1 = cfg.poi_fanout1;
  eopt.poi_fanout2 = cfg.poi_fanout2;
  eopt.leaky_slope = cfg.leaky_slope;
  GraphEncoder<float> enc(g, eopt);
  enc.tz_offset = cfg.tz_offset;
  enc.slot_bounds = cfg.slots;

  AdamConfig aopt;
  aopt.lr = cfg.lr;  // the betas and eps stay at the standard defaults
  Adam<float> adam(result.params, aopt);

  Rng order_rng(cfg.seed, "order");
  Rng tree_rng(cfg.seed, "trees");
  Rng neg_rng(cfg.seed, "negatives");

  // per-cell POI pools for hard-negative mixing
  std::map<std::string, std::vector<std::uint32_t>> cell_pois;
  if (cfg.hard_negative_frac > 0.0)
    for (std::uint32_t p = 0; p < g.pois.size(); ++p)
      cell_pois[cell_of(g.poi_latlon[p].first, g.poi_latlon[p].second)].push_back(p);
  const std::vector<std::uint32_t> empty_pool;

  Tape<float> tape(&result.params);
  using Id = Tape<float>::Id;
  int step = 0;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::uint32_t> order(ds.train.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch)) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), at + std::size_t(cfg.batch));
      tape.reset(&result.params);
      enc.begin_batch(tape, &tree_rng);
      std::vector<Id> losses;
      losses.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        const QuerySample& q = ds.train[order[i]];
        auto eq = enc.encode(query_context(ds, q));
        const std::uint32_t pos = g.pois.at(q.positive_poi);
        std::set<std::uint32_t> exclude{pos};
        for (const auto& e : ds.realtime(q)) {
          const std::uint32_t p = g.pois.find(e.poi_id);
          if (p != kNoIndex) exclude.insert(p);
        }
        const std::vector<std::uint32_t>* pool = &empty_pool;
        if (cfg.hard_negative_frac > 0.0) {
          auto it = cell_pois.find(q.cell);
          if (it != cell_pois.end()) pool = &it->second;
        }
        std::vector<Id> negs;
        for (std::uint32_t n :
             sample_negatives_mixed(g.pois.size(), *pool, cfg.hard_negative_frac, exclude,
                                    cfg.negatives, neg_rng))
          negs.push_back(enc.poi_vector(n));
        losses.push_back(hinge_loss<float>(tape, eq.e_q, enc.poi_vector(pos), negs,
                                           static_cast<float>(cfg.margin)));
      }
      Id batch_loss = tape.sum(tape.concat(losses));
      if (cfg.mean_reduction) batch_loss = tape.scale(batch_loss, 1.0f / float(end - at));
      const double loss_value = tape.scalar_value(batch_loss);
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (batch " +
                           std::to_string(at / std::size_t(cfg.batch)) + " of epoch " +
                           std::to_string(epoch) + ")");
      tape.backward(batch_loss);
      adam.step(result.params, tape);
      result.step_losses.push_back(loss_value);
      ++step;
      if (log) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        nlohmann::json j{{"step", step}, {"loss", loss_value}, {"lr", cfg.lr}, {"wall_ms", ms}};
        *log << j.dump() << "\n";
      }
    }
    if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
  }
  result.manifest.step = step;
  return result;
}

}  // namespace stgin
