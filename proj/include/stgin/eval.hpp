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
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgin/encoder.hpp"
#include "stgin/topk.hpp"
#include "stgin/train.hpp"

namespace stgin {

struct EvalOptions {
  int k = 10;
  std::size_t max_queries = 0;        // 0 = all test queries, else stride subsample
  std::int64_t truth_window = 86400;  // ground truth: next-24h clicks
  int full_cap1 = 64, full_cap2 = 32;
};

struct EvalReport {
  std::string variant = "none";
  int k = 0;
  double hitrate = 0.0;
  double recall = 0.0;
  std::size_t num_queries = 0;
  std::uint32_t data_hash = 0;
};

// One evaluated query reduced to what the metrics need.
struct QueryOutcome {
  std::size_t truth_size = 0;  // ground-truth POIs, retrievable or not
  std::size_t hits = 0;        // |topK intersect truth|
};

// HitRate@K = fraction of queries with >= 1 truth item retrieved;
// Recall@K = mean over queries of hits / truth_size.
inline std::pair<double, double> compute_metrics(std::span<const QueryOutcome> outcomes) {
  if (outcomes.empty()) throw Error("evaluate: empty query set");
  double hit = 0.0, recall = 0.0;
  for (const auto& o : outcomes) {
    hit += o.hits > 0 ? 1.0 : 0.0;
    recall += o.truth_size == 0 ? 0.0 : double(o.hits) / double(o.truth_size);
  }
  return {hit / double(outcomes.size()), recall / double(outcomes.size())};
}

// All catalog POI vectors under full (weight-ranked) trees, row-major, plus
// an L2-normalized copy for cosine scoring.
template <typename Real>
std::pair<std::vector<float>, std::vector<float>> export_poi_matrix(
    const ParamStore<Real>& store, const MultiViewGraph& g, int cap1, int cap2,
    double leaky_slope = kDefaultLeakySlope) {
  const std::uint32_t d = store.get(pname::poi_emb).cols;
  std::vector<float> raw(std::size_t(g.pois.size()) * d, 0.0f);
  std::vector<float> normalized(raw.size(), 0.0f);
  EncoderOptions opt;
  opt.full_trees = true;
  opt.full_cap1 = cap1;
  opt.full_cap2 = cap2;
  opt.leaky_slope = leaky_slope;
  GraphEncoder<Real> enc(g, opt);
  Tape<Real> tape(&store);
  for (std::uint32_t p = 0; p < g.pois.size(); ++p) {
    tape.reset(&store);
    enc.begin_batch(tape, nullptr);
    auto v = tape.value(enc.poi_vector(p));
    double norm = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) {
      raw[std::size_t(p) * d + j] = static_cast<float>(v[j]);
      norm += double(v[j]) * double(v[j]);
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::uint32_t j = 0; j < d; ++j)
        normalized[std::size_t(p) * d + j] = static_cast<float>(double(v[j]) / norm);
  }
  return {std::move(raw), std::move(normalized)};
}

namespace detail {

inline std::uint32_t fnv1a32(std::uint32_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 16777619u;
  }
  return h;
}

}  // namespace detail

// Scores every catalog POI for each (subsampled) test query and compares the
// top-K against the ground truth: the query's positive plus every other POI
// the same user clicked within the following `truth_window` in the test log.
template <typename Real>
EvalReport evaluate(const ParamStore<Real>& store, Variant variant, const Dataset& ds,
                    const MultiViewGraph& g, const EvalOptions& opt) {
  if (ds.test.empty()) throw Error("evaluate: empty test set");
  const std::uint32_t d = store.get(pname::poi_emb).cols;
  auto [raw, poi_norm] = export_poi_matrix<Real>(store, g, opt.full_cap1, opt.full_cap2);

  // deterministic subsample
  std::vector<std::uint32_t> picked;
  if (opt.max_queries == 0 || ds.test.size() <= opt.max_queries) {
    picked.resize(ds.test.size());
    for (std::uint32_t i = 0; i < picked.size(); ++i) picked[i] = i;
  } else {
    const double stride = double(ds.test.size()) / double(opt.max_queries);
    for (std::size_t i = 0; i < opt.max_queries; ++i)
      picked.push_back(std::uint32_t(double(i) * stride));
  }

  // ground truth per picked query: positives of the same user in (ts, ts+w]
  // (test samples are user-major, ts-ascending within each user)
  std::uint32_t data_hash = 2166136261u;
  for (std::uint32_t qi : picked) {
    const auto& q = ds.test[qi];
    data_hash = detail::fnv1a32(data_hash, ds.users[q.user].id.data(), ds.users[q.user].id.size());
    data_hash = detail::fnv1a32(data_hash, &q.ts, sizeof(q.ts));
    data_hash = detail::fnv1a32(data_hash, q.positive_poi.data(), q.positive_poi.size());
  }
  data_hash = detail::fnv1a32(data_hash, &opt.k, sizeof(opt.k));
  const std::uint32_t n_pois = g.pois.size();
  data_hash = detail::fnv1a32(data_hash, &n_pois, sizeof(n_pois));

  // test samples grouped per user, ts-ascending (they already are per user)
  std::map<std::uint32_t, std::vector<const QuerySample*>> test_by_user;
  for (const auto& s : ds.test) test_by_user[s.user].push_back(&s);

  EncoderOptions eopt;
  eopt.variant = variant;
  eopt.full_trees = true;
  eopt.full_cap1 = opt.full_cap1;
  eopt.full_cap2 = opt.full_cap2;
  GraphEncoder<Real> enc(g, eopt);
  enc.tz_offset = ds.options.tz_offset;
  enc.slot_bounds = ds.options.slots;
  Tape<Real> tape(&store);

  std::vector<QueryOutcome> outcomes;
  outcomes.reserve(picked.size());
  std::vector<float> scores(g.pois.size(), 0.0f);
  std::uint32_t current_user = kNoIndex;
  for (std::uint32_t qi : picked) {
    const auto& q = ds.test[qi];
    if (q.user != current_user) {  // per-user tape so view subtrees are shared
      tape.reset(&store);
      enc.begin_batch(tape, nullptr);
      current_user = q.user;
    }
    auto views = enc.user_views(ds.users[q.user].id, q.cell);

    std::vector<RealtimeItem<Real>> items;
    if (variant != Variant::NoRealtime) {
      for (const auto& e : ds.realtime(q)) {
        const std::uint32_t poi = g.pois.find(e.poi_id);
        if (poi == kNoIndex) continue;
        RealtimeItem<Real> item;
        std::vector<Real> ep(d);
        for (std::uint32_t j = 0; j < d; ++j) ep[j] = raw[std::size_t(poi) * d + j];
        item.e_p = tape.constant(ep);
        item.slot_distance = circular_slot_distance(
            slot_of(e.ts, ds.options.tz_offset, ds.options.slots), q.slot);
        item.distance_bucket = haversine_bucket(e.lat, e.lon, q.lat, q.lon);
        items.push_back(item);
      }
    }
    auto eq = encode_from_views<Real>(tape, views, items, q.slot, enc.cell_row_of(q.cell), d,
                                      variant, static_cast<Real>(eopt.leaky_slope));
    auto eqv = tape.value(eq.e_q);

    for (std::uint32_t p = 0; p < g.pois.size(); ++p) {
      float s = 0.0f;
      const float* row = poi_norm.data() + std::size_t(p) * d;
      for (std::uint32_t j = 0; j < d; ++j) s += row[j] * float(eqv[j]);
      scores[p] = s;
    }
    auto top = top_k_by_score(scores, std::size_t(opt.k));

    // truth set
    std::set<std::uint32_t> truth_known;
    std::size_t truth_unknown = 0;
    auto add_truth = [&](const std::string& poi_id) {
      const std::uint32_t p = g.pois.find(poi_id);
      if (p == kNoIndex)
        ++truth_unknown;
      else
        truth_known.insert(p);
    };
    add_truth(q.positive_poi);
    for (const QuerySample* other : test_by_user[q.user]) {
      if (other->ts <= q.ts) continue;
      if (other->ts > q.ts + opt.truth_window) break;
      add_truth(other->positive_poi);
    }

    QueryOutcome o;
    o.truth_size = truth_known.size() + truth_unknown;
    for (const auto& s : top) o.hits += truth_known.count(s.index);
    outcomes.push_back(o);
  }

  EvalReport rep;
  rep.variant = variant_name(variant);
  rep.k = opt.k;
  auto [hit, rec] = compute_metrics(outcomes);
  rep.hitrate = hit;
  rep.recall = rec;
  rep.num_queries = outcomes.size();
  rep.data_hash = data_hash;
  return rep;
}

inline void write_reports_jsonl(std::span<const EvalReport> reports, std::ostream& out) {
  for (const auto& r : reports) {
    nlohmann::json j{{"variant", r.variant},         {"k", r.k},
                     {"hitrate", r.hitrate},         {"recall", r.recall},
                     {"num_queries", r.num_queries}, {"data_hash", r.data_hash}};
    out << j.dump() << "\n";
  }
}

inline void print_report_table(std::span<const EvalReport> reports, std::ostream& out) {
  out << "variant            K      HitRate@K   Recall@K    queries\n";
  char line[160];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-18s %-6d %-11.4f %-11.4f %zu\n",
                  variant_display_name(parse_variant(r.variant)), r.k, r.hitrate, r.recall,
                  r.num_queries);
    out << line;
  }
}

}  // namespace stgin
