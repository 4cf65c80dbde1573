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

#include <gtest/gtest.h>

#include "stgin/eval.hpp"
#include "test_util.hpp"

namespace stgin {
namespace {

TEST(Metrics, HandCheckableTwentyQueryInstance) {
  // 20 queries with hand-picked truth sizes and hit counts:
  //  - 8 queries: truth {a,b}, retrieved a only  -> hit 1, recall 0.5
  //  - 5 queries: truth {a},   retrieved a       -> hit 1, recall 1
  //  - 4 queries: truth {a,b,c,d}, retrieved none -> hit 0, recall 0
  //  - 3 queries: truth {a,b,c}, retrieved all    -> hit 1, recall 1
  std::vector<QueryOutcome> outcomes;
  for (int i = 0; i < 8; ++i) outcomes.push_back({2, 1});
  for (int i = 0; i < 5; ++i) outcomes.push_back({1, 1});
  for (int i = 0; i < 4; ++i) outcomes.push_back({4, 0});
  for (int i = 0; i < 3; ++i) outcomes.push_back({3, 3});
  auto [hitrate, recall] = compute_metrics(outcomes);
  // by hand: hits on 16/20 queries; recall = (8*0.5 + 5*1 + 4*0 + 3*1)/20
  EXPECT_DOUBLE_EQ(hitrate, 16.0 / 20.0);
  EXPECT_DOUBLE_EQ(recall, (8 * 0.5 + 5 * 1.0 + 0.0 + 3 * 1.0) / 20.0);
}

TEST(Metrics, EmptyQuerySetRejected) {
  EXPECT_THROW(compute_metrics({}), Error);
}

// Brute-force reimplementation of evaluate(): full sort instead of a heap,
// truth sets built by direct scan, metrics by their definitions.
EvalReport brute_force_eval(const ParamStore<float>& store, Variant variant, const Dataset& ds,
                            const MultiViewGraph& g, const EvalOptions& opt) {
  const std::uint32_t d = store.get(pname::poi_emb).cols;
  auto [raw, poi_norm] = export_poi_matrix<float>(store, g, opt.full_cap1, opt.full_cap2);

  EncoderOptions eopt;
  eopt.variant = variant;
  eopt.full_trees = true;
  eopt.full_cap1 = opt.full_cap1;
  eopt.full_cap2 = opt.full_cap2;
  GraphEncoder<float> enc(g, eopt);
  enc.tz_offset = ds.options.tz_offset;
  enc.slot_bounds = ds.options.slots;

  double hit_sum = 0.0, recall_sum = 0.0;
  for (const auto& q : ds.test) {
    Tape<float> tape(&store);
    enc.begin_batch(tape, nullptr);
    auto views = enc.user_views(ds.users[q.user].id, q.cell);
    std::vector<RealtimeItem<float>> items;
    if (variant != Variant::NoRealtime) {
      for (const auto& e : ds.realtime(q)) {
        const std::uint32_t poi = g.pois.find(e.poi_id);
        if (poi == kNoIndex) continue;
        std::vector<float> ep(raw.begin() + std::size_t(poi) * d,
                              raw.begin() + std::size_t(poi + 1) * d);
        items.push_back(RealtimeItem<float>{
            tape.constant(ep),
            circular_slot_distance(slot_of(e.ts, ds.options.tz_offset, ds.options.slots), q.slot),
            haversine_bucket(e.lat, e.lon, q.lat, q.lon)});
      }
    }
    auto eq = encode_from_views<float>(tape, views, items, q.slot, enc.cell_row_of(q.cell), d,
                                       variant, 0.2f);
    auto eqv = tape.value(eq.e_q);

    std::vector<std::pair<float, std::uint32_t>> all;
    for (std::uint32_t p = 0; p < g.pois.size(); ++p) {
      float s = 0.0f;
      for (std::uint32_t j = 0; j < d; ++j) s += poi_norm[std::size_t(p) * d + j] * eqv[j];
      all.emplace_back(s, p);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    std::set<std::string> truth;
    truth.insert(q.positive_poi);
    for (const auto& other : ds.test)
      if (other.user == q.user && other.ts > q.ts && other.ts <= q.ts + opt.truth_window)
        truth.insert(other.positive_poi);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(std::size_t(opt.k), all.size()); ++i)
      hits += truth.count(g.pois.id(all[i].second));
    hit_sum += hits > 0 ? 1 : 0;
    recall_sum += double(hits) / double(truth.size());
  }
  EvalReport rep;
  rep.k = opt.k;
  rep.hitrate = hit_sum / double(ds.test.size());
  rep.recall = recall_sum / double(ds.test.size());
  rep.num_queries = ds.test.size();
  return rep;
}

TEST(Evaluate, MatchesBruteForceReimplementation) {
  auto toy = testutil::make_toy_instance(8, 15, 2, 8, 600, 50);
  auto store = init_params<float>(
      ModelDims{8, toy.graph.users.size(), toy.graph.pois.size(), toy.graph.cells.size()}, 601);
  ASSERT_GE(toy.dataset.test.size(), 20u);
  EvalOptions opt;
  opt.k = 5;
  auto engine = evaluate<float>(store, Variant::Full, toy.dataset, toy.graph, opt);
  auto oracle = brute_force_eval(store, Variant::Full, toy.dataset, toy.graph, opt);
  EXPECT_DOUBLE_EQ(engine.hitrate, oracle.hitrate);
  EXPECT_DOUBLE_EQ(engine.recall, oracle.recall);
  EXPECT_EQ(engine.num_queries, oracle.num_queries);
}

TEST(Evaluate, FullCatalogKGivesHitrateOne) {
  auto toy = testutil::make_toy_instance(6, 10, 2, 8, 602, 60);
  // every test positive must be retrievable for this identity to hold
  for (const auto& q : toy.dataset.test) ASSERT_TRUE(toy.graph.pois.contains(q.positive_poi));
  auto store = init_params<float>(
      ModelDims{8, toy.graph.users.size(), toy.graph.pois.size(), toy.graph.cells.size()}, 603);
  EvalOptions opt;
  opt.k = int(toy.graph.pois.size());
  auto rep = evaluate<float>(store, Variant::Full, toy.dataset, toy.graph, opt);
  EXPECT_DOUBLE_EQ(rep.hitrate, 1.0);
}

TEST(Evaluate, RecallMonotoneInK) {
  auto toy = testutil::make_toy_instance(8, 15, 2, 8, 604, 50);
  auto store = init_params<float>(
      ModelDims{8, toy.graph.users.size(), toy.graph.pois.size(), toy.graph.cells.size()}, 605);
  double prev = -1.0;
  for (int k : {1, 2, 5, 10, 15}) {
    EvalOptions opt;
    opt.k = k;
    auto rep = evaluate<float>(store, Variant::Full, toy.dataset, toy.graph, opt);
    ASSERT_GE(rep.recall + 1e-12, prev) << "k=" << k;
    prev = rep.recall;
  }
}

TEST(Evaluate, SubsampleIsDeterministicAndHashed) {
  auto toy = testutil::make_toy_instance(8, 15, 2, 8, 606, 50);
  auto store = init_params<float>(
      ModelDims{8, toy.graph.users.size(), toy.graph.pois.size(), toy.graph.cells.size()}, 607);
  EvalOptions opt;
  opt.k = 5;
  opt.max_queries = 10;
  auto r1 = evaluate<float>(store, Variant::Full, toy.dataset, toy.graph, opt);
  auto r2 = evaluate<float>(store, Variant::NoRealtime, toy.dataset, toy.graph, opt);
  EXPECT_EQ(r1.num_queries, 10u);
  EXPECT_EQ(r1.data_hash, r2.data_hash);  // same subset regardless of variant
}

TEST(TopK, MatchesFullSortIncludingTies) {
  Rng rng(608);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<float> scores(200);
    for (auto& s : scores) s = float(rng.below(40)) / 10.0f;  // plenty of duplicates
    for (std::size_t k : {std::size_t(1), std::size_t(10), std::size_t(200), std::size_t(500)}) {
      auto top = top_k_by_score(scores, k);
      std::vector<Scored> all;
      for (std::uint32_t i = 0; i < scores.size(); ++i) all.push_back({scores[i], i});
      std::sort(all.begin(), all.end(), ranks_before);
      all.resize(std::min(k, all.size()));
      ASSERT_EQ(top, all);
    }
  }
  EXPECT_TRUE(top_k_by_score(std::vector<float>{1.0f, 2.0f}, 0).empty());
}

}  // namespace
}  // namespace stgin
