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

#include <atomic>
#include <filesystem>
#include <thread>

#include "stgin/serve.hpp"
#include "stgin/snapshot.hpp"
#include "stgin/train.hpp"
#include "test_util.hpp"

namespace stgin {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Small trained model exported to a snapshot; the base of most tests here.
struct Fixture {
  testutil::ToyInstance toy;
  TrainResult trained;
  Snapshot snap;
  TrainConfig cfg;
};

Fixture make_fixture(Variant variant = Variant::Full, std::uint64_t seed = 700) {
  Fixture f;
  f.toy = testutil::make_toy_instance(8, 20, 2, 8, seed, 50);
  f.cfg.dim = 8;
  f.cfg.batch = 8;
  f.cfg.negatives = 3;
  f.cfg.max_steps = 30;
  f.cfg.epochs = 10;
  f.cfg.seed = seed;
  f.cfg.variant = variant;
  f.trained = train(f.cfg, f.toy.dataset, f.toy.graph);
  ExportOptions eopt;
  eopt.build_ts = 12345;
  f.snap = export_snapshot(f.trained.params, f.trained.manifest, f.toy.graph, eopt, f.cfg);
  return f;
}

TEST(SessionStore, RingEvictsOldest) {
  SessionStore store(3);
  for (int i = 0; i < 5; ++i) store.record("u", "p" + std::to_string(i), 100 + i, 31.0, 121.0);
  auto recent = store.recent("u", 200, 1000, 10);
  ASSERT_EQ(recent.size(), 3u);
  EXPECT_EQ(recent[0].poi_id, "p2");
  EXPECT_EQ(recent[2].poi_id, "p4");
}

TEST(SessionStore, OutOfOrderInsertsKeptSorted) {
  SessionStore store(10);
  store.record("u", "late", 500, 31.0, 121.0);
  store.record("u", "early", 100, 31.0, 121.0);
  store.record("u", "mid", 300, 31.0, 121.0);
  auto recent = store.recent("u", 1000, 10000, 10);
  ASSERT_EQ(recent.size(), 3u);
  EXPECT_EQ(recent[0].poi_id, "early");
  EXPECT_EQ(recent[1].poi_id, "mid");
  EXPECT_EQ(recent[2].poi_id, "late");
}

TEST(SessionStore, WindowPrunedOnRead) {
  SessionStore store(10);
  store.record("u", "old", 100, 31.0, 121.0);
  store.record("u", "fresh", 900, 31.0, 121.0);
  auto recent = store.recent("u", 1000, 500, 10);
  ASSERT_EQ(recent.size(), 1u);
  EXPECT_EQ(recent[0].poi_id, "fresh");
  // the query instant itself is excluded: realtime is [now - w, now)
  store.record("u", "now", 1000, 31.0, 121.0);
  EXPECT_EQ(store.recent("u", 1000, 500, 10).size(), 1u);
}

TEST(Snapshot, BinaryRoundTripIsByteExact) {
  auto f = make_fixture();
  const std::string p1 = temp_path("stgin_snap1.bin");
  const std::string p2 = temp_path("stgin_snap2.bin");
  save_snapshot(f.snap, p1);
  Snapshot back = load_snapshot(p1);
  save_snapshot(back, p2);
  EXPECT_EQ(read_file(p1), read_file(p2));
  EXPECT_EQ(back.pois, f.snap.pois);
  EXPECT_EQ(back.poi_vecs, f.snap.poi_vecs);
  EXPECT_EQ(back.user_views, f.snap.user_views);
  EXPECT_EQ(back.build_ts, 12345);
}

TEST(Snapshot, CorruptAndTruncatedRejected) {
  auto f = make_fixture();
  const std::string path = temp_path("stgin_snap_corrupt.bin");
  save_snapshot(f.snap, path);
  std::string bytes = read_file(path);
  bytes[bytes.size() / 2] ^= 0x10;
  write_file(path, bytes);
  EXPECT_THROW(load_snapshot(path), ChecksumError);
  bytes.resize(bytes.size() / 2);
  write_file(path, bytes);
  EXPECT_THROW(load_snapshot(path), ChecksumError);
}

TEST(Snapshot, EmptySnapshotRejectedWithMessage) {
  Snapshot empty;
  empty.dim = 8;
  const std::string path = temp_path("stgin_snap_empty.bin");
  save_snapshot(empty, path);
  try {
    load_snapshot(path);
    FAIL() << "expected rejection";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no POI vectors"), std::string::npos);
  }
}

TEST(Snapshot, EveryCatalogPoiExportedOnce) {
  auto f = make_fixture();
  EXPECT_EQ(f.snap.pois.size(), f.toy.graph.pois.size());
  EXPECT_EQ(f.snap.poi_vecs.size(), std::size_t(f.snap.pois.size()) * f.snap.dim);
}

TEST(Snapshot, TsvAndBinaryDecodeIdentically) {
  auto f = make_fixture();
  const std::string poi_tsv = temp_path("stgin_poi.tsv");
  const std::string views_tsv = temp_path("stgin_views.tsv");
  write_snapshot_tsv(f.snap, poi_tsv, views_tsv);
  auto rows = read_tsv_vectors(poi_tsv);
  ASSERT_EQ(rows.size(), f.snap.pois.size());
  for (const auto& [key, vals] : rows) {
    const std::uint32_t p = f.snap.pois.at(key);
    auto bin = f.snap.poi_vector(p);
    ASSERT_EQ(vals.size(), bin.size());
    for (std::size_t j = 0; j < vals.size(); ++j) ASSERT_EQ(vals[j], bin[j]) << key;
  }
  auto view_rows = read_tsv_vectors(views_tsv);
  ASSERT_EQ(view_rows.size(), f.snap.user_views.size());
  for (const auto& [key, vals] : view_rows) {
    const auto bar = key.find('|');
    const std::uint32_t u = f.snap.users.at(key.substr(0, bar));
    const ViewKey view = ViewKey::parse(key.substr(bar + 1));
    const auto* bin = f.snap.user_view(u, view);
    ASSERT_NE(bin, nullptr) << key;
    ASSERT_EQ(vals, *bin) << key;
  }
}

TEST(Snapshot, ExportedPoiVectorEqualsTrainingPathVector) {
  auto f = make_fixture();
  // training-path computation with the same deterministic trees
  EncoderOptions opt;
  opt.full_trees = true;
  GraphEncoder<float> enc(f.toy.graph, opt);
  Tape<float> tape(&f.trained.params);
  for (std::uint32_t p = 0; p < f.toy.graph.pois.size(); ++p) {
    tape.reset(&f.trained.params);
    enc.begin_batch(tape, nullptr);
    auto v = tape.value(enc.poi_vector(p));
    auto exported = f.snap.poi_vector(p);
    for (std::uint32_t j = 0; j < f.snap.dim; ++j) ASSERT_EQ(exported[j], v[j]) << p;
  }
}

TEST(ServeQuery, MatchesExhaustiveOracle) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  const auto& sample = f.toy.dataset.test.front();
  const std::string user = f.toy.dataset.users[sample.user].id;
  for (int k : {1, 5, int(f.snap.pois.size()), int(f.snap.pois.size()) + 50}) {
    auto res = engine.query(user, sample.lat, sample.lon, sample.ts, k);
    auto eq = engine.encode(user, sample.lat, sample.lon, sample.ts);
    std::vector<std::pair<float, std::string>> all;
    for (std::uint32_t p = 0; p < f.snap.pois.size(); ++p) {
      float s = 0.0f;
      auto row = f.snap.poi_vector_norm(p);
      for (std::uint32_t j = 0; j < f.snap.dim; ++j) s += row[j] * eq[j];
      all.emplace_back(s, f.snap.pois.id(p));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    ASSERT_EQ(res.items.size(), std::min<std::size_t>(std::size_t(k), all.size()));
    for (std::size_t i = 0; i < res.items.size(); ++i) {
      ASSERT_EQ(res.items[i].first, all[i].second) << "k=" << k << " i=" << i;
      ASSERT_EQ(res.items[i].second, all[i].first);
    }
  }
}

TEST(ServeQuery, ZeroKGivesEmptyList) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  auto res = engine.query("u0", 30.0, 120.0, 1700200000, 0);
  EXPECT_TRUE(res.items.empty());
}

TEST(ServeQuery, ColdStartUnknownUserIsWellFormed) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  auto res = engine.query("stranger", 30.0, 120.0, 1700200000, 5);
  EXPECT_EQ(res.items.size(), 5u);
  // encoding is driven by the context term only, and is still unit length
  auto eq = engine.encode("stranger", 30.0, 120.0, 1700200000);
  double norm = 0;
  for (float v : eq) norm += double(v) * double(v);
  EXPECT_NEAR(norm, 1.0, 1e-5);
}

TEST(ServeQuery, RecordClickChangesEncoding) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  const auto& sample = f.toy.dataset.test.front();
  const std::string user = f.toy.dataset.users[sample.user].id;
  auto before = engine.encode(user, sample.lat, sample.lon, sample.ts);
  engine.record_click(user, f.snap.pois.id(0), sample.ts - 600, sample.lat, sample.lon);
  auto after = engine.encode(user, sample.lat, sample.lon, sample.ts);
  double delta = 0;
  for (std::size_t j = 0; j < before.size(); ++j)
    delta += double(after[j] - before[j]) * double(after[j] - before[j]);
  EXPECT_GT(std::sqrt(delta), 0.0);
}

TEST(ServeQuery, RealtimeAblatedSnapshotIgnoresClicks) {
  auto f = make_fixture(Variant::NoRealtime, 701);
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  const auto& sample = f.toy.dataset.test.front();
  const std::string user = f.toy.dataset.users[sample.user].id;
  auto before = engine.encode(user, sample.lat, sample.lon, sample.ts);
  engine.record_click(user, f.snap.pois.id(0), sample.ts - 600, sample.lat, sample.lon);
  auto after = engine.encode(user, sample.lat, sample.lon, sample.ts);
  EXPECT_EQ(before, after);
}

TEST(ServeSwap, ValidSwapActivatesCorruptKeepsServing) {
  auto f1 = make_fixture(Variant::Full, 702);
  auto f2 = make_fixture(Variant::Full, 703);
  const std::string good = temp_path("stgin_swap_good.bin");
  save_snapshot(f2.snap, good);
  ServeEngine engine(std::make_shared<Snapshot>(f1.snap));
  const Snapshot* first = engine.active().get();

  std::string err;
  ASSERT_TRUE(engine.swap_from_file(good, &err)) << err;
  EXPECT_NE(engine.active().get(), first);

  const std::string bad = temp_path("stgin_swap_bad.bin");
  std::string bytes = read_file(good);
  bytes[bytes.size() / 3] ^= 0x7f;
  write_file(bad, bytes);
  const Snapshot* current = engine.active().get();
  EXPECT_FALSE(engine.swap_from_file(bad, &err));
  EXPECT_EQ(engine.active().get(), current);
  auto res = engine.query("u0", 30.0, 120.0, 1700200000, 3);
  EXPECT_EQ(res.items.size(), 3u);
}

TEST(ServeSwap, ConcurrentQueriesNeverSeeAMix) {
  auto f1 = make_fixture(Variant::Full, 704);
  auto f2 = make_fixture(Variant::Full, 705);
  auto snap1 = std::make_shared<Snapshot>(f1.snap);
  auto snap2 = std::make_shared<Snapshot>(f2.snap);
  ServeEngine engine(snap1);
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([&] {
      while (!stop.load()) {
        auto res = engine.query("u1", 30.0, 120.0, 1700200000, 2);
        if (res.served_by != snap1.get() && res.served_by != snap2.get()) bad.fetch_add(1);
        if (res.items.size() != 2) bad.fetch_add(1);
      }
    });
  for (int i = 0; i < 200; ++i) engine.swap(i % 2 ? snap1 : snap2);
  stop.store(true);
  for (auto& t : workers) t.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Protocol, ClickQuerySwapAndErrors) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  auto click = nlohmann::json::parse(handle_request_line(
      engine, R"({"op":"click","user":"u1","poi":"p000001","ts":1700200000,"lat":30.0,"lon":120.0})"));
  EXPECT_TRUE(click.at("ok").get<bool>());

  auto query = nlohmann::json::parse(handle_request_line(
      engine, R"({"op":"query","user":"u1","lat":30.0,"lon":120.0,"ts":1700200300,"k":4})"));
  ASSERT_TRUE(query.at("ok").get<bool>());
  EXPECT_EQ(query.at("results").size(), 4u);
  EXPECT_TRUE(query.contains("latency_us"));

  auto bad_json = nlohmann::json::parse(handle_request_line(engine, "{nope"));
  EXPECT_FALSE(bad_json.at("ok").get<bool>());
  auto bad_op = nlohmann::json::parse(handle_request_line(engine, R"({"op":"dance"})"));
  EXPECT_FALSE(bad_op.at("ok").get<bool>());
  EXPECT_NE(bad_op.at("error").get<std::string>().find("dance"), std::string::npos);

  auto bad_swap = nlohmann::json::parse(
      handle_request_line(engine, R"({"op":"swap","path":"/nonexistent/snap.bin"})"));
  EXPECT_FALSE(bad_swap.at("ok").get<bool>());
}

TEST(Protocol, StdioLoop) {
  auto f = make_fixture();
  ServeEngine engine(std::make_shared<Snapshot>(f.snap));
  std::istringstream in(
      R"({"op":"click","user":"u1","poi":"p000001","ts":1700200000,"lat":30.0,"lon":120.0})"
      "\n"
      R"({"op":"query","user":"u1","lat":30.0,"lon":120.0,"ts":1700200300,"k":2})"
      "\n");
  std::ostringstream out;
  serve_stdio(engine, in, out);
  std::istringstream lines(out.str());
  std::string l1, l2;
  std::getline(lines, l1);
  std::getline(lines, l2);
  EXPECT_TRUE(nlohmann::json::parse(l1).at("ok").get<bool>());
  EXPECT_EQ(nlohmann::json::parse(l2).at("results").size(), 2u);
}

}  // namespace
}  // namespace stgin
