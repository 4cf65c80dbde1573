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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stgin/dataset.hpp"
#include "stgin/events.hpp"
#include "stgin/rng.hpp"
#include "stgin/sessions.hpp"
#include "stgin/timeslot.hpp"

namespace stgin {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(TimeSlot, DecidedBoundaries) {
  // ts chosen so local hour is exact with tz 0
  auto at_hour = [](int h, int min) { return std::int64_t(86400) * 1000 + h * 3600 + min * 60; };
  EXPECT_EQ(slot_of(at_hour(8, 30), 0), 0);   // morning
  EXPECT_EQ(slot_of(at_hour(11, 0), 0), 1);   // noon starts at 11
  EXPECT_EQ(slot_of(at_hour(16, 59), 0), 1);
  EXPECT_EQ(slot_of(at_hour(17, 0), 0), 2);   // dinnertime
  EXPECT_EQ(slot_of(at_hour(21, 0), 0), 3);   // night
  EXPECT_EQ(slot_of(at_hour(4, 59), 0), 3);   // wraps past midnight
  EXPECT_EQ(slot_of(at_hour(5, 0), 0), 0);
}

TEST(TimeSlot, TimezoneOffsetShiftsLocalHour) {
  const std::int64_t ts = 86400 * 50;  // 00:00 utc
  EXPECT_EQ(slot_of(ts, 0), 3);
  EXPECT_EQ(slot_of(ts, 8 * 3600), 0);  // 08:00 local
  EXPECT_EQ(slot_of(ts, -5 * 3600), 2); // 19:00 local
}

TEST(TimeSlot, PreimagesPartitionTheDay) {
  // every minute of a day lands in exactly one slot, and all four appear
  int seen[4] = {0, 0, 0, 0};
  for (int m = 0; m < 24 * 60; ++m) {
    const int s = slot_of(86400 * 7 + m * 60, 0);
    ASSERT_GE(s, 0);
    ASSERT_LT(s, 4);
    ++seen[s];
  }
  EXPECT_EQ(seen[0], 6 * 60);
  EXPECT_EQ(seen[1], 6 * 60);
  EXPECT_EQ(seen[2], 4 * 60);
  EXPECT_EQ(seen[3], 8 * 60);
}

TEST(TimeSlot, CircularDistance) {
  EXPECT_EQ(circular_slot_distance(0, 0), 0);
  EXPECT_EQ(circular_slot_distance(0, 1), 1);
  EXPECT_EQ(circular_slot_distance(0, 2), 2);
  EXPECT_EQ(circular_slot_distance(0, 3), 1);  // night wraps to morning
  EXPECT_EQ(circular_slot_distance(3, 0), 1);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      ASSERT_EQ(circular_slot_distance(a, b), circular_slot_distance(b, a));
      ASSERT_LE(circular_slot_distance(a, b), 2);
    }
}

InteractionEvent ev(const std::string& u, const std::string& p, std::int64_t ts,
                    double lat = 31.23, double lon = 121.47) {
  return {u, p, ts, lat, lon};
}

TEST(Sessions, GapSplitsSequence) {
  std::vector<InteractionEvent> es{ev("u", "a", 0 + 1), ev("u", "b", 600 + 1),
                                   ev("u", "c", 3000 + 1)};
  auto sessions = split_sessions(es, 1800);
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].size(), 2u);
  EXPECT_EQ(sessions[1].size(), 1u);
  EXPECT_EQ(sessions[1][0].poi_id, "c");
}

TEST(Sessions, SingletonAndEmpty) {
  std::vector<InteractionEvent> one{ev("u", "a", 5)};
  auto s1 = split_sessions(one, 1800);
  ASSERT_EQ(s1.size(), 1u);
  EXPECT_EQ(s1[0].size(), 1u);
  EXPECT_TRUE(split_sessions({}, 1800).empty());
}

TEST(Sessions, SplittingIsIdempotent) {
  Rng rng(7);
  std::vector<InteractionEvent> es;
  std::int64_t ts = 1;
  for (int i = 0; i < 200; ++i) {
    ts += rng.below(4000);
    es.push_back(ev("u", "p" + std::to_string(i), ts));
  }
  auto first = split_sessions(es, 1800);
  std::vector<InteractionEvent> flattened;
  for (const auto& s : first) flattened.insert(flattened.end(), s.begin(), s.end());
  EXPECT_EQ(split_sessions(flattened, 1800), first);
}

TEST(ParseEventLog, JsonlWellFormedLine) {
  const std::string path = temp_path("stgin_events_ok.jsonl");
  std::ofstream(path) << R"({"user_id":"u1","poi_id":"p1","ts":1660000000,"lat":31.23,"lon":121.47})"
                      << "\n";
  ParseReport rep;
  auto events = parse_event_log(path, LogFormat::Jsonl, &rep);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].user_id, "u1");
  EXPECT_EQ(events[0].poi_id, "p1");
  EXPECT_EQ(events[0].ts, 1660000000);
  EXPECT_EQ(rep.accepted, 1u);
  EXPECT_TRUE(rep.rejected.empty());
}

TEST(ParseEventLog, OutOfRangeLatRejectedWithLineNumber) {
  const std::string path = temp_path("stgin_events_badlat.jsonl");
  std::ofstream(path) << R"({"user_id":"u1","poi_id":"p1","ts":1,"lat":31.0,"lon":121.0})" << "\n"
                      << R"({"user_id":"u1","poi_id":"p2","ts":2,"lat":95.0,"lon":121.0})" << "\n";
  ParseReport rep;
  auto events = parse_event_log(path, LogFormat::Jsonl, &rep);
  EXPECT_EQ(events.size(), 1u);
  ASSERT_EQ(rep.rejected.size(), 1u);
  EXPECT_EQ(rep.rejected[0].first, 2u);
}

TEST(ParseEventLog, CsvAndSorting) {
  const std::string path = temp_path("stgin_events.csv");
  std::ofstream(path) << "user_id,poi_id,ts,lat,lon\n"
                      << "u2,p9,100,31.0,121.0\n"
                      << "u1,p2,200,31.0,121.0\n"
                      << "u1,p1,100,31.0,121.0\n"
                      << "u1,bad,notanumber,31.0,121.0\n";
  ParseReport rep;
  auto events = parse_event_log(path, LogFormat::Csv, &rep);
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0].user_id, "u1");
  EXPECT_EQ(events[0].poi_id, "p1");
  EXPECT_EQ(events[1].poi_id, "p2");
  EXPECT_EQ(events[2].user_id, "u2");
  ASSERT_EQ(rep.rejected.size(), 1u);
  EXPECT_EQ(rep.rejected[0].first, 5u);
}

TEST(ParseEventLog, UnreadableFileIsFatal) {
  EXPECT_THROW(parse_event_log("/nonexistent/file.jsonl", LogFormat::Jsonl), IoError);
}

TEST(ParseEventLog, RoundTripThroughWriter) {
  std::vector<InteractionEvent> events{ev("u1", "a", 100), ev("u1", "b", 200),
                                       ev("u2", "c", 50, -10.5, 30.25)};
  for (auto fmt : {LogFormat::Jsonl, LogFormat::Csv}) {
    const std::string path = temp_path("stgin_events_rt");
    write_event_log(path, events, fmt);
    auto back = parse_event_log(path, fmt);
    EXPECT_EQ(back, events);
  }
}

TEST(BuildDataset, WindowArithmetic) {
  // clicks at 100 and 200, window 50: sample at 200 has realtime empty
  std::vector<InteractionEvent> events{ev("u", "a", 100), ev("u", "b", 200)};
  DatasetOptions opt;
  opt.realtime_window = 50;
  opt.split_ts = 1000;
  auto ds = build_dataset(events, opt);
  ASSERT_EQ(ds.train.size(), 2u);
  const auto& q = ds.train[1];
  EXPECT_EQ(q.positive_poi, "b");
  EXPECT_EQ(ds.realtime(q).size(), 0u);
  ASSERT_EQ(ds.history(q).size(), 1u);
  EXPECT_EQ(ds.history(q)[0].ts, 100);

  // clicks at 100 and 120, window 50: sample at 120 has realtime=[100]
  std::vector<InteractionEvent> events2{ev("u", "a", 100), ev("u", "b", 120)};
  auto ds2 = build_dataset(events2, opt);
  const auto& q2 = ds2.train[1];
  ASSERT_EQ(ds2.realtime(q2).size(), 1u);
  EXPECT_EQ(ds2.realtime(q2)[0].ts, 100);
  EXPECT_EQ(ds2.history(q2).size(), 0u);
}

TEST(BuildDataset, RealtimeCappedAtM) {
  std::vector<InteractionEvent> events;
  for (int i = 0; i < 20; ++i) events.push_back(ev("u", "p" + std::to_string(i), 1000 + i));
  DatasetOptions opt;
  opt.realtime_window = 10000;
  opt.max_realtime = 5;
  opt.split_ts = 1 << 30;
  auto ds = build_dataset(events, opt);
  const auto& last = ds.train.back();
  ASSERT_EQ(ds.realtime(last).size(), 5u);
  EXPECT_EQ(ds.realtime(last).back().ts, 1018);  // the 5 most recent
  EXPECT_EQ(ds.realtime(last).front().ts, 1014);
}

TEST(BuildDataset, SplitFractionOnSyntheticLog) {
  // 30 days of one click per day for 40 users; split at day 24
  std::vector<InteractionEvent> events;
  const std::int64_t day = 86400;
  for (int u = 0; u < 40; ++u)
    for (int d = 0; d < 30; ++d)
      events.push_back(ev("u" + std::to_string(u), "p" + std::to_string(d), d * day + u + 1));
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.ts < b.ts;
  });
  DatasetOptions opt;
  opt.split_ts = 24 * day;
  auto ds = build_dataset(events, opt);
  EXPECT_EQ(ds.train.size(), 40u * 24);
  EXPECT_EQ(ds.test.size(), 40u * 6);
}

TEST(BuildDataset, HistoryRealtimePartitionInvariant) {
  Rng rng(3);
  std::vector<InteractionEvent> events;
  for (int u = 0; u < 10; ++u) {
    std::int64_t ts = 1;
    for (int i = 0; i < 60; ++i) {
      ts += 1 + rng.below(40000);
      events.push_back(ev("u" + std::to_string(u), "p" + std::to_string(rng.below(30)), ts));
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.ts < b.ts;
  });
  DatasetOptions opt;
  opt.realtime_window = 86400;
  opt.split_ts = 1 << 30;
  auto ds = build_dataset(events, opt);
  ASSERT_FALSE(ds.train.empty());
  for (const auto& q : ds.train) {
    auto hist = ds.history(q);
    auto rt = ds.realtime(q);
    if (!hist.empty()) ASSERT_LT(hist.back().ts, q.ts - opt.realtime_window);
    if (!rt.empty()) {
      ASSERT_GE(rt.front().ts, q.ts - opt.realtime_window);
      ASSERT_LT(rt.back().ts, q.ts);
    }
  }
}

TEST(BuildDataset, JsonlRoundTrip) {
  Rng rng(11);
  std::vector<InteractionEvent> events;
  for (int u = 0; u < 6; ++u) {
    std::int64_t ts = 1;
    for (int i = 0; i < 25; ++i) {
      ts += 1 + rng.below(50000);
      events.push_back(ev("user" + std::to_string(u), "poi" + std::to_string(rng.below(12)), ts,
                          31.0 + 0.01 * double(rng.below(100)), 121.0 + 0.01 * double(rng.below(100))));
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.ts < b.ts;
  });
  DatasetOptions opt;
  opt.split_ts = events[events.size() / 2].ts;
  auto ds = build_dataset(events, opt);
  const std::string train_path = temp_path("stgin_train.jsonl");
  const std::string test_path = temp_path("stgin_test.jsonl");
  write_samples_jsonl(ds, ds.train, train_path);
  write_samples_jsonl(ds, ds.test, test_path);
  auto back = read_samples_jsonl(train_path, test_path, opt);

  ASSERT_EQ(back.users.size(), ds.users.size());
  for (std::size_t i = 0; i < ds.users.size(); ++i) {
    EXPECT_EQ(back.users[i].id, ds.users[i].id);
    EXPECT_EQ(back.users[i].events, ds.users[i].events);
  }
  ASSERT_EQ(back.train.size(), ds.train.size());
  ASSERT_EQ(back.test.size(), ds.test.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    const auto& a = ds.train[i];
    const auto& b = back.train[i];
    EXPECT_EQ(a.ts, b.ts);
    EXPECT_EQ(a.cell, b.cell);
    EXPECT_EQ(a.slot, b.slot);
    EXPECT_EQ(a.positive_poi, b.positive_poi);
    EXPECT_EQ(ds.history(a).size(), back.history(b).size());
    EXPECT_EQ(ds.realtime(a).size(), back.realtime(b).size());
  }
}

}  // namespace
}  // namespace stgin
