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
#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgin/errors.hpp"
#include "stgin/geo.hpp"

namespace stgin {

// One user click on a POI. The atomic input record.
struct InteractionEvent {
  std::string user_id;
  std::string poi_id;
  std::int64_t ts = 0;  // unix seconds
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const InteractionEvent&) const = default;
};

enum class LogFormat { Jsonl, Csv };

inline LogFormat parse_log_format(const std::string& s) {
  if (s == "jsonl") return LogFormat::Jsonl;
  if (s == "csv") return LogFormat::Csv;
  throw ParseError("unknown event log format: " + s + " (expected jsonl or csv)");
}

struct ParseReport {
  std::size_t accepted = 0;
  // (1-based line number, reason)
  std::vector<std::pair<std::size_t, std::string>> rejected;
};

namespace detail {

inline const char* validate_event(const InteractionEvent& e) {
  if (e.user_id.empty()) return "empty user_id";
  if (e.poi_id.empty()) return "empty poi_id";
  if (e.ts <= 0) return "non-positive ts";
  if (!lat_in_bounds(e.lat)) return "lat out of range";
  if (!lon_in_bounds(e.lon)) return "lon out of range";
  return nullptr;
}

inline bool parse_jsonl_line(const std::string& line, InteractionEvent& e, std::string& err) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    err = "invalid json";
    return false;
  }
  try {
    e.user_id = j.at("user_id").get<std::string>();
    e.poi_id = j.at("poi_id").get<std::string>();
    e.ts = j.at("ts").get<std::int64_t>();
    e.lat = j.at("lat").get<double>();
    e.lon = j.at("lon").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    err = ex.what();
    return false;
  }
  return true;
}

inline bool parse_csv_line(const std::string& line, InteractionEvent& e, std::string& err) {
  std::array<std::string, 5> field;
  std::size_t n = 0, start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      if (n >= 5) {
        err = "too many fields";
        return false;
      }
      field[n++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n != 5) {
    err = "expected 5 fields, got " + std::to_string(n);
    return false;
  }
  try {
    e.user_id = field[0];
    e.poi_id = field[1];
    e.ts = std::stoll(field[2]);
    e.lat = std::stod(field[3]);
    e.lon = std::stod(field[4]);
  } catch (const std::exception&) {
    err = "unparsable numeric field";
    return false;
  }
  return true;
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "user_id,poi_id,ts,lat,lon";

// Parses a click log. Malformed and out-of-range records are counted and
// reported with their line numbers; an unreadable file is fatal. Events come
// back sorted by (user_id, ts).
inline std::vector<InteractionEvent> parse_event_log(const std::string& path, LogFormat fmt,
                                                     ParseReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log: " + path);
  std::vector<InteractionEvent> events;
  ParseReport local;
  ParseReport& rep = report ? *report : local;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (fmt == LogFormat::Csv && !saw_header) {
      saw_header = true;
      if (line == kCsvHeader) continue;  // header row is optional
    }
    InteractionEvent e;
    std::string err;
    bool ok = fmt == LogFormat::Jsonl ? detail::parse_jsonl_line(line, e, err)
                                      : detail::parse_csv_line(line, e, err);
    if (ok) {
      if (const char* why = detail::validate_event(e)) {
        ok = false;
        err = why;
      }
    }
    if (!ok) {
      rep.rejected.emplace_back(lineno, err);
      continue;
    }
    events.push_back(std::move(e));
    ++rep.accepted;
  }
  if (in.bad()) throw IoError("read failed: " + path);
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.ts < b.ts;
  });
  return events;
}

inline void write_event_log(const std::string& path, const std::vector<InteractionEvent>& events,
                            LogFormat fmt = LogFormat::Jsonl) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  if (fmt == LogFormat::Csv) out << kCsvHeader << "\n";
  for (const auto& e : events) {
    if (fmt == LogFormat::Jsonl) {
      nlohmann::json j{{"user_id", e.user_id}, {"poi_id", e.poi_id}, {"ts", e.ts},
                       {"lat", e.lat},         {"lon", e.lon}};
      out << j.dump() << "\n";
    } else {
      std::ostringstream s;
      s.precision(10);
      s << e.user_id << ',' << e.poi_id << ',' << e.ts << ',' << e.lat << ',' << e.lon;
      out << s.str() << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace stgin
