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

#include <cstdint>
#include <span>
#include <vector>

#include "stgin/events.hpp"

namespace stgin {

inline constexpr std::int64_t kDefaultSessionGap = 1800;  // 30 min

// Splits one user's time-sorted events into sessions: a new session starts
// whenever the gap to the previous event exceeds `gap` seconds. Returns
// [begin, end) index ranges into the input.
template <typename T>
std::vector<std::pair<std::size_t, std::size_t>> session_ranges(std::span<const T> events,
                                                                std::int64_t gap,
                                                                std::int64_t (*ts_of)(const T&)) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (events.empty()) return out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (ts_of(events[i]) - ts_of(events[i - 1]) > gap) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  out.emplace_back(begin, events.size());
  return out;
}

inline std::vector<std::vector<InteractionEvent>> split_sessions(
    const std::vector<InteractionEvent>& events, std::int64_t gap = kDefaultSessionGap) {
  auto ranges = session_ranges<InteractionEvent>(
      events, gap, [](const InteractionEvent& e) { return e.ts; });
  std::vector<std::vector<InteractionEvent>> out;
  out.reserve(ranges.size());
  for (auto [b, e] : ranges)
    out.emplace_back(events.begin() + static_cast<std::ptrdiff_t>(b),
                     events.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

}  // namespace stgin
