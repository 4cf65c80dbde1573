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

namespace stgin {

inline constexpr int kNumSlots = 4;  // morning, noon, dinnertime, night
inline constexpr int kNumSlotDistances = 3;  // circular distance on a 4-slot day

// Local-hour boundaries of the four slots. Defaults: morning 05-11,
// noon 11-17, dinnertime 17-21, night 21-05.
struct SlotBoundaries {
  int morning_start = 5;
  int noon_start = 11;
  int dinner_start = 17;
  int night_start = 21;
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Slot index of a unix timestamp under a fixed per-dataset utc offset.
inline int slot_of(std::int64_t ts, std::int64_t tz_offset_s, const SlotBoundaries& b = {}) {
  std::int64_t hour = floor_div(ts + tz_offset_s, 3600) % 24;
  if (hour < 0) hour += 24;
  const int h = static_cast<int>(hour);
  if (h >= b.morning_start && h < b.noon_start) return 0;
  if (h >= b.noon_start && h < b.dinner_start) return 1;
  if (h >= b.dinner_start && h < b.night_start) return 2;
  return 3;
}

// |a-b| on the 4-slot cycle; values in {0,1,2}.
inline int circular_slot_distance(int a, int b) {
  int d = a - b;
  if (d < 0) d = -d;
  return d > kNumSlots - d ? kNumSlots - d : d;
}

}  // namespace stgin
