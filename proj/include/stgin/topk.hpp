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
#include <span>
#include <vector>

namespace stgin {

struct Scored {
  float score = 0.0f;
  std::uint32_t index = 0;
  bool operator==(const Scored&) const = default;
};

// true when a ranks strictly ahead of b: higher score first, ties broken by
// ascending index (index order matches lexicographic id order, see Vocab).
inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

// Exact top-k by (score desc, index asc) with a bounded heap; one pass over
// the scores, O(n log k).
inline std::vector<Scored> top_k_by_score(std::span<const float> scores, std::size_t k) {
  std::vector<Scored> heap;  // max-heap on "ranks_before": top() is the worst kept
  if (k == 0) return heap;
  heap.reserve(std::min(k, scores.size()));
  auto worse = [](const Scored& a, const Scored& b) { return ranks_before(a, b); };
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    const Scored cand{scores[i], i};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (ranks_before(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
  std::sort(heap.begin(), heap.end(), ranks_before);
  return heap;
}

}  // namespace stgin
