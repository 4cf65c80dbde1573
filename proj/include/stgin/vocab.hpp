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
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgin/errors.hpp"

namespace stgin {

inline constexpr std::uint32_t kNoIndex = std::numeric_limits<std::uint32_t>::max();

// Bidirectional id <-> dense index map. Construction sorts the ids so the
// same id set always yields the same indexing, and so that index order can
// stand in for lexicographic id order (top-K tie-breaking relies on this).
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    index_.reserve(ids_.size());
    for (std::uint32_t i = 0; i < ids_.size(); ++i) index_[ids_[i]] = i;
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(ids_.size()); }
  const std::string& id(std::uint32_t idx) const { return ids_.at(idx); }
  const std::vector<std::string>& ids() const { return ids_; }

  std::uint32_t find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? kNoIndex : it->second;
  }
  std::uint32_t at(const std::string& id) const {
    auto idx = find(id);
    if (idx == kNoIndex) throw VocabError("unknown id: " + id);
    return idx;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  bool operator==(const Vocab& o) const { return ids_ == o.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace stgin
