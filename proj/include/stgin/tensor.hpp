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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stgin/errors.hpp"

namespace stgin {

// Dense row-major tensor of rank 1 or 2. cols == 0 marks rank 1.
template <typename Real>
struct Tensor {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<Real> data;

  static Tensor vec(std::uint32_t n) { return Tensor{n, 0, std::vector<Real>(n, Real(0))}; }
  static Tensor mat(std::uint32_t r, std::uint32_t c) {
    return Tensor{r, c, std::vector<Real>(std::size_t(r) * c, Real(0))};
  }

  std::size_t size() const { return data.size(); }
  bool is_vec() const { return cols == 0; }

  Real& at(std::uint32_t i) { return data[i]; }
  Real at(std::uint32_t i) const { return data[i]; }
  Real& at(std::uint32_t i, std::uint32_t j) { return data[std::size_t(i) * cols + j]; }
  Real at(std::uint32_t i, std::uint32_t j) const { return data[std::size_t(i) * cols + j]; }

  std::span<Real> row(std::uint32_t i) {
    const std::uint32_t c = cols == 0 ? rows : cols;
    return cols == 0 ? std::span<Real>(data) : std::span<Real>(data).subspan(std::size_t(i) * c, c);
  }
  std::span<const Real> row(std::uint32_t i) const {
    const std::uint32_t c = cols == 0 ? rows : cols;
    return cols == 0 ? std::span<const Real>(data)
                     : std::span<const Real>(data).subspan(std::size_t(i) * c, c);
  }

  std::string shape_str() const {
    return cols == 0 ? "[" + std::to_string(rows) + "]"
                     : "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }

  bool operator==(const Tensor&) const = default;

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t;
    t.rows = rows;
    t.cols = cols;
    t.data.reserve(data.size());
    for (Real v : data) t.data.push_back(static_cast<Other>(v));
    return t;
  }
};

template <typename Real>
bool all_finite(std::span<const Real> v) {
  for (Real x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace stgin
