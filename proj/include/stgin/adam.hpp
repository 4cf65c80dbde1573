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
#include <vector>

#include "stgin/params.hpp"
#include "stgin/tape.hpp"
#include "stgin/tensor.hpp"

namespace stgin {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamStore, moments kept dense per parameter.
template <typename Real>
class Adam {
 public:
  Adam(const ParamStore<Real>& store, AdamConfig cfg = {}) : cfg_(cfg) {
    m_.reserve(store.count());
    v_.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
      const auto& t = store.value(static_cast<int>(i));
      m_.emplace_back(t.size(), Real(0));
      v_.emplace_back(t.size(), Real(0));
    }
  }

  std::int64_t step_count() const { return t_; }

  // One update from the gradients accumulated on `tape`. Parameters that
  // never appeared on the tape are treated as zero-gradient. Throws
  // NumericError on a non-finite gradient.
  void step(ParamStore<Real>& store, const Tape<Real>& tape) {
    ++t_;
    const Real bc1 = Real(1) - static_cast<Real>(std::pow(cfg_.beta1, double(t_)));
    const Real bc2 = Real(1) - static_cast<Real>(std::pow(cfg_.beta2, double(t_)));
    const Real b1 = static_cast<Real>(cfg_.beta1), b2 = static_cast<Real>(cfg_.beta2);
    const Real lr = static_cast<Real>(cfg_.lr), eps = static_cast<Real>(cfg_.eps);
    for (std::size_t p = 0; p < store.count(); ++p) {
      auto& val = store.value(static_cast<int>(p)).data;
      auto& m = m_[p];
      auto& v = v_[p];
      const Tensor<Real>* g = tape.param_grad(static_cast<int>(p));
      for (std::size_t i = 0; i < val.size(); ++i) {
        const Real gi = g ? g->data[i] : Real(0);
        if (!std::isfinite(gi))
          throw NumericError("non-finite gradient in parameter " +
                             store.name(static_cast<int>(p)));
        m[i] = b1 * m[i] + (Real(1) - b1) * gi;
        v[i] = b2 * v[i] + (Real(1) - b2) * gi * gi;
        const Real mhat = m[i] / bc1;
        const Real vhat = v[i] / bc2;
        val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<Real>> m_, v_;
};

}  // namespace stgin
