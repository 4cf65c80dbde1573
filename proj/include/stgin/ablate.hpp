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

#include <array>
#include <vector>

#include "stgin/eval.hpp"
#include "stgin/train.hpp"

namespace stgin {

inline constexpr std::array<Variant, 7> kAblationVariants{
    Variant::Full,         Variant::NoRealtime,  Variant::NoTemporal, Variant::NoSpatial,
    Variant::NoInteraction, Variant::OnlyTemporal, Variant::SumTemporal};

// Trains and evaluates the full model plus the six variants under identical
// seeds and data; one report row per variant, all rows hashing the same
// evaluation set.
inline std::vector<EvalReport> run_ablation_suite(const TrainConfig& base, const Dataset& ds,
                                                  const MultiViewGraph& g, const EvalOptions& eopt,
                                                  std::ostream* progress = nullptr) {
  std::vector<EvalReport> reports;
  for (Variant v : kAblationVariants) {
    TrainConfig cfg = base;
    cfg.variant = v;
    if (progress) *progress << "training " << variant_display_name(v) << "...\n" << std::flush;
    TrainResult tr = train(cfg, ds, g);
    if (progress) *progress << "evaluating " << variant_display_name(v) << "...\n" << std::flush;
    reports.push_back(evaluate<float>(tr.params, v, ds, g, eopt));
  }
  return reports;
}

}  // namespace stgin
