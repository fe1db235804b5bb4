// Copyright 2026 The lungseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>

#include <json.hpp>

#include "lungseg/click_engine.hpp"
#include "lungseg/image.hpp"
#include "lungseg/region_ops.hpp"

namespace lungseg {

// How decide() picks between a false-negative and a false-positive target.
enum class PolarityRule {
  larger_error_area,     // larger region wins, false negatives on ties
  false_negative_first,  // always fix misses first
};

struct ExpertConfig {
  double d0 = 60.0;
  PolarityRule rule = PolarityRule::larger_error_area;
  std::uint64_t rng_seed = 0;
  Connectivity connectivity = Connectivity::eight;
};

enum class ActionKind { positive_click, negative_click, erase, none };

std::string_view to_string(ActionKind k);  // "pos" / "neg" / "erase" / "none"
ActionKind action_kind_from_string(std::string_view s);

struct FeedbackAction {
  ActionKind kind = ActionKind::none;
  int slice = 0;
  std::optional<Pixel> position;  // set only for clicks

  static FeedbackAction none(int k) { return {ActionKind::none, k, std::nullopt}; }
  static FeedbackAction erase(int k) { return {ActionKind::erase, k, std::nullopt}; }
  static FeedbackAction click(int k, Pixel p, Polarity pol) {
    return {pol == Polarity::positive ? ActionKind::positive_click : ActionKind::negative_click, k,
            p};
  }
  bool is_click() const {
    return kind == ActionKind::positive_click || kind == ActionKind::negative_click;
  }
  Polarity polarity() const {
    return kind == ActionKind::positive_click ? Polarity::positive : Polarity::negative;
  }
  bool operator==(const FeedbackAction&) const = default;
};

// Session-log record {"t","k","action","i","j"}; "i"/"j" only for clicks.
nlohmann::json action_to_json(const FeedbackAction& a, int iteration);
FeedbackAction action_from_json(const nlohmann::json& j);

// Clicks already cached for one slice, plus the per-polarity cap.
struct SliceClicks {
  std::span<const Pixel> positive;
  std::span<const Pixel> negative;
  int max_per_polarity = 12;

  static SliceClicks from_cache(const ClickCache& cache, int k) {
    return {cache.clicks(k, Polarity::positive), cache.clicks(k, Polarity::negative),
            cache.config().max_per_polarity};
  }
};

// One corrective action for a slice: erase a spurious mask on a lesion-free
// slice, otherwise click inside the biggest error region.
FeedbackAction decide(const SliceMask& gt, const SliceMask& pred, const SliceClicks& prior, int k,
                      const ExpertConfig& cfg = {});

// Positive click at the center of mass of the biggest lesion; none on an
// empty slice.
FeedbackAction cold_start(const SliceMask& gt, int k, const ExpertConfig& cfg = {});

// Uniform pick among background pixels at distance (0, d0] from the lesion.
// Throws std::invalid_argument on an empty slice or when no pixel qualifies.
Pixel sample_negative_near(const SliceMask& gt, const ExpertConfig& cfg, std::mt19937_64& rng);

}  // namespace lungseg
