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

#include "lungseg/expert_sim.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "lungseg/kernels.hpp"

namespace lungseg {

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::positive_click: return "pos";
    case ActionKind::negative_click: return "neg";
    case ActionKind::erase: return "erase";
    case ActionKind::none: return "none";
  }
  return "none";
}

ActionKind action_kind_from_string(std::string_view s) {
  if (s == "pos") return ActionKind::positive_click;
  if (s == "neg") return ActionKind::negative_click;
  if (s == "erase") return ActionKind::erase;
  if (s == "none") return ActionKind::none;
  throw std::invalid_argument("unknown action '" + std::string(s) + "'");
}

nlohmann::json action_to_json(const FeedbackAction& a, int iteration) {
  nlohmann::json j = {{"t", iteration}, {"k", a.slice}, {"action", to_string(a.kind)}};
  if (a.position) {
    j["i"] = a.position->i;
    j["j"] = a.position->j;
  }
  return j;
}

FeedbackAction action_from_json(const nlohmann::json& j) {
  FeedbackAction a;
  a.slice = j.at("k").get<int>();
  // Click records written by the click engine carry "polarity" instead of "action".
  if (j.contains("action")) {
    a.kind = action_kind_from_string(j["action"].get<std::string>());
  } else {
    a.kind = polarity_from_string(j.at("polarity").get<std::string>()) == Polarity::positive
                 ? ActionKind::positive_click
                 : ActionKind::negative_click;
  }
  if (a.is_click()) {
    a.position = Pixel{j.at("i").get<int>(), j.at("j").get<int>()};
  } else if (j.contains("i") || j.contains("j")) {
    throw std::invalid_argument("erase/none actions carry no position");
  }
  return a;
}

namespace {

std::optional<FeedbackAction> try_click(const Region* region, Polarity pol,
                                        const SliceClicks& prior, int k) {
  if (!region) return std::nullopt;
  const auto same = pol == Polarity::positive ? prior.positive : prior.negative;
  if (static_cast<int>(same.size()) >= prior.max_per_polarity) return std::nullopt;
  const auto p = farthest_point(*region, same);
  if (!p) return std::nullopt;
  // Only reachable when every interior pixel already holds a click.
  if (std::find(same.begin(), same.end(), *p) != same.end()) return std::nullopt;
  return FeedbackAction::click(k, *p, pol);
}

}  // namespace

FeedbackAction decide(const SliceMask& gt, const SliceMask& pred, const SliceClicks& prior, int k,
                      const ExpertConfig& cfg) {
  if (gt.shape() != pred.shape()) throw std::invalid_argument("decide: shape mismatch");
  if (is_empty(gt)) {
    return is_empty(pred) ? FeedbackAction::none(k) : FeedbackAction::erase(k);
  }
  const ErrorRegions errors = error_regions(gt, pred, cfg.connectivity);
  if (errors.empty()) return FeedbackAction::none(k);

  const Region* fn = largest_region(errors.false_negative);
  const Region* fp = largest_region(errors.false_positive);
  bool fn_first = fn != nullptr;
  if (fn && fp && cfg.rule == PolarityRule::larger_error_area) fn_first = fn->area() >= fp->area();

  const Region* first = fn_first ? fn : fp;
  const Region* second = fn_first ? fp : fn;
  const Polarity first_pol = fn_first ? Polarity::positive : Polarity::negative;
  const Polarity second_pol = fn_first ? Polarity::negative : Polarity::positive;

  if (auto a = try_click(first, first_pol, prior, k)) return *a;
  if (auto a = try_click(second, second_pol, prior, k)) return *a;
  return FeedbackAction::none(k);
}

FeedbackAction cold_start(const SliceMask& gt, int k, const ExpertConfig& cfg) {
  const auto lesions = connected_components(gt, cfg.connectivity);
  const Region* biggest = largest_region(lesions);
  if (!biggest) return FeedbackAction::none(k);
  return FeedbackAction::click(k, center_of_mass(*biggest), Polarity::positive);
}

Pixel sample_negative_near(const SliceMask& gt, const ExpertConfig& cfg, std::mt19937_64& rng) {
  if (!(cfg.d0 > 0)) throw std::invalid_argument("d0 must be positive");
  if (is_empty(gt)) throw std::invalid_argument("sample_negative_near: slice has no lesion");
  const auto dist = kernels::squared_edt(gt);
  const double d0_sq = cfg.d0 * cfg.d0;
  std::vector<Pixel> candidates;
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      const std::int64_t d = dist(i, j);
      if (d > 0 && static_cast<double>(d) <= d0_sq) candidates.push_back({i, j});
    }
  }
  if (candidates.empty()) {
    throw std::invalid_argument("sample_negative_near: no background pixel within d0");
  }
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

}  // namespace lungseg
