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

#include <limits>
#include <memory>
#include <span>
#include <string>

#include "lungseg/click_engine.hpp"
#include "lungseg/image.hpp"
#include "lungseg/region_ops.hpp"
#include "lungseg/volume.hpp"

namespace lungseg {

// Initial segmenter: slice window -> per-pixel lesion probability.
class InitialSegmenter {
 public:
  virtual ~InitialSegmenter() = default;
  virtual FloatPlane predict(const SliceWindow& window) = 0;
};

// Everything a refinement model may look at for one slice. Learned models see
// the window plus three extra planes (positive clicks, negative clicks,
// previous mask); reference refiners also use the raw click positions.
struct RefineRequest {
  int slice = 0;
  const SliceWindow& window;
  const SliceMask& prev_mask;
  const ClickMask& pos_mask;
  const ClickMask& neg_mask;
  std::span<const Pixel> pos_clicks;
  std::span<const Pixel> neg_clicks;
};

class RefinementSegmenter {
 public:
  virtual ~RefinementSegmenter() = default;
  virtual FloatPlane refine(const RefineRequest& req) = 0;
};

struct BinarizeRule {
  float threshold = 0.5f;
};

// pixel = prob > threshold. Throws std::invalid_argument on values outside [0,1].
SliceMask binarize(const FloatPlane& prob, BinarizeRule rule = {});
// Throws std::invalid_argument unless `prob` has `shape` and values in [0,1].
void check_probability_plane(const FloatPlane& prob, Shape2D shape);
FloatPlane to_probability(const SliceMask& m);

// ---- reference initial segmenter ------------------------------------------

struct ThresholdConfig {
  double level = 0.6;  // on the normalized center channel
  int min_area = 4;    // smaller components are dropped
  Connectivity connectivity = Connectivity::eight;
};

FloatPlane threshold_initial(const SliceWindow& window, const ThresholdConfig& cfg = {});

class ThresholdSegmenter : public InitialSegmenter {
 public:
  explicit ThresholdSegmenter(ThresholdConfig cfg = {}) : cfg_(cfg) {}
  FloatPlane predict(const SliceWindow& window) override { return threshold_initial(window, cfg_); }

 private:
  ThresholdConfig cfg_;
};

// All-zero predictions; refinement returns the previous mask unchanged.
class NullSegmenter : public InitialSegmenter, public RefinementSegmenter {
 public:
  FloatPlane predict(const SliceWindow& window) override;
  FloatPlane refine(const RefineRequest& req) override;
};

// ---- reference refiner -----------------------------------------------------

struct ConservativeConfig {
  double growth_radius = 15.0;
  double tau = 0.1;  // max normalized intensity difference to the click pixel
  double removal_radius = 10.0;
  Connectivity connectivity = Connectivity::eight;
};

// Starts from prev_mask. Negative clicks remove the prev-mask component they
// hit, or, when off-mask, the prev-mask pixels within removal_radius whose
// intensity is within tau of the click pixel. Positive clicks then add the
// region grown from the click (within growth_radius, intensity within tau).
FloatPlane conservative_refine(const SliceWindow& window, const SliceMask& prev_mask,
                               std::span<const Pixel> pos_clicks,
                               std::span<const Pixel> neg_clicks,
                               const ConservativeConfig& cfg = {});

class ConservativeRefiner : public RefinementSegmenter {
 public:
  explicit ConservativeRefiner(ConservativeConfig cfg = {}) : cfg_(cfg) {}
  FloatPlane refine(const RefineRequest& req) override {
    return conservative_refine(req.window, req.prev_mask, req.pos_clicks, req.neg_clicks, cfg_);
  }

 private:
  ConservativeConfig cfg_;
};

// ---- ground-truth oracle refiner (harness verification) -------------------

inline constexpr double kUnlimitedBudget = std::numeric_limits<double>::infinity();

// Positive click: fills the gt pixels of its false-negative component within
// budget_radius. Negative click: clears its false-positive component. Never
// flips a correctly labelled pixel.
FloatPlane oracle_refine(const SliceMask& gt, const SliceMask& prev_mask,
                         std::span<const Pixel> pos_clicks, std::span<const Pixel> neg_clicks,
                         double budget_radius = kUnlimitedBudget,
                         Connectivity conn = Connectivity::eight);

class OracleRefiner : public RefinementSegmenter {
 public:
  OracleRefiner(std::shared_ptr<const MaskVolume> gt, double budget_radius = kUnlimitedBudget)
      : gt_(std::move(gt)), budget_(budget_radius) {}
  FloatPlane refine(const RefineRequest& req) override;

 private:
  std::shared_ptr<const MaskVolume> gt_;
  double budget_;
};

}  // namespace lungseg
