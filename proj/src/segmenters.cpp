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

#include "lungseg/segmenters.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lungseg {
namespace {

bool within(Pixel p, Pixel c, double radius) {
  return static_cast<double>(squared_distance(p, c)) <= radius * radius;
}

void neighbors(Connectivity conn, const int*& di, const int*& dj, int& n) {
  static constexpr int di8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static constexpr int dj8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static constexpr int di4[4] = {-1, 1, 0, 0};
  static constexpr int dj4[4] = {0, 0, -1, 1};
  if (conn == Connectivity::eight) {
    di = di8, dj = dj8, n = 8;
  } else {
    di = di4, dj = dj4, n = 4;
  }
}

}  // namespace

void check_probability_plane(const FloatPlane& prob, Shape2D shape) {
  if (prob.shape() != shape) throw std::invalid_argument("probability plane has the wrong shape");
  for (float v : prob.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("probability outside [0,1]");
    }
  }
}

SliceMask binarize(const FloatPlane& prob, BinarizeRule rule) {
  if (!(rule.threshold > 0.0f && rule.threshold < 1.0f)) {
    throw std::invalid_argument("binarize threshold must lie in (0,1)");
  }
  check_probability_plane(prob, prob.shape());
  SliceMask out(prob.shape(), 0);
  for (std::size_t n = 0; n < prob.size(); ++n) out.values()[n] = prob.values()[n] > rule.threshold;
  return out;
}

FloatPlane to_probability(const SliceMask& m) {
  FloatPlane out(m.shape(), 0.0f);
  for (std::size_t n = 0; n < m.size(); ++n) out.values()[n] = m.values()[n] ? 1.0f : 0.0f;
  return out;
}

FloatPlane threshold_initial(const SliceWindow& window, const ThresholdConfig& cfg) {
  const FloatPlane& center = window.center();
  SliceMask raw(center.shape(), 0);
  for (std::size_t n = 0; n < center.size(); ++n) raw.values()[n] = center.values()[n] > cfg.level;
  SliceMask kept(center.shape(), 0);
  for (const Region& r : connected_components(raw, cfg.connectivity)) {
    if (r.area() < cfg.min_area) continue;
    for (const Pixel& p : r.pixels) kept[p] = 1;
  }
  return to_probability(kept);
}

FloatPlane NullSegmenter::predict(const SliceWindow& window) {
  return FloatPlane(window.shape(), 0.0f);
}

FloatPlane NullSegmenter::refine(const RefineRequest& req) { return to_probability(req.prev_mask); }

FloatPlane conservative_refine(const SliceWindow& window, const SliceMask& prev_mask,
                               std::span<const Pixel> pos_clicks,
                               std::span<const Pixel> neg_clicks, const ConservativeConfig& cfg) {
  const FloatPlane& img = window.center();
  if (img.shape() != prev_mask.shape()) {
    throw std::invalid_argument("conservative_refine: window/mask shape mismatch");
  }
  for (const Pixel& c : pos_clicks) {
    if (!img.contains(c)) throw std::out_of_range("conservative_refine: click out of bounds");
  }
  for (const Pixel& c : neg_clicks) {
    if (!img.contains(c)) throw std::out_of_range("conservative_refine: click out of bounds");
  }

  SliceMask out = prev_mask;
  auto similar = [&](Pixel p, Pixel c) {
    return std::fabs(static_cast<double>(img[p]) - static_cast<double>(img[c])) <= cfg.tau;
  };

  if (!neg_clicks.empty()) {
    const Plane<int> labels = label_components(prev_mask, cfg.connectivity);
    std::vector<char> drop_label;
    const int r = static_cast<int>(std::ceil(cfg.removal_radius));
    for (const Pixel& c : neg_clicks) {
      if (prev_mask[c]) {
        const auto l = static_cast<std::size_t>(labels[c]);
        if (drop_label.size() <= l) drop_label.resize(l + 1, 0);
        drop_label[l] = 1;
        continue;
      }
      for (int i = std::max(0, c.i - r); i <= std::min(img.height() - 1, c.i + r); ++i) {
        for (int j = std::max(0, c.j - r); j <= std::min(img.width() - 1, c.j + r); ++j) {
          const Pixel p{i, j};
          if (prev_mask[p] && within(p, c, cfg.removal_radius) && similar(p, c)) out[p] = 0;
        }
      }
    }
    if (!drop_label.empty()) {
      for (std::size_t n = 0; n < out.size(); ++n) {
        const auto l = static_cast<std::size_t>(labels.values()[n]);
        if (l && l < drop_label.size() && drop_label[l]) out.values()[n] = 0;
      }
    }
  }

  const int* di = nullptr;
  const int* dj = nullptr;
  int n_nb = 0;
  neighbors(cfg.connectivity, di, dj, n_nb);
  Plane<std::uint8_t> seen(img.shape(), 0);
  std::vector<Pixel> stack;
  for (const Pixel& c : pos_clicks) {
    std::fill(seen.values().begin(), seen.values().end(), std::uint8_t{0});
    seen[c] = 1;
    stack.assign(1, c);
    while (!stack.empty()) {
      const Pixel p = stack.back();
      stack.pop_back();
      out[p] = 1;
      for (int n = 0; n < n_nb; ++n) {
        const Pixel q{p.i + di[n], p.j + dj[n]};
        if (!img.contains(q) || seen[q]) continue;
        if (!within(q, c, cfg.growth_radius) || !similar(q, c)) continue;
        seen[q] = 1;
        stack.push_back(q);
      }
    }
  }
  return to_probability(out);
}

FloatPlane oracle_refine(const SliceMask& gt, const SliceMask& prev_mask,
                         std::span<const Pixel> pos_clicks, std::span<const Pixel> neg_clicks,
                         double budget_radius, Connectivity conn) {
  if (gt.shape() != prev_mask.shape()) throw std::invalid_argument("oracle_refine: shape mismatch");
  SliceMask fn(gt.shape(), 0), fp(gt.shape(), 0);
  for (std::size_t n = 0; n < gt.size(); ++n) {
    fn.values()[n] = gt.values()[n] && !prev_mask.values()[n];
    fp.values()[n] = !gt.values()[n] && prev_mask.values()[n];
  }
  SliceMask out = prev_mask;
  if (!pos_clicks.empty()) {
    const Plane<int> labels = label_components(fn, conn);
    for (const Pixel& c : pos_clicks) {
      if (!gt.contains(c) || !labels[c]) continue;
      const int l = labels[c];
      for (int i = 0; i < gt.height(); ++i) {
        for (int j = 0; j < gt.width(); ++j) {
          if (labels(i, j) == l && within({i, j}, c, budget_radius)) out(i, j) = 1;
        }
      }
    }
  }
  if (!neg_clicks.empty()) {
    const Plane<int> labels = label_components(fp, conn);
    for (const Pixel& c : neg_clicks) {
      if (!gt.contains(c) || !labels[c]) continue;
      const int l = labels[c];
      for (std::size_t n = 0; n < out.size(); ++n) {
        if (labels.values()[n] == l) out.values()[n] = 0;
      }
    }
  }
  return to_probability(out);
}

FloatPlane OracleRefiner::refine(const RefineRequest& req) {
  return oracle_refine(gt_->slice(req.slice), req.prev_mask, req.pos_clicks, req.neg_clicks,
                       budget_);
}

}  // namespace lungseg
