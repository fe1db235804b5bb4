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

#include "lungseg/click_engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "lungseg/kernels.hpp"

namespace lungseg {

std::string_view to_string(Polarity p) { return p == Polarity::positive ? "pos" : "neg"; }

Polarity polarity_from_string(std::string_view s) {
  if (s == "pos") return Polarity::positive;
  if (s == "neg") return Polarity::negative;
  throw std::invalid_argument("unknown polarity '" + std::string(s) + "'");
}

nlohmann::json click_to_json(const Click& c, int iteration) {
  return {{"t", iteration},
          {"k", c.slice},
          {"i", c.position.i},
          {"j", c.position.j},
          {"polarity", to_string(c.polarity)}};
}

Click click_from_json(const nlohmann::json& j) {
  return {j.at("k").get<int>(),
          {j.at("i").get<int>(), j.at("j").get<int>()},
          polarity_from_string(j.at("polarity").get<std::string>())};
}

ClickMask encode_clicks(std::span<const Pixel> clicks, Shape2D shape, double sigma,
                        double clip_radius) {
  ClickMask m{Plane<double>(shape, 0.0), sigma, clip_radius};
  kernels::accumulate_gaussians(m.values, clicks, sigma, clip_radius);
  return m;
}

ClickCache::ClickCache(int n_slices, Shape2D shape, ClickCacheConfig cfg)
    : shape_(shape),
      cfg_(cfg),
      positive_(static_cast<std::size_t>(n_slices)),
      negative_(static_cast<std::size_t>(n_slices)),
      rng_(cfg.seed) {
  if (n_slices < 0) throw std::invalid_argument("ClickCache: negative slice count");
  if (cfg.max_per_polarity < 0) throw std::invalid_argument("ClickCache: negative cap");
  if (cfg.reset_probability < 0 || cfg.reset_probability > 1) {
    throw std::invalid_argument("ClickCache: reset_probability outside [0,1]");
  }
}

std::vector<Pixel>& ClickCache::list(int k, Polarity p) {
  return p == Polarity::positive ? positive_[static_cast<std::size_t>(k)]
                                 : negative_[static_cast<std::size_t>(k)];
}

std::span<const Pixel> ClickCache::clicks(int k, Polarity p) const {
  if (k < 0 || k >= n_slices()) throw std::out_of_range("ClickCache: slice out of range");
  return p == Polarity::positive ? positive_[static_cast<std::size_t>(k)]
                                 : negative_[static_cast<std::size_t>(k)];
}

bool ClickCache::has(int k, Pixel pos, Polarity p) const {
  auto c = clicks(k, p);
  return std::find(c.begin(), c.end(), pos) != c.end();
}

AddResult ClickCache::add(const Click& c) {
  if (c.slice < 0 || c.slice >= n_slices()) throw std::out_of_range("click slice out of range");
  if (c.position.i < 0 || c.position.j < 0 || c.position.i >= shape_.height ||
      c.position.j >= shape_.width) {
    throw std::out_of_range("click position outside the slice");
  }
  if (has(c.slice, c.position, c.polarity)) return AddResult::duplicate;
  if (at_cap(c.slice, c.polarity)) return AddResult::cap;
  list(c.slice, c.polarity).push_back(c.position);
  return AddResult::accepted;
}

bool ClickCache::maybe_reset() {
  // One draw per call, whatever the probability.
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  if (u < cfg_.reset_probability) {
    clear();
    return true;
  }
  return false;
}

void ClickCache::clear() {
  for (auto& v : positive_) v.clear();
  for (auto& v : negative_) v.clear();
}

void ClickCache::clear_slice(int k) {
  list(k, Polarity::positive).clear();
  list(k, Polarity::negative).clear();
}

std::size_t ClickCache::total() const {
  std::size_t n = 0;
  for (const auto& v : positive_) n += v.size();
  for (const auto& v : negative_) n += v.size();
  return n;
}

std::pair<ClickMask, ClickMask> masks_for_slice(const ClickCache& cache, int k,
                                                ClickEncoding enc) {
  return {encode_clicks(cache.clicks(k, Polarity::positive), cache.shape(), enc),
          encode_clicks(cache.clicks(k, Polarity::negative), cache.shape(), enc)};
}

}  // namespace lungseg
