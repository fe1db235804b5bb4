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
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lungseg/image.hpp"

namespace lungseg {

enum class Polarity { positive, negative };

std::string_view to_string(Polarity p);  // "pos" / "neg"
Polarity polarity_from_string(std::string_view s);

struct Click {
  int slice = 0;
  Pixel position;
  Polarity polarity = Polarity::positive;
};

// Session-log record {"t","k","i","j","polarity"}.
nlohmann::json click_to_json(const Click& c, int iteration);
Click click_from_json(const nlohmann::json& j);

struct ClickEncoding {
  double sigma = 10.0;
  double clip_radius = 30.0;
};

// Sum of clipped Gaussians, one per click. Values are not clipped at 1.
struct ClickMask {
  Plane<double> values;
  double sigma = 10.0;
  double clip_radius = 30.0;
};

ClickMask encode_clicks(std::span<const Pixel> clicks, Shape2D shape, double sigma,
                        double clip_radius);
inline ClickMask encode_clicks(std::span<const Pixel> clicks, Shape2D shape, ClickEncoding enc) {
  return encode_clicks(clicks, shape, enc.sigma, enc.clip_radius);
}

struct ClickCacheConfig {
  int max_per_polarity = 12;
  double reset_probability = 0.0;
  std::uint64_t seed = 0;
};

enum class AddResult { accepted, cap, duplicate };

// Per-slice positive and negative click lists for one scan.
class ClickCache {
 public:
  ClickCache(int n_slices, Shape2D shape, ClickCacheConfig cfg = {});

  // Throws std::out_of_range for a slice or position outside the scan.
  AddResult add(const Click& c);
  bool add_click(const Click& c) { return add(c) == AddResult::accepted; }

  // Clears every slice with probability reset_probability.
  bool maybe_reset();
  void clear();
  void clear_slice(int k);

  std::span<const Pixel> clicks(int k, Polarity p) const;
  int count(int k, Polarity p) const { return static_cast<int>(clicks(k, p).size()); }
  bool at_cap(int k, Polarity p) const { return count(k, p) >= cfg_.max_per_polarity; }
  bool has(int k, Pixel pos, Polarity p) const;
  std::size_t total() const;

  int n_slices() const { return static_cast<int>(positive_.size()); }
  Shape2D shape() const { return shape_; }
  const ClickCacheConfig& config() const { return cfg_; }

 private:
  std::vector<Pixel>& list(int k, Polarity p);

  Shape2D shape_;
  ClickCacheConfig cfg_;
  std::vector<std::vector<Pixel>> positive_;
  std::vector<std::vector<Pixel>> negative_;
  std::mt19937_64 rng_;
};

// (positive, negative) encodings of slice k.
std::pair<ClickMask, ClickMask> masks_for_slice(const ClickCache& cache, int k,
                                                ClickEncoding enc = {});

}  // namespace lungseg
