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

// Data-parallel inner loops. Every kernel has an OpenMP version (the default
// entry point) and a `_serial` reference with the same contract; the two must
// agree bit for bit and are compared in tests and in lungseg_bench.

#include <cstdint>
#include <limits>
#include <span>

#include "lungseg/image.hpp"

namespace lungseg::kernels {

// Marker for pixels with no source anywhere in the plane.
inline constexpr std::int64_t kNoSource = std::numeric_limits<std::int64_t>::max();

// Exact squared Euclidean distance from each pixel to the nearest nonzero
// pixel of `sources` (separable two-pass transform, integer arithmetic).
Plane<std::int64_t> squared_edt(const SliceMask& sources);
Plane<std::int64_t> squared_edt_serial(const SliceMask& sources);

// Adds exp(-d^2 / (2 sigma^2)) for d < clip_radius around every click, in
// click order, into `plane`.
void accumulate_gaussians(Plane<double>& plane, std::span<const Pixel> clicks, double sigma,
                          double clip_radius);
void accumulate_gaussians_serial(Plane<double>& plane, std::span<const Pixel> clicks,
                                 double sigma, double clip_radius);

// clamp((raw - lo) / (hi - lo), 0, 1)
void normalize_window(std::span<const std::int16_t> raw, std::span<float> out, double lo,
                      double hi);
void normalize_window_serial(std::span<const std::int16_t> raw, std::span<float> out, double lo,
                             double hi);

struct OverlapCounts {
  std::int64_t intersection = 0;
  std::int64_t union_ = 0;
  bool operator==(const OverlapCounts&) const = default;
};

OverlapCounts count_overlap(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
OverlapCounts count_overlap_serial(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b);

}  // namespace lungseg::kernels
