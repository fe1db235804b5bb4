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

#include <optional>
#include <span>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg {

enum class Connectivity { four = 4, eight = 8 };

struct BBox {
  int i_min = 0, i_max = -1, j_min = 0, j_max = -1;
};

// A connected set of foreground pixels. `pixels` and `border` are sorted
// row-major. Border pixels have at least one 4-neighbor outside the region or
// outside the image frame.
struct Region {
  int label = 0;
  std::vector<Pixel> pixels;
  std::vector<Pixel> border;
  BBox bbox;

  int area() const { return static_cast<int>(pixels.size()); }
  bool contains(Pixel p) const;
  bool is_border(Pixel p) const;
};

// Builds a region from an arbitrary pixel set, computing border and bbox.
Region make_region(int label, std::vector<Pixel> pixels, Shape2D frame);

// Labels start at 1, in row-major order of each region's first pixel.
std::vector<Region> connected_components(const SliceMask& mask,
                                         Connectivity conn = Connectivity::eight);

// Label plane (0 = background) with the same numbering as connected_components.
Plane<int> label_components(const SliceMask& mask, Connectivity conn = Connectivity::eight);

// Euclidean distance from every pixel of the domain to the nearest point.
// Throws std::invalid_argument on an empty point set.
Plane<double> distance_transform(std::span<const Pixel> points, Shape2D domain);

// Region pixel nearest to the mean pixel coordinate; ties go to smallest i, then j.
Pixel center_of_mass(const Region& r);

// Pixel maximizing min(distance to region border, distance to previous clicks),
// ties to smallest i then j. nullopt when every pixel of the region is border.
std::optional<Pixel> farthest_point(const Region& r, std::span<const Pixel> prev_clicks);

struct ErrorRegions {
  std::vector<Region> false_negative;  // gt = 1, pred = 0
  std::vector<Region> false_positive;  // gt = 0, pred = 1
  bool empty() const { return false_negative.empty() && false_positive.empty(); }
};

ErrorRegions error_regions(const SliceMask& gt, const SliceMask& pred,
                           Connectivity conn = Connectivity::eight);

// Largest by area, ties to the smallest label.
const Region* largest_region(std::span<const Region> regions);

}  // namespace lungseg
