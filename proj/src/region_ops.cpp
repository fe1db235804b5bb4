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

#include "lungseg/region_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lungseg/kernels.hpp"

namespace lungseg {
namespace {

constexpr int kDi4[4] = {-1, 1, 0, 0};
constexpr int kDj4[4] = {0, 0, -1, 1};
constexpr int kDi8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDj8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

}  // namespace

bool Region::contains(Pixel p) const { return std::binary_search(pixels.begin(), pixels.end(), p); }

bool Region::is_border(Pixel p) const { return std::binary_search(border.begin(), border.end(), p); }

Region make_region(int label, std::vector<Pixel> pixels, Shape2D frame) {
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  Region r;
  r.label = label;
  r.pixels = std::move(pixels);
  if (r.pixels.empty()) return r;
  r.bbox = {r.pixels.front().i, r.pixels.front().i, r.pixels.front().j, r.pixels.front().j};
  for (const Pixel& p : r.pixels) {
    r.bbox.i_min = std::min(r.bbox.i_min, p.i);
    r.bbox.i_max = std::max(r.bbox.i_max, p.i);
    r.bbox.j_min = std::min(r.bbox.j_min, p.j);
    r.bbox.j_max = std::max(r.bbox.j_max, p.j);
  }
  for (const Pixel& p : r.pixels) {
    bool border = false;
    for (int n = 0; n < 4 && !border; ++n) {
      const Pixel q{p.i + kDi4[n], p.j + kDj4[n]};
      const bool in_frame = q.i >= 0 && q.j >= 0 && q.i < frame.height && q.j < frame.width;
      border = !in_frame || !r.contains(q);
    }
    if (border) r.border.push_back(p);
  }
  return r;
}

Plane<int> label_components(const SliceMask& mask, Connectivity conn) {
  const int h = mask.height(), w = mask.width();
  Plane<int> labels(mask.shape(), 0);
  const int n_nb = conn == Connectivity::eight ? 8 : 4;
  const int* di = conn == Connectivity::eight ? kDi8 : kDi4;
  const int* dj = conn == Connectivity::eight ? kDj8 : kDj4;
  std::vector<Pixel> stack;
  int next = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j) || labels(i, j)) continue;
      ++next;
      labels(i, j) = next;
      stack.push_back({i, j});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int n = 0; n < n_nb; ++n) {
          const Pixel q{p.i + di[n], p.j + dj[n]};
          if (!mask.contains(q) || !mask[q] || labels[q]) continue;
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return labels;
}

std::vector<Region> connected_components(const SliceMask& mask, Connectivity conn) {
  const Plane<int> labels = label_components(mask, conn);
  int n_labels = 0;
  for (int v : labels.values()) n_labels = std::max(n_labels, v);
  std::vector<std::vector<Pixel>> members(static_cast<std::size_t>(n_labels));
  for (int i = 0; i < mask.height(); ++i) {
    for (int j = 0; j < mask.width(); ++j) {
      if (const int l = labels(i, j)) members[static_cast<std::size_t>(l - 1)].push_back({i, j});
    }
  }
  std::vector<Region> out;
  out.reserve(members.size());
  for (std::size_t l = 0; l < members.size(); ++l) {
    out.push_back(make_region(static_cast<int>(l) + 1, std::move(members[l]), mask.shape()));
  }
  return out;
}

Plane<double> distance_transform(std::span<const Pixel> points, Shape2D domain) {
  if (points.empty()) throw std::invalid_argument("distance_transform: empty point set");
  SliceMask sources(domain, 0);
  for (const Pixel& p : points) {
    if (!sources.contains(p)) throw std::out_of_range("distance_transform: point outside domain");
    sources[p] = 1;
  }
  const auto sq = kernels::squared_edt(sources);
  Plane<double> out(domain);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out.values()[n] = std::sqrt(static_cast<double>(sq.values()[n]));
  }
  return out;
}

Pixel center_of_mass(const Region& r) {
  if (r.pixels.empty()) throw std::invalid_argument("center_of_mass: empty region");
  // Compare n^2 * squared distance to the mean in integers.
  const std::int64_t n = r.area();
  std::int64_t si = 0, sj = 0;
  for (const Pixel& p : r.pixels) {
    si += p.i;
    sj += p.j;
  }
  Pixel best = r.pixels.front();
  std::int64_t best_d = -1;
  for (const Pixel& p : r.pixels) {
    const std::int64_t di = n * p.i - si, dj = n * p.j - sj;
    const std::int64_t d = di * di + dj * dj;
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

std::optional<Pixel> farthest_point(const Region& r, std::span<const Pixel> prev_clicks) {
  if (r.pixels.empty() || r.border.size() == r.pixels.size()) return std::nullopt;

  const Shape2D local{r.bbox.i_max - r.bbox.i_min + 1, r.bbox.j_max - r.bbox.j_min + 1};
  SliceMask sources(local, 0);
  for (const Pixel& b : r.border) sources(b.i - r.bbox.i_min, b.j - r.bbox.j_min) = 1;
  const auto to_border = kernels::squared_edt(sources);

  Pixel best{};
  std::int64_t best_v = -1;
  for (const Pixel& p : r.pixels) {
    std::int64_t v = to_border(p.i - r.bbox.i_min, p.j - r.bbox.j_min);
    for (const Pixel& c : prev_clicks) v = std::min(v, squared_distance(p, c));
    if (v > best_v) {
      best_v = v;
      best = p;
    }
  }
  return best;
}

ErrorRegions error_regions(const SliceMask& gt, const SliceMask& pred, Connectivity conn) {
  if (gt.shape() != pred.shape()) throw std::invalid_argument("error_regions: shape mismatch");
  SliceMask fn(gt.shape(), 0), fp(gt.shape(), 0);
  for (std::size_t n = 0; n < gt.size(); ++n) {
    const bool g = gt.values()[n] != 0, p = pred.values()[n] != 0;
    fn.values()[n] = g && !p;
    fp.values()[n] = !g && p;
  }
  return {connected_components(fn, conn), connected_components(fp, conn)};
}

const Region* largest_region(std::span<const Region> regions) {
  const Region* best = nullptr;
  for (const Region& r : regions) {
    if (!best || r.area() > best->area() || (r.area() == best->area() && r.label < best->label)) {
      best = &r;
    }
  }
  return best;
}

}  // namespace lungseg
