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

#include "lungseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lungseg::kernels {
namespace {

// floor(a / b) for b > 0
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}

// Column pass: g(i, j) = |i - i'| to the nearest source in column j.
void edt_column(const SliceMask& src, Plane<std::int64_t>& g, int j, std::int64_t inf) {
  const int h = src.height();
  g(0, j) = src(0, j) ? 0 : inf;
  for (int i = 1; i < h; ++i) g(i, j) = src(i, j) ? 0 : std::min(inf, g(i - 1, j) + 1);
  for (int i = h - 2; i >= 0; --i) {
    if (g(i + 1, j) < g(i, j)) g(i, j) = g(i + 1, j) + 1;
  }
}

// Row pass: lower envelope of parabolas (u - s)^2 + g(s)^2.
void edt_row(const Plane<std::int64_t>& g, Plane<std::int64_t>& out, int i, std::int64_t inf,
             std::vector<int>& s, std::vector<int>& t) {
  const int w = g.width();
  auto f = [&](int u, int v) {
    const std::int64_t du = u - v;
    const std::int64_t gv = g(i, v);
    return du * du + gv * gv;
  };
  auto sep = [&](int a, int b) {
    const std::int64_t ga = g(i, a), gb = g(i, b);
    const std::int64_t num = static_cast<std::int64_t>(b) * b - static_cast<std::int64_t>(a) * a +
                             gb * gb - ga * ga;
    return floor_div(num, 2 * static_cast<std::int64_t>(b - a));
  };

  int q = 0;
  s[0] = 0;
  t[0] = 0;
  for (int u = 1; u < w; ++u) {
    while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
    if (q < 0) {
      q = 0;
      s[0] = u;
    } else {
      const std::int64_t wpos = 1 + sep(s[q], u);
      if (wpos < w) {
        ++q;
        s[q] = u;
        t[q] = static_cast<int>(wpos);
      }
    }
  }
  const std::int64_t none = inf * inf;
  for (int u = w - 1; u >= 0; --u) {
    const std::int64_t d = f(u, s[q]);
    out(i, u) = d >= none ? kNoSource : d;
    if (u == t[q]) --q;
  }
}

inline double gaussian(std::int64_t d2, double two_sigma_sq) {
  return std::exp(-static_cast<double>(d2) / two_sigma_sq);
}

void check_encode_args(double sigma, double clip_radius) {
  if (!(sigma > 0) || !(clip_radius > 0)) {
    throw std::invalid_argument("sigma and clip_radius must be positive");
  }
}

}  // namespace

Plane<std::int64_t> squared_edt_serial(const SliceMask& sources) {
  const Shape2D shape = sources.shape();
  Plane<std::int64_t> out(shape, kNoSource);
  if (shape.size() == 0) return out;
  const std::int64_t inf = shape.height + shape.width;
  Plane<std::int64_t> g(shape, 0);
  for (int j = 0; j < shape.width; ++j) edt_column(sources, g, j, inf);
  std::vector<int> s(shape.width), t(shape.width);
  for (int i = 0; i < shape.height; ++i) edt_row(g, out, i, inf, s, t);
  return out;
}

Plane<std::int64_t> squared_edt(const SliceMask& sources) {
  const Shape2D shape = sources.shape();
  Plane<std::int64_t> out(shape, kNoSource);
  if (shape.size() == 0) return out;
  const std::int64_t inf = shape.height + shape.width;
  Plane<std::int64_t> g(shape, 0);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (int j = 0; j < shape.width; ++j) edt_column(sources, g, j, inf);
    std::vector<int> s(shape.width), t(shape.width);
#pragma omp for schedule(static)
    for (int i = 0; i < shape.height; ++i) edt_row(g, out, i, inf, s, t);
  }
  return out;
}

void accumulate_gaussians_serial(Plane<double>& plane, std::span<const Pixel> clicks,
                                 double sigma, double clip_radius) {
  check_encode_args(sigma, clip_radius);
  const double two_sigma_sq = 2.0 * sigma * sigma;
  const double clip_sq = clip_radius * clip_radius;
  const int reach = static_cast<int>(std::ceil(clip_radius));
  for (const Pixel& c : clicks) {
    const int i0 = std::max(0, c.i - reach), i1 = std::min(plane.height() - 1, c.i + reach);
    const int j0 = std::max(0, c.j - reach), j1 = std::min(plane.width() - 1, c.j + reach);
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const std::int64_t d2 = squared_distance({i, j}, c);
        if (static_cast<double>(d2) < clip_sq) plane(i, j) += gaussian(d2, two_sigma_sq);
      }
    }
  }
}

void accumulate_gaussians(Plane<double>& plane, std::span<const Pixel> clicks, double sigma,
                          double clip_radius) {
  check_encode_args(sigma, clip_radius);
  const double two_sigma_sq = 2.0 * sigma * sigma;
  const double clip_sq = clip_radius * clip_radius;
  const int reach = static_cast<int>(std::ceil(clip_radius));
  const int h = plane.height(), w = plane.width();
  // Rows are independent; within a pixel, contributions are added in click
  // order so the sum matches the serial kernel exactly.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    for (const Pixel& c : clicks) {
      if (i < c.i - reach || i > c.i + reach) continue;
      const int j0 = std::max(0, c.j - reach), j1 = std::min(w - 1, c.j + reach);
      for (int j = j0; j <= j1; ++j) {
        const std::int64_t d2 = squared_distance({i, j}, c);
        if (static_cast<double>(d2) < clip_sq) plane(i, j) += gaussian(d2, two_sigma_sq);
      }
    }
  }
}

void normalize_window_serial(std::span<const std::int16_t> raw, std::span<float> out, double lo,
                             double hi) {
  if (raw.size() != out.size()) throw std::invalid_argument("normalize: size mismatch");
  const double scale = 1.0 / (hi - lo);
  for (std::size_t n = 0; n < raw.size(); ++n) {
    out[n] = static_cast<float>(std::clamp((raw[n] - lo) * scale, 0.0, 1.0));
  }
}

void normalize_window(std::span<const std::int16_t> raw, std::span<float> out, double lo,
                      double hi) {
  if (raw.size() != out.size()) throw std::invalid_argument("normalize: size mismatch");
  const double scale = 1.0 / (hi - lo);
  const auto n_total = static_cast<std::int64_t>(raw.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < n_total; ++n) {
    out[n] = static_cast<float>(std::clamp((raw[n] - lo) * scale, 0.0, 1.0));
  }
}

OverlapCounts count_overlap_serial(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("count_overlap: size mismatch");
  OverlapCounts c;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const bool x = a[n] != 0, y = b[n] != 0;
    c.intersection += x && y;
    c.union_ += x || y;
  }
  return c;
}

OverlapCounts count_overlap(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("count_overlap: size mismatch");
  std::int64_t inter = 0, uni = 0;
  const auto n_total = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(static) reduction(+ : inter, uni)
  for (std::int64_t n = 0; n < n_total; ++n) {
    const bool x = a[n] != 0, y = b[n] != 0;
    inter += x && y;
    uni += x || y;
  }
  return {inter, uni};
}

}  // namespace lungseg::kernels
