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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lungseg {

struct Shape2D {
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool operator==(const Shape2D&) const = default;
};

// (i, j) = (row, column).
struct Pixel {
  int i = 0;
  int j = 0;

  auto operator<=>(const Pixel&) const = default;
};

inline std::int64_t squared_distance(Pixel a, Pixel b) {
  const std::int64_t di = a.i - b.i;
  const std::int64_t dj = a.j - b.j;
  return di * di + dj * dj;
}

// Dense row-major 2D plane.
template <typename T>
class Plane {
 public:
  Plane() = default;
  explicit Plane(Shape2D shape, T fill = T{})
      : shape_(shape), data_(shape.size(), fill) {
    if (shape.height < 0 || shape.width < 0) {
      throw std::invalid_argument("negative plane shape");
    }
  }
  Plane(Shape2D shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw std::invalid_argument("plane data size does not match shape");
    }
  }

  Shape2D shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  bool contains(Pixel p) const {
    return p.i >= 0 && p.j >= 0 && p.i < shape_.height && p.j < shape_.width;
  }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }
  T& operator[](Pixel p) { return data_[index(p.i, p.j)]; }
  const T& operator[](Pixel p) const { return data_[index(p.i, p.j)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool operator==(const Plane&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(j);
  }

  Shape2D shape_{};
  std::vector<T> data_;
};

// Binary slice mask, values in {0,1}.
using SliceMask = Plane<std::uint8_t>;
// Probability or normalized-intensity plane.
using FloatPlane = Plane<float>;

inline std::size_t count_foreground(const SliceMask& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

inline bool is_empty(const SliceMask& m) {
  for (auto v : m.values()) {
    if (v != 0) return false;
  }
  return true;
}

}  // namespace lungseg
