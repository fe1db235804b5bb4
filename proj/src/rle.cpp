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

#include "lungseg/rle.hpp"

#include <string>

namespace lungseg {

std::vector<std::int64_t> rle_runs(const SliceMask& mask) {
  std::vector<std::int64_t> runs;
  const auto v = mask.values();
  const auto n = static_cast<std::int64_t>(v.size());
  std::int64_t p = 0;
  while (p < n) {
    if (v[static_cast<std::size_t>(p)] == 0) {
      ++p;
      continue;
    }
    const std::int64_t start = p;
    while (p < n && v[static_cast<std::size_t>(p)] != 0) ++p;
    runs.push_back(start);
    runs.push_back(p - start);
  }
  return runs;
}

nlohmann::json rle_encode(const SliceMask& mask) {
  return {{"shape", {mask.height(), mask.width()}}, {"runs", rle_runs(mask)}};
}

SliceMask rle_decode(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("shape") || !doc.contains("runs")) {
    throw RleError("RLE document needs \"shape\" and \"runs\"");
  }
  const auto& shape = doc["shape"];
  const auto& runs = doc["runs"];
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_integer() ||
      !shape[1].is_number_integer()) {
    throw RleError("RLE shape must be [H, W]");
  }
  const auto h = shape[0].get<std::int64_t>();
  const auto w = shape[1].get<std::int64_t>();
  if (h < 0 || w < 0 || h > (1 << 16) || w > (1 << 16)) throw RleError("RLE shape out of range");
  if (!runs.is_array() || runs.size() % 2 != 0) {
    throw RleError("RLE runs must be an even-length array");
  }
  SliceMask m(Shape2D{static_cast<int>(h), static_cast<int>(w)}, 0);
  const std::int64_t n = h * w;
  std::int64_t end = -1;
  for (std::size_t r = 0; r < runs.size(); r += 2) {
    if (!runs[r].is_number_integer() || !runs[r + 1].is_number_integer()) {
      throw RleError("RLE runs must be integers");
    }
    const auto start = runs[r].get<std::int64_t>();
    const auto len = runs[r + 1].get<std::int64_t>();
    if (len <= 0) throw RleError("RLE run with non-positive length");
    if (start <= end) throw RleError("RLE runs overlap, touch or are out of order");
    if (start < 0 || start + len > n) throw RleError("RLE run exceeds the mask");
    for (std::int64_t p = start; p < start + len; ++p) m.values()[static_cast<std::size_t>(p)] = 1;
    end = start + len;
  }
  return m;
}

}  // namespace lungseg
