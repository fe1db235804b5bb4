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

// Run-length encoding of a slice mask over row-major flattening:
//   {"shape":[H,W],"runs":[start,length,start,length,...]}
// Runs are maximal, strictly increasing and non-overlapping.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "lungseg/image.hpp"

namespace lungseg {

class RleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::int64_t> rle_runs(const SliceMask& mask);
nlohmann::json rle_encode(const SliceMask& mask);
// Throws RleError for a malformed document: bad shape, zero-length,
// overlapping, unsorted or out-of-range runs.
SliceMask rle_decode(const nlohmann::json& doc);

}  // namespace lungseg
