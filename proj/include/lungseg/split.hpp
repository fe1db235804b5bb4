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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lungseg/volume.hpp"

namespace lungseg {

// Patients are grouped, groups are binned by their largest relative
// foreground area (rank quantiles), and each bin is filled towards
// test_fraction of its scans.
struct SplitSpec {
  double test_fraction = 0.2;
  int n_bins = 5;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<std::string> train;  // scan ids, manifest order
  std::vector<std::string> test;
  std::vector<int> bin_of_scan;    // per manifest entry
};

// Throws std::invalid_argument for an empty manifest, fewer patient groups
// than bins, or a non-finite area.
SplitResult split_dataset(std::span<const ManifestEntry> manifest, const SplitSpec& spec = {});

// {"manifest": ..., "seed": ..., "test_fraction": ..., "train": [...], "test": [...]}
void write_split(const std::filesystem::path& path, const SplitResult& split,
                 const std::string& manifest, const SplitSpec& spec);

struct SplitFile {
  std::string manifest;
  SplitSpec spec;
  std::vector<std::string> train;
  std::vector<std::string> test;
};
SplitFile read_split(const std::filesystem::path& path);

}  // namespace lungseg
