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

// Session logs are JSONL, one event per line:
//   {"scan_id":"s1","topology":"system3","final_masks":"masks/s1.lvol"}   first line
//   {"t":1,"k":4,"action":"pos","i":10,"j":12}                            one per action
//   {"t":1,"summary":{"iou":0.8,"n_pos":3,"n_neg":0,"n_erase":1,"digests":[...]}}
// Iteration 0 is the state before any feedback.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lungseg/expert_sim.hpp"
#include "lungseg/metrics.hpp"

namespace lungseg {

enum class Topology { system1_noninteractive, system2_cold_start, system3_init_plus_refine };

std::string_view to_string(Topology t);  // "system1" / "system2" / "system3"
Topology topology_from_string(std::string_view s);  // also accepts "1"/"2"/"3"

struct IterationRecord {
  int t = 0;
  std::vector<FeedbackAction> actions;  // none-actions are not recorded
  std::optional<double> iou;
  FeedbackLedger cumulative;            // counts after this iteration
  std::vector<std::string> digests;     // per-slice mask digests after this iteration
  bool has_summary = false;
};

struct SessionLog {
  std::string scan_id;
  Topology topology = Topology::system3_init_plus_refine;
  std::string final_masks;
  std::vector<IterationRecord> iterations;
};

// 16-hex-digit FNV-1a of a slice mask.
std::string mask_digest(std::span<const std::uint8_t> mask);

void write_session_jsonl(std::ostream& os, const SessionLog& log);
// Throws std::runtime_error on malformed input.
SessionLog read_session_jsonl(std::istream& is);
SessionLog read_session_jsonl(const std::filesystem::path& path);

}  // namespace lungseg
