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
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "lungseg/click_engine.hpp"
#include "lungseg/expert_sim.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/segmenters.hpp"
#include "lungseg/session_log.hpp"
#include "lungseg/volume.hpp"

namespace lungseg {

struct SystemSpec {
  Topology topology = Topology::system3_init_plus_refine;
  int iterations = 3;
  ExpertConfig expert;
  ClickCacheConfig clicks;
  ClickEncoding encoding;
  IntensityWindow window;
  int window_radius = 2;
  BinarizeRule binarize;

  // Throws std::invalid_argument when the topology/iteration/binding combination is invalid.
  void validate(bool has_initial, bool has_refinement) const;
};

struct Segmenters {
  InitialSegmenter* initial = nullptr;
  RefinementSegmenter* refinement = nullptr;
};

// Failure of a segmenter or plug-in, tagged with where it happened.
class SegmenterFailure : public std::runtime_error {
 public:
  SegmenterFailure(const std::string& scan_id, int slice, const std::string& what)
      : std::runtime_error("scan " + scan_id + ", slice " + std::to_string(slice) + ": " + what),
        scan_id_(scan_id),
        slice_(slice) {}
  const std::string& scan_id() const { return scan_id_; }
  int slice() const { return slice_; }

 private:
  std::string scan_id_;
  int slice_;
};

enum class ApplyStatus { applied, cap, duplicate, ignored };

// Mutable state of one interactive segmentation of one scan. Batch runs and
// HTTP sessions both drive it, so both follow the same transition rules:
//  - erase zeroes the slice mask (and drops that slice's clicks) immediately;
//  - accepted clicks mark their slice pending;
//  - refine_pending() re-runs the refiner on pending slices only, every other
//    slice keeps its previous mask.
class InteractiveScan {
 public:
  InteractiveScan(std::shared_ptr<const Volume> volume, SystemSpec spec, Segmenters segs,
                  std::uint64_t session_seed);

  // Systems 1/3: binarized initial predictions. System 2: all-zero masks.
  void initialize();

  ApplyStatus apply(const FeedbackAction& action);
  // Returns the refined slices in ascending order; advances the iteration counter.
  std::vector<int> refine_pending();

  SliceWindow window(int k) const;
  const MaskVolume& masks() const { return masks_; }
  const ClickCache& cache() const { return cache_; }
  ClickCache& cache() { return cache_; }
  const FeedbackLedger& ledger() const { return ledger_; }
  const std::set<int>& pending() const { return pending_; }
  int iteration() const { return iteration_; }
  int n_slices() const { return volume_->dims.n_slices; }
  const Volume& volume() const { return *volume_; }
  const SystemSpec& spec() const { return spec_; }
  std::vector<std::string> digests() const;

 private:
  std::shared_ptr<const Volume> volume_;
  SystemSpec spec_;
  Segmenters segs_;
  std::vector<FloatPlane> normalized_;
  MaskVolume masks_;
  ClickCache cache_;
  FeedbackLedger ledger_;
  std::set<int> pending_;
  int iteration_ = 0;
};

struct RunResult {
  MaskVolume pred;
  SessionLog log;
  FeedbackLedger ledger;
};

// Summary of the scan's current state, stamped with its iteration counter.
IterationRecord record_iteration(const InteractiveScan& scan, const MaskVolume* gt,
                                 std::vector<FeedbackAction> actions);

// Expert actions for every slice of one feedback round (index-aligned with slices).
std::vector<FeedbackAction> expert_round(const InteractiveScan& scan, const MaskVolume& gt,
                                         bool cold);

RunResult run_system1(std::shared_ptr<const Volume> volume, InitialSegmenter& initial,
                      const SystemSpec& spec, const MaskVolume* gt = nullptr);
RunResult run_system2(std::shared_ptr<const Volume> volume, const MaskVolume& gt,
                      RefinementSegmenter& refinement, const SystemSpec& spec,
                      std::uint64_t session_seed);
RunResult run_system3(std::shared_ptr<const Volume> volume, const MaskVolume& gt,
                      InitialSegmenter& initial, RefinementSegmenter& refinement,
                      const SystemSpec& spec, std::uint64_t session_seed);
// Dispatches on spec.topology.
RunResult run_session(std::shared_ptr<const Volume> volume, const MaskVolume* gt, Segmenters segs,
                      const SystemSpec& spec, std::uint64_t session_seed);

// Re-applies a recorded action sequence, one refine round per logged iteration.
MaskVolume replay_session(const SessionLog& log, std::shared_ptr<const Volume> volume,
                          Segmenters segs, SystemSpec spec, std::uint64_t session_seed = 0);

// Per-session RNG seed derived from the global seed and the scan id.
std::uint64_t session_seed(std::uint64_t global_seed, const std::string& scan_id);

}  // namespace lungseg
