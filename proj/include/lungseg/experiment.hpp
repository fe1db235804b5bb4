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

// Batch experiments over a manifest. A report directory holds
//   per_scan.csv   scan_id,patient_id,status,iou,n_pos,n_neg,n_erase,feedback_score
//   summary.json   IoU statistics, cumulative feedback counts and score, failures
//   curves.csv     iteration,mean_iou,cumulative_feedback_score
//   sessions/<scan_id>.jsonl and masks/<scan_id>.lvol

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lungseg/loop_runner.hpp"
#include "lungseg/split.hpp"

namespace lungseg {

struct SegmenterParams {
  ThresholdConfig threshold;
  ConservativeConfig conservative;
  double oracle_budget = kUnlimitedBudget;
  std::chrono::milliseconds plugin_timeout{30000};
};

struct BoundSegmenters {
  std::shared_ptr<InitialSegmenter> initial;
  std::shared_ptr<RefinementSegmenter> refinement;
  Segmenters raw() const { return {initial.get(), refinement.get()}; }
};

// Names accepted: threshold (initial only), conservative, oracle, null,
// plugin:COMMAND. The initial half of conservative/oracle is the threshold
// segmenter.
class SegmenterBinding {
 public:
  // Throws std::invalid_argument for an unknown name. Starts the plug-in
  // process for plugin bindings.
  static SegmenterBinding parse(const std::string& name, const SegmenterParams& params = {});

  // Throws std::invalid_argument when the binding needs ground truth and gt is null.
  BoundSegmenters bind(std::shared_ptr<const MaskVolume> gt) const;

  const std::string& name() const { return name_; }
  bool needs_ground_truth() const { return kind_ == Kind::oracle; }
  bool serial_only() const { return kind_ == Kind::plugin; }

 private:
  enum class Kind { threshold, conservative, oracle, null, plugin };
  Kind kind_ = Kind::threshold;
  std::string name_;
  SegmenterParams params_;
  std::shared_ptr<InitialSegmenter> shared_initial_;
  std::shared_ptr<RefinementSegmenter> shared_refinement_;
};

struct ExperimentConfig {
  SystemSpec system;
  std::string segmenter = "conservative";
  SegmenterParams params;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> split_file;  // test ids are run; all scans otherwise
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  SplitSpec split;
};

// Relative paths resolve against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ScanOutcome {
  std::string scan_id;
  std::string patient_id;
  bool ok = false;
  std::string error;
  double iou = 0.0;
  FeedbackLedger ledger;
  SessionLog log;
};

struct ExperimentReport {
  std::vector<ScanOutcome> scans;
  std::optional<IoUStats> stats;  // over successful scans
  FeedbackLedger total;
  std::vector<CurveRow> curves;
  bool partial = false;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const std::filesystem::path& config_file);

// Recomputes statistics and curves from a report directory's session logs.
ExperimentReport evaluate_report(const std::filesystem::path& dir);
nlohmann::json summary_json(const ExperimentReport& r);

}  // namespace lungseg
