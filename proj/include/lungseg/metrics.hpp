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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lungseg/image.hpp"
#include "lungseg/volume.hpp"

namespace lungseg {

struct SessionLog;

// IoU over all voxels of a scan; 1.0 when both masks are empty.
double scan_iou(const MaskVolume& gt, const MaskVolume& pred);
double slice_iou(const SliceMask& gt, const SliceMask& pred);

// Linear interpolation between closest ranks: rank = (n - 1) * q.
// `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double q);
double median(std::vector<double> values);

inline constexpr int kHistogramBins = 20;  // [0,1] in steps of 0.05

struct IoUStats {
  std::vector<std::pair<std::string, double>> per_scan;
  double mean = 0, median = 0, q1 = 0, q3 = 0;
  std::array<int, kHistogramBins> histogram{};
};

IoUStats iou_stats(std::vector<std::pair<std::string, double>> per_scan);
int histogram_bin(double iou);

struct FeedbackWeights {
  double positive = 1.0;
  double negative = 0.85;
  double erase = 0.75;
};

struct FeedbackLedger {
  std::int64_t n_positive = 0;
  std::int64_t n_negative = 0;
  std::int64_t n_erasures = 0;
  FeedbackWeights weights{};

  FeedbackLedger& operator+=(const FeedbackLedger& o) {
    n_positive += o.n_positive;
    n_negative += o.n_negative;
    n_erasures += o.n_erasures;
    return *this;
  }
  bool same_counts(const FeedbackLedger& o) const {
    return n_positive == o.n_positive && n_negative == o.n_negative &&
           n_erasures == o.n_erasures;
  }
};

// positive*1.0 + negative*0.85 + erasures*0.75 under the default weights.
double feedback_score(const FeedbackLedger& ledger);

struct CurveRow {
  int iteration = 0;
  double mean_iou = 0;
  double feedback_score = 0;  // cumulative, summed over sessions
};

// Throws std::invalid_argument on empty, ragged or IoU-less logs.
std::vector<CurveRow> iteration_curves(std::span<const SessionLog> logs,
                                       FeedbackWeights weights = {});

void write_curves_csv(std::ostream& os, std::span<const CurveRow> rows);

}  // namespace lungseg
