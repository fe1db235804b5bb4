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

#include "lungseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "lungseg/kernels.hpp"
#include "lungseg/session_log.hpp"

namespace lungseg {

double scan_iou(const MaskVolume& gt, const MaskVolume& pred) {
  if (gt.dims != pred.dims || gt.voxels.size() != pred.voxels.size()) {
    throw std::invalid_argument("scan_iou: dims mismatch");
  }
  const auto c = kernels::count_overlap(gt.voxels, pred.voxels);
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

double slice_iou(const SliceMask& gt, const SliceMask& pred) {
  if (gt.shape() != pred.shape()) throw std::invalid_argument("slice_iou: shape mismatch");
  const auto c = kernels::count_overlap_serial(gt.values(), pred.values());
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty list");
  const double rank = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

int histogram_bin(double iou) {
  const int b = static_cast<int>(std::floor(iou / 0.05 + 1e-9));
  return std::clamp(b, 0, kHistogramBins - 1);
}

IoUStats iou_stats(std::vector<std::pair<std::string, double>> per_scan) {
  if (per_scan.empty()) throw std::invalid_argument("iou_stats: empty list");
  IoUStats s;
  std::vector<double> v;
  v.reserve(per_scan.size());
  for (const auto& [id, iou] : per_scan) {
    if (!(iou >= 0.0 && iou <= 1.0)) throw std::invalid_argument("iou outside [0,1] for " + id);
    v.push_back(iou);
    ++s.histogram[static_cast<std::size_t>(histogram_bin(iou))];
  }
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.per_scan = std::move(per_scan);
  return s;
}

double feedback_score(const FeedbackLedger& l) {
  return static_cast<double>(l.n_positive) * l.weights.positive +
         static_cast<double>(l.n_negative) * l.weights.negative +
         static_cast<double>(l.n_erasures) * l.weights.erase;
}

std::vector<CurveRow> iteration_curves(std::span<const SessionLog> logs, FeedbackWeights weights) {
  if (logs.empty()) throw std::invalid_argument("iteration_curves: no session logs");
  const std::size_t n_iter = logs.front().iterations.size();
  if (n_iter == 0) throw std::invalid_argument("iteration_curves: logs cover no iteration");
  std::vector<CurveRow> rows(n_iter);
  for (const SessionLog& log : logs) {
    if (log.iterations.size() != n_iter) {
      throw std::invalid_argument("iteration_curves: sessions disagree on iteration count (" +
                                  log.scan_id + ")");
    }
    for (std::size_t t = 0; t < n_iter; ++t) {
      const IterationRecord& rec = log.iterations[t];
      if (!rec.has_summary || !rec.iou) {
        throw std::invalid_argument("iteration_curves: iteration " + std::to_string(t) + " of " +
                                    log.scan_id + " has no IoU summary");
      }
      FeedbackLedger l = rec.cumulative;
      l.weights = weights;
      rows[t].mean_iou += *rec.iou;
      rows[t].feedback_score += feedback_score(l);
    }
  }
  for (std::size_t t = 0; t < n_iter; ++t) {
    rows[t].iteration = static_cast<int>(t);
    rows[t].mean_iou /= static_cast<double>(logs.size());
  }
  return rows;
}

void write_curves_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << "iteration,mean_iou,cumulative_feedback_score\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.4f\n", r.iteration, r.mean_iou, r.feedback_score);
    os << buf;
  }
}

}  // namespace lungseg
