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

#include "lungseg/loop_runner.hpp"

#include <algorithm>
#include <stdexcept>

#include "lungseg/kernels.hpp"
#include "parallel.hpp"

namespace lungseg {

void SystemSpec::validate(bool has_initial, bool has_refinement) const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (window_radius < 0) throw std::invalid_argument("window_radius must be >= 0");
  if (clicks.max_per_polarity < 1) throw std::invalid_argument("click cap must be >= 1");
  if (!(clicks.reset_probability >= 0.0 && clicks.reset_probability <= 1.0)) {
    throw std::invalid_argument("reset probability must lie in [0,1]");
  }
  if (!(encoding.sigma > 0.0) || !(encoding.clip_radius > 0.0)) {
    throw std::invalid_argument("click encoding needs sigma > 0 and clip radius > 0");
  }
  if (!(window.hi > window.lo)) throw std::invalid_argument("intensity window must have hi > lo");
  switch (topology) {
    case Topology::system1_noninteractive:
      if (!has_initial) throw std::invalid_argument("system1 needs an initial segmenter");
      if (iterations != 0) throw std::invalid_argument("system1 runs no feedback iterations");
      break;
    case Topology::system2_cold_start:
      if (!has_refinement) throw std::invalid_argument("system2 needs a refinement segmenter");
      if (iterations < 1) throw std::invalid_argument("system2 needs at least one iteration");
      break;
    case Topology::system3_init_plus_refine:
      if (!has_initial || !has_refinement) {
        throw std::invalid_argument("system3 needs initial and refinement segmenters");
      }
      break;
  }
}

InteractiveScan::InteractiveScan(std::shared_ptr<const Volume> volume, SystemSpec spec,
                                 Segmenters segs, std::uint64_t session_seed)
    : volume_(std::move(volume)),
      spec_(std::move(spec)),
      segs_(segs),
      cache_(volume_ ? volume_->dims.n_slices : 0, volume_ ? volume_->dims.slice_shape() : Shape2D{},
             ClickCacheConfig{spec_.clicks.max_per_polarity, spec_.clicks.reset_probability,
                              session_seed}) {
  if (!volume_) throw std::invalid_argument("InteractiveScan: null volume");
  volume_->validate();
  spec_.validate(segs_.initial != nullptr, segs_.refinement != nullptr);
  const Dims d = volume_->dims;
  masks_ = MaskVolume(volume_->scan_id, d, volume_->spacing);
  normalized_.resize(static_cast<std::size_t>(d.n_slices));
  for (int k = 0; k < d.n_slices; ++k) {
    normalized_[static_cast<std::size_t>(k)] =
        preprocess_slice(volume_->slice(k), d.slice_shape(), spec_.window);
  }
}

SliceWindow InteractiveScan::window(int k) const {
  const int n = n_slices();
  if (k < 0 || k >= n) throw std::out_of_range("slice " + std::to_string(k) + " out of range");
  SliceWindow w;
  w.center_index = k;
  w.radius = spec_.window_radius;
  for (int o = -w.radius; o <= w.radius; ++o) {
    w.channels.push_back(normalized_[static_cast<std::size_t>(std::clamp(k + o, 0, n - 1))]);
  }
  return w;
}

void InteractiveScan::initialize() {
  std::fill(masks_.voxels.begin(), masks_.voxels.end(), std::uint8_t{0});
  cache_.clear();
  pending_.clear();
  ledger_ = FeedbackLedger{};
  iteration_ = 0;
  if (spec_.topology == Topology::system2_cold_start) return;
  const Shape2D shape = volume_->dims.slice_shape();
  detail::parallel_for(n_slices(), [&](std::ptrdiff_t idx) {
    const int k = static_cast<int>(idx);
    try {
      const FloatPlane prob = segs_.initial->predict(window(k));
      check_probability_plane(prob, shape);
      masks_.set_slice(k, binarize(prob, spec_.binarize));
    } catch (const std::exception& e) {
      throw SegmenterFailure(volume_->scan_id, k, std::string("initial prediction: ") + e.what());
    }
  });
}

ApplyStatus InteractiveScan::apply(const FeedbackAction& a) {
  if (a.slice < 0 || a.slice >= n_slices()) {
    throw std::out_of_range("slice " + std::to_string(a.slice) + " out of range");
  }
  switch (a.kind) {
    case ActionKind::none:
      return ApplyStatus::ignored;
    case ActionKind::erase: {
      masks_.set_slice(a.slice, SliceMask(volume_->dims.slice_shape(), 0));
      cache_.clear_slice(a.slice);
      pending_.erase(a.slice);
      ++ledger_.n_erasures;
      return ApplyStatus::applied;
    }
    case ActionKind::positive_click:
    case ActionKind::negative_click: {
      if (!a.position) throw std::invalid_argument("click without a position");
      const AddResult r = cache_.add(Click{a.slice, *a.position, a.polarity()});
      if (r == AddResult::cap) return ApplyStatus::cap;
      if (r == AddResult::duplicate) return ApplyStatus::duplicate;
      if (a.kind == ActionKind::positive_click) {
        ++ledger_.n_positive;
      } else {
        ++ledger_.n_negative;
      }
      pending_.insert(a.slice);
      return ApplyStatus::applied;
    }
  }
  return ApplyStatus::ignored;
}

std::vector<int> InteractiveScan::refine_pending() {
  std::vector<int> slices(pending_.begin(), pending_.end());
  pending_.clear();
  ++iteration_;
  if (slices.empty()) return slices;
  if (!segs_.refinement) throw std::logic_error("no refinement segmenter bound");
  const Shape2D shape = volume_->dims.slice_shape();
  std::vector<SliceMask> out(slices.size());
  detail::parallel_for(static_cast<std::ptrdiff_t>(slices.size()), [&](std::ptrdiff_t idx) {
    const int k = slices[static_cast<std::size_t>(idx)];
    try {
      const SliceWindow w = window(k);
      const SliceMask prev = masks_.slice(k);
      const auto [pos, neg] = masks_for_slice(cache_, k, spec_.encoding);
      const RefineRequest req{k,
                              w,
                              prev,
                              pos,
                              neg,
                              cache_.clicks(k, Polarity::positive),
                              cache_.clicks(k, Polarity::negative)};
      const FloatPlane prob = segs_.refinement->refine(req);
      check_probability_plane(prob, shape);
      out[static_cast<std::size_t>(idx)] = binarize(prob, spec_.binarize);
    } catch (const std::exception& e) {
      throw SegmenterFailure(volume_->scan_id, k, std::string("refinement: ") + e.what());
    }
  });
  for (std::size_t idx = 0; idx < slices.size(); ++idx) masks_.set_slice(slices[idx], out[idx]);
  return slices;
}

std::vector<std::string> InteractiveScan::digests() const {
  std::vector<std::string> d;
  d.reserve(static_cast<std::size_t>(n_slices()));
  for (int k = 0; k < n_slices(); ++k) d.push_back(mask_digest(masks_.slice_span(k)));
  return d;
}

std::vector<FeedbackAction> expert_round(const InteractiveScan& scan, const MaskVolume& gt,
                                         bool cold) {
  if (gt.dims != scan.volume().dims) {
    throw std::invalid_argument("ground truth dims do not match scan " + scan.volume().scan_id);
  }
  std::vector<FeedbackAction> actions(static_cast<std::size_t>(scan.n_slices()));
  detail::parallel_for(scan.n_slices(), [&](std::ptrdiff_t idx) {
    const int k = static_cast<int>(idx);
    const SliceMask g = gt.slice(k);
    actions[static_cast<std::size_t>(idx)] =
        cold ? cold_start(g, k, scan.spec().expert)
             : decide(g, scan.masks().slice(k), SliceClicks::from_cache(scan.cache(), k), k,
                      scan.spec().expert);
  });
  return actions;
}

IterationRecord record_iteration(const InteractiveScan& scan, const MaskVolume* gt,
                                 std::vector<FeedbackAction> actions) {
  IterationRecord rec;
  rec.t = scan.iteration();
  rec.actions = std::move(actions);
  if (gt) rec.iou = scan_iou(*gt, scan.masks());
  rec.cumulative = scan.ledger();
  rec.digests = scan.digests();
  rec.has_summary = true;
  return rec;
}

namespace {

RunResult finish(InteractiveScan& scan, SessionLog log) {
  RunResult r;
  r.pred = scan.masks();
  r.log = std::move(log);
  r.ledger = scan.ledger();
  return r;
}

}  // namespace

RunResult run_session(std::shared_ptr<const Volume> volume, const MaskVolume* gt, Segmenters segs,
                      const SystemSpec& spec, std::uint64_t seed) {
  InteractiveScan scan(volume, spec, segs, seed);
  SessionLog log;
  log.scan_id = volume->scan_id;
  log.topology = spec.topology;
  scan.initialize();
  log.iterations.push_back(record_iteration(scan, gt, {}));
  if (spec.topology == Topology::system1_noninteractive) return finish(scan, std::move(log));
  if (!gt) throw std::invalid_argument("interactive runs need a ground-truth mask");
  for (int t = 1; t <= spec.iterations; ++t) {
    scan.cache().maybe_reset();
    const bool cold = spec.topology == Topology::system2_cold_start && t == 1;
    std::vector<FeedbackAction> applied;
    for (const FeedbackAction& a : expert_round(scan, *gt, cold)) {
      if (a.kind == ActionKind::none) continue;
      if (scan.apply(a) == ApplyStatus::applied) applied.push_back(a);
    }
    scan.refine_pending();
    log.iterations.push_back(record_iteration(scan, gt, std::move(applied)));
  }
  return finish(scan, std::move(log));
}

RunResult run_system1(std::shared_ptr<const Volume> volume, InitialSegmenter& initial,
                      const SystemSpec& spec, const MaskVolume* gt) {
  SystemSpec s = spec;
  s.topology = Topology::system1_noninteractive;
  s.iterations = 0;
  return run_session(std::move(volume), gt, Segmenters{&initial, nullptr}, s, 0);
}

RunResult run_system2(std::shared_ptr<const Volume> volume, const MaskVolume& gt,
                      RefinementSegmenter& refinement, const SystemSpec& spec,
                      std::uint64_t seed) {
  SystemSpec s = spec;
  s.topology = Topology::system2_cold_start;
  return run_session(std::move(volume), &gt, Segmenters{nullptr, &refinement}, s, seed);
}

RunResult run_system3(std::shared_ptr<const Volume> volume, const MaskVolume& gt,
                      InitialSegmenter& initial, RefinementSegmenter& refinement,
                      const SystemSpec& spec, std::uint64_t seed) {
  SystemSpec s = spec;
  s.topology = Topology::system3_init_plus_refine;
  return run_session(std::move(volume), &gt, Segmenters{&initial, &refinement}, s, seed);
}

MaskVolume replay_session(const SessionLog& log, std::shared_ptr<const Volume> volume,
                          Segmenters segs, SystemSpec spec, std::uint64_t seed) {
  if (volume->scan_id != log.scan_id) {
    throw std::invalid_argument("session log is for scan " + log.scan_id + ", not " +
                                volume->scan_id);
  }
  spec.topology = log.topology;
  InteractiveScan scan(volume, spec, segs, seed);
  scan.initialize();
  for (const IterationRecord& rec : log.iterations) {
    if (rec.t == 0) {
      if (!rec.actions.empty()) throw std::invalid_argument("iteration 0 cannot carry actions");
      continue;
    }
    scan.cache().maybe_reset();
    for (const FeedbackAction& a : rec.actions) {
      if (scan.apply(a) != ApplyStatus::applied) {
        throw std::runtime_error("replay: logged action at t=" + std::to_string(rec.t) +
                                 ", slice " + std::to_string(a.slice) + " was rejected");
      }
    }
    scan.refine_pending();
  }
  return scan.masks();
}

std::uint64_t session_seed(std::uint64_t global_seed, const std::string& scan_id) {
  std::uint64_t h = 14695981039346656037ull ^ global_seed;
  for (unsigned char c : scan_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

}  // namespace lungseg
