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

#include <gtest/gtest.h>

#include <memory>

#include "lungseg/loop_runner.hpp"

using namespace lungseg;

namespace {

struct Case {
  std::shared_ptr<const Volume> volume;
  std::shared_ptr<const MaskVolume> gt;
};

Case phantom_case(std::uint64_t seed, PhantomSpec spec = {}) {
  Phantom p = generate_phantom(seed, spec, "ph" + std::to_string(seed));
  return {std::make_shared<const Volume>(std::move(p.volume)),
          std::make_shared<const MaskVolume>(std::move(p.mask))};
}

SystemSpec spec_with(Topology t, int iterations) {
  SystemSpec s;
  s.topology = t;
  s.iterations = iterations;
  return s;
}

}  // namespace

TEST(SystemSpec, ValidatesBindingsAndIterations) {
  EXPECT_NO_THROW(spec_with(Topology::system1_noninteractive, 0).validate(true, false));
  EXPECT_THROW(spec_with(Topology::system1_noninteractive, 2).validate(true, false), std::invalid_argument);
  EXPECT_THROW(spec_with(Topology::system2_cold_start, 1).validate(true, false), std::invalid_argument);
  EXPECT_THROW(spec_with(Topology::system2_cold_start, 0).validate(false, true), std::invalid_argument);
  EXPECT_THROW(spec_with(Topology::system3_init_plus_refine, 1).validate(false, true), std::invalid_argument);
  EXPECT_NO_THROW(spec_with(Topology::system3_init_plus_refine, 0).validate(true, true));
}

TEST(System1, NullSegmenterGivesEmptyPredictionAndLedger) {
  const Case c = phantom_case(1);
  NullSegmenter null;
  const RunResult r = run_system1(c.volume, null, {}, c.gt.get());
  EXPECT_EQ(r.pred.foreground_count(), 0u);
  EXPECT_EQ(feedback_score(r.ledger), 0.0);
  ASSERT_EQ(r.log.iterations.size(), 1u);  // iteration 0 only
  EXPECT_TRUE(r.log.iterations[0].actions.empty());
}

TEST(System1, ThresholdFindsSomething) {
  const Case c = phantom_case(2);
  ThresholdSegmenter th;
  const RunResult r = run_system1(c.volume, th, {}, c.gt.get());
  EXPECT_GT(scan_iou(*c.gt, r.pred), 0.0);
}

TEST(System3, ZeroIterationsEqualsSystem1) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Case c = phantom_case(seed);
    ThresholdSegmenter th;
    ConservativeRefiner cons;
    const RunResult s1 = run_system1(c.volume, th, {});
    const RunResult s3 =
        run_system3(c.volume, *c.gt, th, cons, spec_with(Topology::system3_init_plus_refine, 0), 7);
    EXPECT_TRUE(s1.pred.same_voxels(s3.pred));
  }
}

TEST(System3, SpuriousBlobOnEmptySliceIsErasedFirst) {
  PhantomSpec spec;
  spec.lesions = std::vector<Ellipsoid>{{20, 20, 8, 5, 5, 1.5}};
  spec.max_distractors = 0;
  Phantom p = generate_phantom(3, spec, "blob");
  // A bright blob on slice 2, far from the lesion.
  for (int i = 40; i < 46; ++i)
    for (int j = 40; j < 46; ++j) p.volume.voxels[p.volume.offset(i, j, 2)] = 40;
  auto volume = std::make_shared<const Volume>(p.volume);
  ThresholdSegmenter th;
  ConservativeRefiner cons;
  const RunResult r =
      run_system3(volume, p.mask, th, cons, spec_with(Topology::system3_init_plus_refine, 1), 1);
  ASSERT_EQ(r.log.iterations.size(), 2u);
  bool erased = false;
  for (const auto& a : r.log.iterations[1].actions) {
    if (a.slice == 2) {
      EXPECT_EQ(a.kind, ActionKind::erase);
      erased = true;
    }
  }
  EXPECT_TRUE(erased);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) EXPECT_EQ(r.pred.at(i, j, 2), 0);
  EXPECT_GE(r.ledger.n_erasures, 1);
}

TEST(System3, OracleRefinerNeverLowersIoU) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Case c = phantom_case(100 + seed);
    ThresholdSegmenter th;
    OracleRefiner oracle(c.gt);
    const RunResult r =
        run_system3(c.volume, *c.gt, th, oracle, spec_with(Topology::system3_init_plus_refine, 6), seed);
    for (std::size_t t = 1; t < r.log.iterations.size(); ++t) {
      EXPECT_GE(*r.log.iterations[t].iou, *r.log.iterations[t - 1].iou);
    }
    EXPECT_GT(*r.log.iterations.back().iou, 0.9);
  }
}

TEST(System3, UntouchedSlicesCarryTheirMaskForward) {
  const Case c = phantom_case(5);
  ThresholdSegmenter th;
  ConservativeRefiner cons;
  const RunResult r =
      run_system3(c.volume, *c.gt, th, cons, spec_with(Topology::system3_init_plus_refine, 4), 3);
  for (std::size_t t = 1; t < r.log.iterations.size(); ++t) {
    std::vector<bool> touched(16, false);
    for (const auto& a : r.log.iterations[t].actions) touched[a.slice] = true;
    for (int k = 0; k < 16; ++k) {
      if (!touched[k]) {
        EXPECT_EQ(r.log.iterations[t].digests[k], r.log.iterations[t - 1].digests[k]);
      }
    }
  }
}

TEST(System3, CumulativeScoreNeverDecreases) {
  const Case c = phantom_case(6);
  ThresholdSegmenter th;
  ConservativeRefiner cons;
  const RunResult r =
      run_system3(c.volume, *c.gt, th, cons, spec_with(Topology::system3_init_plus_refine, 5), 3);
  for (std::size_t t = 1; t < r.log.iterations.size(); ++t) {
    EXPECT_GE(feedback_score(r.log.iterations[t].cumulative),
              feedback_score(r.log.iterations[t - 1].cumulative));
  }
}

TEST(System2, StartsEmptyAndUsesOnlyPositiveClicks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Case c = phantom_case(200 + seed);
    ConservativeRefiner cons;
    const RunResult r = run_system2(c.volume, *c.gt, cons, spec_with(Topology::system2_cold_start, 4), seed);
    EXPECT_EQ(r.log.iterations[0].iou, 0.0);
    EXPECT_EQ(r.ledger.n_negative, 0);
    EXPECT_EQ(r.ledger.n_erasures, 0);
    EXPECT_GT(r.ledger.n_positive, 0);
    // First round: one cold-start click per lesion slice.
    int lesion_slices = 0;
    for (int k = 0; k < 16; ++k) lesion_slices += c.gt->slice_has_foreground(k);
    EXPECT_EQ(static_cast<int>(r.log.iterations[1].actions.size()), lesion_slices);
  }
}

TEST(System2, EmptyTruthNeverClicks) {
  PhantomSpec spec;
  spec.lesions = std::vector<Ellipsoid>{};
  spec.max_distractors = 0;
  Phantom p = generate_phantom(1, spec, "empty");
  auto volume = std::make_shared<const Volume>(p.volume);
  ConservativeRefiner cons;
  const RunResult r = run_system2(volume, p.mask, cons, spec_with(Topology::system2_cold_start, 3), 1);
  EXPECT_EQ(r.pred.foreground_count(), 0u);
  EXPECT_EQ(feedback_score(r.ledger), 0.0);
  EXPECT_EQ(*r.log.iterations.back().iou, 1.0);
}

TEST(System2, OracleRefinerSlicesNeverRegress) {
  const Case c = phantom_case(300);
  OracleRefiner oracle(c.gt);
  const RunResult r = run_system2(c.volume, *c.gt, oracle, spec_with(Topology::system2_cold_start, 5), 1);
  for (std::size_t t = 1; t < r.log.iterations.size(); ++t) {
    EXPECT_GE(*r.log.iterations[t].iou, *r.log.iterations[t - 1].iou);
  }
}

TEST(InteractiveScan, EraseZeroesSliceAndDropsItsClicks) {
  const Case c = phantom_case(7);
  ThresholdSegmenter th;
  ConservativeRefiner cons;
  InteractiveScan scan(c.volume, spec_with(Topology::system3_init_plus_refine, 1), {&th, &cons}, 1);
  scan.initialize();
  EXPECT_EQ(scan.apply(FeedbackAction::click(4, {1, 1}, Polarity::positive)), ApplyStatus::applied);
  EXPECT_EQ(scan.pending().count(4), 1u);
  EXPECT_EQ(scan.apply(FeedbackAction::erase(4)), ApplyStatus::applied);
  EXPECT_EQ(scan.cache().count(4, Polarity::positive), 0);
  EXPECT_TRUE(scan.pending().empty());
  EXPECT_FALSE(scan.masks().slice_has_foreground(4));
  EXPECT_EQ(scan.ledger().n_erasures, 1);
  EXPECT_EQ(scan.ledger().n_positive, 1);
}

TEST(InteractiveScan, CapAndDuplicateLeaveLedgerUnchanged) {
  const Case c = phantom_case(8);
  NullSegmenter null;
  InteractiveScan scan(c.volume, spec_with(Topology::system3_init_plus_refine, 1), {&null, &null}, 1);
  scan.initialize();
  for (int n = 0; n < 12; ++n) {
    ASSERT_EQ(scan.apply(FeedbackAction::click(0, {n, 0}, Polarity::positive)), ApplyStatus::applied);
  }
  EXPECT_EQ(scan.apply(FeedbackAction::click(0, {20, 0}, Polarity::positive)), ApplyStatus::cap);
  EXPECT_EQ(scan.apply(FeedbackAction::click(0, {0, 0}, Polarity::positive)), ApplyStatus::duplicate);
  EXPECT_EQ(scan.ledger().n_positive, 12);
}

TEST(InteractiveScan, SegmenterFailureNamesScanAndSlice) {
  struct Broken : RefinementSegmenter {
    FloatPlane refine(const RefineRequest&) override { return FloatPlane({1, 1}, 0.0f); }
  } broken;
  const Case c = phantom_case(9);
  ThresholdSegmenter th;
  InteractiveScan scan(c.volume, spec_with(Topology::system3_init_plus_refine, 1), {&th, &broken}, 1);
  scan.initialize();
  scan.apply(FeedbackAction::click(3, {5, 5}, Polarity::positive));
  try {
    scan.refine_pending();
    FAIL();
  } catch (const SegmenterFailure& e) {
    EXPECT_EQ(e.slice(), 3);
    EXPECT_EQ(e.scan_id(), "ph9");
  }
}

TEST(Replay, ReproducesBatchMasks) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Case c = phantom_case(400 + seed);
    ThresholdSegmenter th;
    ConservativeRefiner cons;
    const SystemSpec spec = spec_with(Topology::system3_init_plus_refine, 4);
    const RunResult r = run_system3(c.volume, *c.gt, th, cons, spec, 5);
    const MaskVolume replayed = replay_session(r.log, c.volume, {&th, &cons}, spec, 5);
    EXPECT_TRUE(replayed.same_voxels(r.pred));
  }
}

TEST(Replay, ResetsReplayWithTheSameSeed) {
  const Case c = phantom_case(11);
  ThresholdSegmenter th;
  ConservativeRefiner cons;
  SystemSpec spec = spec_with(Topology::system3_init_plus_refine, 5);
  spec.clicks.reset_probability = 0.5;
  const RunResult r = run_system3(c.volume, *c.gt, th, cons, spec, 77);
  const MaskVolume replayed = replay_session(r.log, c.volume, {&th, &cons}, spec, 77);
  EXPECT_TRUE(replayed.same_voxels(r.pred));
}

TEST(SessionSeed, DependsOnScanAndGlobalSeed) {
  EXPECT_EQ(session_seed(1, "a"), session_seed(1, "a"));
  EXPECT_NE(session_seed(1, "a"), session_seed(1, "b"));
  EXPECT_NE(session_seed(1, "a"), session_seed(2, "a"));
}
