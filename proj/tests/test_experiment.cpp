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

#include <fstream>
#include <sstream>

#include "lungseg/experiment.hpp"
#include "test_util.hpp"

using namespace lungseg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig config_for(const fs::path& data, const fs::path& out, Topology t, int iterations,
                            const std::string& segmenter) {
  ExperimentConfig c;
  c.system.topology = t;
  c.system.iterations = iterations;
  c.segmenter = segmenter;
  c.manifest = data / "manifest.json";
  c.out_dir = out;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(Experiment, System1ReportHasOneRowPerScan) {
  testutil::TempDir dir;
  write_phantom_dataset(dir.path() / "data", 5, 1);
  const auto cfg =
      config_for(dir.path() / "data", dir.path() / "out", Topology::system1_noninteractive, 0,
                 "threshold");
  const ExperimentReport r = run_experiment(cfg);
  ASSERT_EQ(r.scans.size(), 5u);
  EXPECT_FALSE(r.partial);
  ASSERT_TRUE(r.stats);
  EXPECT_EQ(feedback_score(r.total), 0.0);
  ASSERT_EQ(r.curves.size(), 1u);

  std::ifstream csv(dir.path() / "out" / "per_scan.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "scan_id,patient_id,status,iou,n_pos,n_neg,n_erase,feedback_score");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 5);
  for (const auto& s : r.scans) {
    EXPECT_TRUE(fs::exists(dir.path() / "out" / "masks" / (s.scan_id + ".lvol")));
    EXPECT_TRUE(fs::exists(dir.path() / "out" / "sessions" / (s.scan_id + ".jsonl")));
  }
  const auto summary = nlohmann::json::parse(slurp(dir.path() / "out" / "summary.json"));
  EXPECT_EQ(summary["system"], "system1");
  EXPECT_EQ(summary["n_ok"], 5);
}

TEST(Experiment, CurvesHaveOneRowPerIteration) {
  testutil::TempDir dir;
  write_phantom_dataset(dir.path() / "data", 4, 2);
  const auto cfg = config_for(dir.path() / "data", dir.path() / "out",
                              Topology::system3_init_plus_refine, 3, "conservative");
  const ExperimentReport r = run_experiment(cfg);
  ASSERT_EQ(r.curves.size(), 4u);
  for (std::size_t t = 1; t < r.curves.size(); ++t) {
    EXPECT_GE(r.curves[t].feedback_score, r.curves[t - 1].feedback_score);
  }
  EXPECT_DOUBLE_EQ(r.curves.back().feedback_score, feedback_score(r.total));
}

TEST(Experiment, RerunIsByteIdentical) {
  testutil::TempDir dir;
  write_phantom_dataset(dir.path() / "data", 4, 3);
  auto cfg = config_for(dir.path() / "data", dir.path() / "a", Topology::system3_init_plus_refine,
                        3, "conservative");
  cfg.system.clicks.reset_probability = 0.3;
  run_experiment(cfg);
  cfg.out_dir = dir.path() / "b";
  run_experiment(cfg);
  for (const char* f : {"per_scan.csv", "summary.json", "curves.csv"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
  }
  for (const auto& e : fs::directory_iterator(dir.path() / "a" / "masks")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir.path() / "b" / "masks" / e.path().filename()));
  }
}

TEST(Experiment, CorruptScanMakesReportPartial) {
  testutil::TempDir dir;
  const auto entries = write_phantom_dataset(dir.path() / "data", 3, 4);
  {
    std::ofstream bad(dir.path() / "data" / entries[1].volume_path, std::ios::binary | std::ios::trunc);
    bad << "not a volume";
  }
  const auto cfg = config_for(dir.path() / "data", dir.path() / "out",
                              Topology::system3_init_plus_refine, 2, "conservative");
  const ExperimentReport r = run_experiment(cfg);
  EXPECT_TRUE(r.partial);
  EXPECT_FALSE(r.scans[1].ok);
  EXPECT_FALSE(r.scans[1].error.empty());
  EXPECT_TRUE(r.scans[0].ok);
  EXPECT_TRUE(r.scans[2].ok);
  const auto summary = nlohmann::json::parse(slurp(dir.path() / "out" / "summary.json"));
  EXPECT_TRUE(summary["partial"].get<bool>());
  ASSERT_EQ(summary["failures"].size(), 1u);
  EXPECT_EQ(summary["failures"][0]["scan_id"], entries[1].scan_id);
}

TEST(Experiment, EvaluateReportMatchesTheRun) {
  testutil::TempDir dir;
  write_phantom_dataset(dir.path() / "data", 4, 5);
  const auto cfg = config_for(dir.path() / "data", dir.path() / "out",
                              Topology::system2_cold_start, 3, "conservative");
  const ExperimentReport r = run_experiment(cfg);
  const ExperimentReport e = evaluate_report(dir.path() / "out");
  ASSERT_TRUE(r.stats && e.stats);
  EXPECT_NEAR(e.stats->mean, r.stats->mean, 1e-9);
  EXPECT_EQ(e.total.n_positive, r.total.n_positive);
  EXPECT_EQ(e.total.n_erasures, r.total.n_erasures);
  ASSERT_EQ(e.curves.size(), r.curves.size());
  for (std::size_t t = 0; t < e.curves.size(); ++t) {
    EXPECT_NEAR(e.curves[t].mean_iou, r.curves[t].mean_iou, 1e-9);
  }
}

TEST(Experiment, SplitFileRestrictsToTestScans) {
  testutil::TempDir dir;
  const auto entries = write_phantom_dataset(dir.path() / "data", 10, 6);
  SplitSpec spec;
  spec.test_fraction = 0.3;
  const SplitResult split = split_dataset(entries, spec);
  write_split(dir.path() / "split.json", split, (dir.path() / "data" / "manifest.json").string(), spec);
  auto cfg = config_for(dir.path() / "data", dir.path() / "out", Topology::system1_noninteractive,
                        0, "threshold");
  cfg.split_file = dir.path() / "split.json";
  const ExperimentReport r = run_experiment(cfg);
  ASSERT_EQ(r.scans.size(), split.test.size());
}

TEST(Experiment, InvalidBindingsAreRejectedUpFront) {
  testutil::TempDir dir;
  write_phantom_dataset(dir.path() / "data", 1, 7);
  auto cfg = config_for(dir.path() / "data", dir.path() / "out", Topology::system2_cold_start, 2,
                        "threshold");
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
  cfg.segmenter = "no-such-model";
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
  cfg.segmenter = "conservative";
  cfg.system.topology = Topology::system1_noninteractive;
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c;
  c.system.topology = Topology::system2_cold_start;
  c.system.iterations = 7;
  c.system.clicks.max_per_polarity = 5;
  c.system.clicks.reset_probability = 0.25;
  c.system.expert.d0 = 42.0;
  c.params.conservative.tau = 0.05;
  c.params.oracle_budget = 12.0;
  c.segmenter = "oracle";
  c.manifest = "/data/manifest.json";
  c.out_dir = "/tmp/out";
  c.seed = 123;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.system.iterations, 7);
  EXPECT_EQ(back.params.oracle_budget, 12.0);
}

TEST(ExperimentConfig, RelativePathsResolveAgainstTheConfigFile) {
  testutil::TempDir dir;
  {
    std::ofstream out(dir.path() / "cfg.json");
    out << R"({"manifest":"data/manifest.json","out_dir":"out","segmenter":"null"})";
  }
  const ExperimentConfig c = load_config(dir.path() / "cfg.json");
  EXPECT_EQ(c.manifest, dir.path() / "data" / "manifest.json");
  EXPECT_EQ(c.out_dir, dir.path() / "out");
  EXPECT_EQ(c.segmenter, "null");
}

TEST(SegmenterBinding, OracleNeedsGroundTruth) {
  const auto b = SegmenterBinding::parse("oracle");
  EXPECT_TRUE(b.needs_ground_truth());
  EXPECT_THROW(b.bind(nullptr), std::invalid_argument);
  EXPECT_FALSE(SegmenterBinding::parse("conservative").needs_ground_truth());
  EXPECT_THROW(SegmenterBinding::parse("bogus"), std::invalid_argument);
}
