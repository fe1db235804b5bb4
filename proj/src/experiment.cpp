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

#include "lungseg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lungseg/plugin.hpp"
#include "parallel.hpp"

namespace lungseg {

namespace fs = std::filesystem;

SegmenterBinding SegmenterBinding::parse(const std::string& name, const SegmenterParams& params) {
  SegmenterBinding b;
  b.name_ = name;
  b.params_ = params;
  if (name == "threshold") {
    b.kind_ = Kind::threshold;
  } else if (name == "conservative") {
    b.kind_ = Kind::conservative;
  } else if (name == "oracle") {
    b.kind_ = Kind::oracle;
  } else if (name == "null") {
    b.kind_ = Kind::null;
  } else if (name.rfind("plugin:", 0) == 0 && name.size() > 7) {
    b.kind_ = Kind::plugin;
    auto client = std::make_shared<plugin::PluginClient>(name.substr(7), params.plugin_timeout);
    auto seg = std::make_shared<plugin::PluginSegmenter>(client);
    if (client->has_role("predict")) b.shared_initial_ = seg;
    if (client->has_role("refine")) b.shared_refinement_ = seg;
  } else {
    throw std::invalid_argument("unknown segmenter '" + name + "'");
  }
  return b;
}

BoundSegmenters SegmenterBinding::bind(std::shared_ptr<const MaskVolume> gt) const {
  BoundSegmenters s;
  switch (kind_) {
    case Kind::threshold:
      s.initial = std::make_shared<ThresholdSegmenter>(params_.threshold);
      break;
    case Kind::conservative:
      s.initial = std::make_shared<ThresholdSegmenter>(params_.threshold);
      s.refinement = std::make_shared<ConservativeRefiner>(params_.conservative);
      break;
    case Kind::oracle:
      if (!gt) throw std::invalid_argument("the oracle refiner needs a ground-truth mask");
      s.initial = std::make_shared<ThresholdSegmenter>(params_.threshold);
      s.refinement = std::make_shared<OracleRefiner>(std::move(gt), params_.oracle_budget);
      break;
    case Kind::null: {
      auto n = std::make_shared<NullSegmenter>();
      s.initial = n;
      s.refinement = n;
      break;
    }
    case Kind::plugin:
      s.initial = shared_initial_;
      s.refinement = shared_refinement_;
      break;
  }
  return s;
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

PolarityRule rule_from_string(const std::string& s) {
  if (s == "larger_error_area") return PolarityRule::larger_error_area;
  if (s == "false_negative_first") return PolarityRule::false_negative_first;
  throw std::invalid_argument("unknown polarity rule '" + s + "'");
}

std::string to_string(PolarityRule r) {
  return r == PolarityRule::larger_error_area ? "larger_error_area" : "false_negative_first";
}

Connectivity connectivity_from_int(int c) {
  if (c == 4) return Connectivity::four;
  if (c == 8) return Connectivity::eight;
  throw std::invalid_argument("connectivity must be 4 or 8");
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  if (j.contains("system")) {
    const auto& s = j["system"];
    c.system.topology = topology_from_string(s.value("topology", std::string("system3")));
    c.system.iterations = s.value("iterations", c.system.iterations);
    c.system.window_radius = s.value("window_radius", c.system.window_radius);
    c.system.binarize.threshold = s.value("binarize_threshold", c.system.binarize.threshold);
    if (s.contains("intensity_window")) {
      const auto w = s["intensity_window"].get<std::vector<double>>();
      if (w.size() != 2) throw std::invalid_argument("intensity_window must be [lo, hi]");
      c.system.window = {w[0], w[1]};
    }
  }
  if (j.contains("expert")) {
    const auto& e = j["expert"];
    c.system.expert.d0 = e.value("d0", c.system.expert.d0);
    if (e.contains("polarity_rule")) {
      c.system.expert.rule = rule_from_string(e["polarity_rule"].get<std::string>());
    }
    c.system.expert.connectivity = connectivity_from_int(e.value("connectivity", 8));
  }
  if (j.contains("clicks")) {
    const auto& k = j["clicks"];
    c.system.clicks.max_per_polarity = k.value("max_per_polarity", 12);
    c.system.clicks.reset_probability = k.value("reset_probability", 0.0);
    c.system.encoding.sigma = k.value("sigma", c.system.encoding.sigma);
    c.system.encoding.clip_radius = k.value("clip_radius", c.system.encoding.clip_radius);
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    c.split.test_fraction = s.value("test_fraction", c.split.test_fraction);
    c.split.n_bins = s.value("n_bins", c.split.n_bins);
    c.split.seed = s.value("seed", c.split.seed);
  }
  c.segmenter = j.value("segmenter", c.segmenter);
  if (j.contains("threshold")) {
    const auto& t = j["threshold"];
    c.params.threshold.level = t.value("level", c.params.threshold.level);
    c.params.threshold.min_area = t.value("min_area", c.params.threshold.min_area);
  }
  if (j.contains("conservative")) {
    const auto& t = j["conservative"];
    auto& cc = c.params.conservative;
    cc.growth_radius = t.value("growth_radius", cc.growth_radius);
    cc.tau = t.value("tau", cc.tau);
    cc.removal_radius = t.value("removal_radius", cc.removal_radius);
  }
  if (j.contains("oracle_budget") && !j["oracle_budget"].is_null()) {
    c.params.oracle_budget = j["oracle_budget"].get<double>();
  }
  if (j.contains("plugin_timeout_ms")) {
    c.params.plugin_timeout = std::chrono::milliseconds(j["plugin_timeout_ms"].get<int>());
  }
  c.seed = j.value("seed", c.seed);
  c.manifest = resolve(j.value("manifest", std::string()), base_dir);
  if (j.contains("split_file") && !j["split_file"].is_null()) {
    c.split_file = resolve(j["split_file"].get<std::string>(), base_dir);
  }
  c.out_dir = resolve(j.value("out_dir", std::string()), base_dir);
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["system"] = {{"topology", to_string(c.system.topology)},
                 {"iterations", c.system.iterations},
                 {"window_radius", c.system.window_radius},
                 {"binarize_threshold", c.system.binarize.threshold},
                 {"intensity_window", {c.system.window.lo, c.system.window.hi}}};
  j["expert"] = {{"d0", c.system.expert.d0},
                 {"polarity_rule", to_string(c.system.expert.rule)},
                 {"connectivity", static_cast<int>(c.system.expert.connectivity)}};
  j["clicks"] = {{"max_per_polarity", c.system.clicks.max_per_polarity},
                 {"reset_probability", c.system.clicks.reset_probability},
                 {"sigma", c.system.encoding.sigma},
                 {"clip_radius", c.system.encoding.clip_radius}};
  j["split"] = {{"test_fraction", c.split.test_fraction},
                {"n_bins", c.split.n_bins},
                {"seed", c.split.seed}};
  j["segmenter"] = c.segmenter;
  j["threshold"] = {{"level", c.params.threshold.level},
                    {"min_area", c.params.threshold.min_area}};
  j["conservative"] = {{"growth_radius", c.params.conservative.growth_radius},
                       {"tau", c.params.conservative.tau},
                       {"removal_radius", c.params.conservative.removal_radius}};
  j["oracle_budget"] = std::isfinite(c.params.oracle_budget) ? nlohmann::json(c.params.oracle_budget)
                                                             : nlohmann::json(nullptr);
  j["plugin_timeout_ms"] = c.params.plugin_timeout.count();
  j["seed"] = c.seed;
  j["manifest"] = c.manifest.string();
  j["split_file"] = c.split_file ? nlohmann::json(c.split_file->string()) : nlohmann::json(nullptr);
  j["out_dir"] = c.out_dir.string();
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(nlohmann::json::parse(in), path.parent_path());
}

nlohmann::json summary_json(const ExperimentReport& r) {
  nlohmann::json j;
  std::size_t ok = 0;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& s : r.scans) {
    if (s.ok) {
      ++ok;
    } else {
      failures.push_back({{"scan_id", s.scan_id}, {"error", s.error}});
    }
  }
  j["n_scans"] = r.scans.size();
  j["n_ok"] = ok;
  j["partial"] = r.partial;
  if (r.stats) {
    j["iou"] = {{"mean", r.stats->mean},
                {"median", r.stats->median},
                {"q1", r.stats->q1},
                {"q3", r.stats->q3},
                {"histogram", r.stats->histogram}};
  } else {
    j["iou"] = nullptr;
  }
  j["feedback"] = {{"n_pos", r.total.n_positive},
                   {"n_neg", r.total.n_negative},
                   {"n_erase", r.total.n_erasures},
                   {"score", feedback_score(r.total)}};
  j["failures"] = failures;
  return j;
}

namespace {

void finalize(ExperimentReport& r) {
  std::vector<std::pair<std::string, double>> ious;
  std::vector<SessionLog> logs;
  r.total = FeedbackLedger{};
  r.partial = false;
  for (const auto& s : r.scans) {
    if (!s.ok) {
      r.partial = true;
      continue;
    }
    ious.emplace_back(s.scan_id, s.iou);
    r.total += s.ledger;
    logs.push_back(s.log);
  }
  r.stats.reset();
  r.curves.clear();
  if (!ious.empty()) {
    r.stats = iou_stats(std::move(ious));
    r.curves = iteration_curves(logs);
  }
}

void write_report(const fs::path& dir, const ExperimentReport& r, const ExperimentConfig& cfg) {
  {
    std::ofstream out(dir / "per_scan.csv");
    out << "scan_id,patient_id,status,iou,n_pos,n_neg,n_erase,feedback_score\n";
    for (const auto& s : r.scans) {
      out << s.scan_id << "," << s.patient_id << "," << (s.ok ? "ok" : "failed") << ",";
      if (s.ok) {
        out << fmt(s.iou) << "," << s.ledger.n_positive << "," << s.ledger.n_negative << ","
            << s.ledger.n_erasures << "," << fmt(feedback_score(s.ledger), "%.4f");
      } else {
        out << ",,,,";
      }
      out << "\n";
    }
  }
  {
    nlohmann::json j = summary_json(r);
    j["system"] = to_string(cfg.system.topology);
    j["iterations"] = cfg.system.iterations;
    j["segmenter"] = cfg.segmenter;
    j["seed"] = cfg.seed;
    std::ofstream out(dir / "summary.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "curves.csv");
    write_curves_csv(out, r.curves);
  }
  for (const auto& s : r.scans) {
    if (!s.ok) continue;
    std::ofstream out(dir / "sessions" / (s.scan_id + ".jsonl"));
    write_session_jsonl(out, s.log);
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("experiment needs an output directory");
  const auto manifest = read_manifest(cfg.manifest);
  const fs::path base = cfg.manifest.parent_path();

  std::vector<ManifestEntry> scans;
  if (cfg.split_file) {
    const SplitFile split = read_split(*cfg.split_file);
    const std::set<std::string> test(split.test.begin(), split.test.end());
    for (const auto& e : manifest) {
      if (test.count(e.scan_id)) scans.push_back(e);
    }
    if (scans.size() != test.size()) {
      throw std::invalid_argument("split file names scans missing from the manifest");
    }
  } else {
    scans = manifest;
  }

  const SegmenterBinding binding = SegmenterBinding::parse(cfg.segmenter, cfg.params);
  const BoundSegmenters probe = binding.bind(std::make_shared<const MaskVolume>());
  cfg.system.validate(probe.initial != nullptr, probe.refinement != nullptr);

  fs::create_directories(cfg.out_dir / "sessions");
  fs::create_directories(cfg.out_dir / "masks");

  ExperimentReport report;
  report.scans.resize(scans.size());
  detail::parallel_for(
      static_cast<std::ptrdiff_t>(scans.size()),
      [&](std::ptrdiff_t idx) {
        const ManifestEntry& e = scans[static_cast<std::size_t>(idx)];
        ScanOutcome& out = report.scans[static_cast<std::size_t>(idx)];
        out.scan_id = e.scan_id;
        out.patient_id = e.patient_id;
        try {
          auto volume = std::make_shared<const Volume>(load_entry_volume(e, base));
          auto mask = load_entry_mask(e, base);
          if (!mask) throw std::invalid_argument("no ground-truth mask");
          auto gt = std::make_shared<const MaskVolume>(std::move(*mask));
          const BoundSegmenters segs = binding.bind(gt);
          RunResult r = run_session(volume, gt.get(), segs.raw(), cfg.system,
                                    session_seed(cfg.seed, e.scan_id));
          const std::string mask_rel = "masks/" + e.scan_id + ".lvol";
          MaskVolume pred = std::move(r.pred);
          pred.scan_id = e.scan_id;
          write_mask(cfg.out_dir / mask_rel, pred);
          r.log.final_masks = mask_rel;
          out.iou = r.log.iterations.back().iou.value_or(0.0);
          out.ledger = r.ledger;
          out.log = std::move(r.log);
          out.ok = true;
        } catch (const std::exception& ex) {
          out.ok = false;
          out.error = ex.what();
        }
      },
      !binding.serial_only());

  finalize(report);
  write_report(cfg.out_dir, report, cfg);
  return report;
}

ExperimentReport run_experiment(const fs::path& config_file) {
  return run_experiment(load_config(config_file));
}

ExperimentReport evaluate_report(const fs::path& dir) {
  if (!fs::is_directory(dir / "sessions")) {
    throw std::runtime_error(dir.string() + " is not a report directory");
  }
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(dir / "sessions")) {
    if (de.path().extension() == ".jsonl") files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  ExperimentReport r;
  std::map<std::string, std::string> patients;
  if (std::ifstream csv(dir / "per_scan.csv"); csv) {
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      std::stringstream ss(line);
      std::string id, patient, status;
      std::getline(ss, id, ',');
      std::getline(ss, patient, ',');
      std::getline(ss, status, ',');
      patients[id] = patient;
      if (status == "failed") {
        ScanOutcome f;
        f.scan_id = id;
        f.patient_id = patient;
        f.error = "failed during the run";
        r.scans.push_back(std::move(f));
      }
    }
  }
  for (const auto& p : files) {
    ScanOutcome s;
    s.log = read_session_jsonl(p);
    s.scan_id = s.log.scan_id;
    s.patient_id = patients.count(s.scan_id) ? patients[s.scan_id] : std::string();
    if (s.log.iterations.empty() || !s.log.iterations.back().iou) {
      throw std::runtime_error("session log " + p.string() + " carries no IoU summary");
    }
    s.iou = *s.log.iterations.back().iou;
    s.ledger = s.log.iterations.back().cumulative;
    s.ok = true;
    r.scans.push_back(std::move(s));
  }
  std::sort(r.scans.begin(), r.scans.end(),
            [](const ScanOutcome& a, const ScanOutcome& b) { return a.scan_id < b.scan_id; });
  finalize(r);
  return r;
}

}  // namespace lungseg
