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

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "lungseg/experiment.hpp"
#include "lungseg/session_service.hpp"
#include "lungseg/split.hpp"

namespace fs = std::filesystem;
using namespace lungseg;

namespace {

lungseg::SessionService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

fs::path resolve_manifest(const std::string& named, const fs::path& split_file) {
  if (named.empty()) return {};
  fs::path p(named);
  if (p.is_absolute() || fs::exists(p)) return p;
  return split_file.parent_path() / p;
}

void print_report(const ExperimentReport& r) {
  std::cout << summary_json(r).dump(2) << "\n";
  write_curves_csv(std::cout, r.curves);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive lung-lesion segmentation toolkit"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom dataset");
  int ph_count = 20;
  std::uint64_t ph_seed = 0;
  std::string ph_out;
  int ph_per_patient = 1;
  PhantomSpec ph_spec;
  phantom->add_option("--count", ph_count, "Number of scans")->check(CLI::NonNegativeNumber);
  phantom->add_option("--seed", ph_seed, "Generator seed");
  phantom->add_option("--out", ph_out, "Output directory")->required();
  phantom->add_option("--scans-per-patient", ph_per_patient, "Consecutive scans per patient")
      ->check(CLI::PositiveNumber);
  phantom->add_option("--height", ph_spec.dims.height)->check(CLI::PositiveNumber);
  phantom->add_option("--width", ph_spec.dims.width)->check(CLI::PositiveNumber);
  phantom->add_option("--slices", ph_spec.dims.n_slices)->check(CLI::PositiveNumber);
  phantom->add_option("--max-distractors", ph_spec.max_distractors)->check(CLI::NonNegativeNumber);

  // split
  auto* split = app.add_subcommand("split", "Patient-grouped, area-stratified train/test split");
  std::string sp_manifest, sp_out;
  SplitSpec sp_spec;
  split->add_option("--manifest", sp_manifest)->required()->check(CLI::ExistingFile);
  split->add_option("--test-frac", sp_spec.test_fraction)->check(CLI::Range(0.0, 1.0));
  split->add_option("--seed", sp_spec.seed);
  split->add_option("--bins", sp_spec.n_bins)->check(CLI::PositiveNumber);
  split->add_option("--out", sp_out)->required();

  // run
  auto* run = app.add_subcommand("run", "Run System 1, 2 or 3 over a manifest or split");
  std::string run_config, run_split, run_manifest, run_out, run_segmenter;
  int run_system = 0, run_iterations = -1;
  std::uint64_t run_seed = 0;
  run->add_option("--config", run_config, "JSON experiment config")->check(CLI::ExistingFile);
  run->add_option("--system", run_system)->check(CLI::IsMember({1, 2, 3}));
  run->add_option("--iterations", run_iterations)->check(CLI::NonNegativeNumber);
  run->add_option("--segmenter", run_segmenter,
                  "threshold | conservative | oracle | null | plugin:COMMAND");
  run->add_option("--split", run_split, "Split file; its test scans are run")
      ->check(CLI::ExistingFile);
  run->add_option("--manifest", run_manifest)->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", run_seed);
  run->add_option("--out", run_out, "Report directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Recompute statistics from a report directory");
  std::string ev_report;
  eval->add_option("--report", ev_report)->required()->check(CLI::ExistingDirectory);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP session API");
  std::string sv_addr = "127.0.0.1:8080", sv_manifest, sv_log_dir;
  serve->add_option("--addr", sv_addr, "HOST:PORT");
  serve->add_option("--manifest", sv_manifest)->required()->check(CLI::ExistingFile);
  serve->add_option("--log-dir", sv_log_dir, "Directory for per-session JSONL logs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      const auto entries = write_phantom_dataset(ph_out, ph_count, ph_seed, ph_spec, ph_per_patient);
      std::cout << "wrote " << entries.size() << " phantoms to " << ph_out << "\n";
      return 0;
    }
    if (*split) {
      const auto manifest = read_manifest(sp_manifest);
      const SplitResult r = split_dataset(manifest, sp_spec);
      write_split(sp_out, r, sp_manifest, sp_spec);
      std::cout << "train " << r.train.size() << ", test " << r.test.size() << "\n";
      return 0;
    }
    if (*run) {
      ExperimentConfig cfg = run_config.empty() ? ExperimentConfig{} : load_config(run_config);
      if (run_system) cfg.system.topology = topology_from_string(std::to_string(run_system));
      if (run_iterations >= 0) {
        cfg.system.iterations = run_iterations;
      } else if (cfg.system.topology == Topology::system1_noninteractive) {
        cfg.system.iterations = 0;
      }
      if (!run_segmenter.empty()) cfg.segmenter = run_segmenter;
      if (*seed_opt) cfg.seed = run_seed;
      if (!run_split.empty()) {
        cfg.split_file = run_split;
        if (run_manifest.empty() && cfg.manifest.empty()) {
          cfg.manifest = resolve_manifest(read_split(run_split).manifest, run_split);
        }
      }
      if (!run_manifest.empty()) cfg.manifest = run_manifest;
      if (!run_out.empty()) cfg.out_dir = run_out;
      if (cfg.manifest.empty()) throw std::invalid_argument("run needs --manifest or --split");
      if (cfg.out_dir.empty()) throw std::invalid_argument("run needs --out");
      const ExperimentReport r = run_experiment(cfg);
      print_report(r);
      return r.partial ? 3 : 0;
    }
    if (*eval) {
      print_report(evaluate_report(ev_report));
      return 0;
    }
    if (*serve) {
      const auto colon = sv_addr.rfind(':');
      if (colon == std::string::npos) throw std::invalid_argument("--addr must be HOST:PORT");
      ServiceOptions opt;
      opt.manifest = sv_manifest;
      if (!sv_log_dir.empty()) opt.log_dir = sv_log_dir;
      SessionService service(opt);
      const int port = service.bind(sv_addr.substr(0, colon), std::stoi(sv_addr.substr(colon + 1)));
      std::cout << "listening on " << sv_addr.substr(0, colon) << ":" << port << std::endl;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
