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

#include "lungseg/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace lungseg {

namespace {

struct Group {
  std::string patient;
  std::vector<std::size_t> scans;
  double area = 0.0;
  int bin = 0;
};

}  // namespace

SplitResult split_dataset(std::span<const ManifestEntry> manifest, const SplitSpec& spec) {
  if (manifest.empty()) throw std::invalid_argument("split: empty manifest");
  if (spec.n_bins < 1) throw std::invalid_argument("split: need at least one bin");
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction <= 1.0)) {
    throw std::invalid_argument("split: test fraction must lie in [0,1]");
  }

  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < manifest.size(); ++s) {
    const ManifestEntry& e = manifest[s];
    if (!std::isfinite(e.relative_foreground_area) || e.relative_foreground_area < 0.0) {
      throw std::invalid_argument("split: bad relative foreground area for " + e.scan_id);
    }
    auto [it, fresh] = index.emplace(e.patient_id, groups.size());
    if (fresh) groups.push_back(Group{e.patient_id, {}, 0.0, 0});
    Group& g = groups[it->second];
    g.scans.push_back(s);
    g.area = std::max(g.area, e.relative_foreground_area);
  }
  const auto n_groups = static_cast<int>(groups.size());
  if (n_groups < spec.n_bins) {
    throw std::invalid_argument("split: " + std::to_string(n_groups) + " patient groups for " +
                                std::to_string(spec.n_bins) + " bins");
  }

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (groups[a].area != groups[b].area) return groups[a].area < groups[b].area;
    return groups[a].patient < groups[b].patient;
  });
  std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(spec.n_bins));
  for (int rank = 0; rank < n_groups; ++rank) {
    const int b = static_cast<int>(static_cast<std::int64_t>(rank) * spec.n_bins / n_groups);
    groups[order[static_cast<std::size_t>(rank)]].bin = b;
    bins[static_cast<std::size_t>(b)].push_back(order[static_cast<std::size_t>(rank)]);
  }

  // Per-bin targets: largest-remainder apportionment of the global target.
  const auto total = static_cast<std::int64_t>(manifest.size());
  const auto global_target = static_cast<std::int64_t>(std::llround(spec.test_fraction * total));
  std::vector<std::int64_t> target(bins.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    std::int64_t n = 0;
    for (std::size_t g : bins[b]) n += static_cast<std::int64_t>(groups[g].scans.size());
    const double exact = spec.test_fraction * static_cast<double>(n);
    target[b] = static_cast<std::int64_t>(std::floor(exact));
    assigned += target[b];
    remainders.emplace_back(exact - std::floor(exact), b);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < global_target && r < remainders.size(); ++r, ++assigned) {
    ++target[remainders[r].second];
  }

  // Each bin takes the subset of its groups whose scan count is closest to the
  // bin target (exact subset sum over the shuffled groups). What a bin misses
  // by is carried into the next bin's target so the overall count stays on target.
  std::mt19937_64 rng(spec.seed);
  std::vector<bool> in_test(groups.size(), false);
  std::int64_t carry = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    std::vector<std::size_t> members = bins[b];
    std::shuffle(members.begin(), members.end(), rng);
    std::stable_sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
      return groups[x].scans.size() > groups[y].scans.size();
    });
    std::int64_t n = 0;
    for (std::size_t g : members) n += static_cast<std::int64_t>(groups[g].scans.size());
    const std::int64_t goal = std::clamp<std::int64_t>(target[b] - carry, 0, n);

    // via[s]: member that first made s reachable, -1 when unreachable.
    std::vector<std::int64_t> via(static_cast<std::size_t>(n) + 1, -1);
    std::vector<bool> reach(static_cast<std::size_t>(n) + 1, false);
    reach[0] = true;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto size = static_cast<std::int64_t>(groups[members[m]].scans.size());
      for (std::int64_t s = n; s >= size; --s) {
        if (!reach[s] && reach[s - size]) {
          reach[s] = true;
          via[s] = static_cast<std::int64_t>(m);
        }
      }
    }
    std::int64_t best = 0;
    for (std::int64_t s = 0; s <= n; ++s) {
      if (reach[s] && std::llabs(s - goal) < std::llabs(best - goal)) best = s;
    }
    for (std::int64_t s = best; s > 0;) {
      const std::size_t g = members[static_cast<std::size_t>(via[s])];
      in_test[g] = true;
      s -= static_cast<std::int64_t>(groups[g].scans.size());
    }
    carry += best - target[b];
  }

  SplitResult out;
  out.bin_of_scan.assign(manifest.size(), 0);
  for (std::size_t s = 0; s < manifest.size(); ++s) {
    const std::size_t g = index.at(manifest[s].patient_id);
    out.bin_of_scan[s] = groups[g].bin;
    (in_test[g] ? out.test : out.train).push_back(manifest[s].scan_id);
  }
  return out;
}

void write_split(const std::filesystem::path& path, const SplitResult& split,
                 const std::string& manifest, const SplitSpec& spec) {
  const nlohmann::json j = {{"manifest", manifest},
                            {"seed", spec.seed},
                            {"test_fraction", spec.test_fraction},
                            {"n_bins", spec.n_bins},
                            {"train", split.train},
                            {"test", split.test}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

SplitFile read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split file " + path.string());
  const auto j = nlohmann::json::parse(in);
  SplitFile f;
  f.manifest = j.value("manifest", std::string());
  f.spec.seed = j.value("seed", std::uint64_t{0});
  f.spec.test_fraction = j.value("test_fraction", 0.2);
  f.spec.n_bins = j.value("n_bins", 5);
  f.train = j.at("train").get<std::vector<std::string>>();
  f.test = j.at("test").get<std::vector<std::string>>();
  return f;
}

}  // namespace lungseg
