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

#include "lungseg/session_log.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace lungseg {

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::system1_noninteractive: return "system1";
    case Topology::system2_cold_start: return "system2";
    case Topology::system3_init_plus_refine: return "system3";
  }
  return "system3";
}

Topology topology_from_string(std::string_view s) {
  if (s == "system1" || s == "1") return Topology::system1_noninteractive;
  if (s == "system2" || s == "2") return Topology::system2_cold_start;
  if (s == "system3" || s == "3") return Topology::system3_init_plus_refine;
  throw std::invalid_argument("unknown topology '" + std::string(s) + "'");
}

std::string mask_digest(std::span<const std::uint8_t> mask) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : mask) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_session_jsonl(std::ostream& os, const SessionLog& log) {
  nlohmann::json head = {{"scan_id", log.scan_id},
                         {"topology", to_string(log.topology)},
                         {"final_masks", log.final_masks}};
  os << head.dump() << "\n";
  for (const auto& it : log.iterations) {
    for (const auto& a : it.actions) os << action_to_json(a, it.t).dump() << "\n";
    if (!it.has_summary) continue;
    nlohmann::json s = {{"n_pos", it.cumulative.n_positive},
                        {"n_neg", it.cumulative.n_negative},
                        {"n_erase", it.cumulative.n_erasures},
                        {"digests", it.digests}};
    if (it.iou) s["iou"] = *it.iou;
    os << nlohmann::json{{"t", it.t}, {"summary", s}}.dump() << "\n";
  }
}

SessionLog read_session_jsonl(std::istream& is) {
  SessionLog log;
  std::map<int, IterationRecord> by_t;
  std::string line;
  int line_no = 0;
  bool have_head = false;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("malformed session log, line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("not a JSON object");
    try {
      if (!have_head) {
        if (!j.contains("scan_id")) fail("first line must carry scan_id");
        log.scan_id = j["scan_id"].get<std::string>();
        log.topology = topology_from_string(j.value("topology", std::string("system3")));
        log.final_masks = j.value("final_masks", std::string());
        have_head = true;
        continue;
      }
      const int t = j.at("t").get<int>();
      if (t < 0) fail("negative iteration index");
      IterationRecord& rec = by_t[t];
      rec.t = t;
      if (j.contains("summary")) {
        const auto& s = j["summary"];
        if (rec.has_summary) fail("duplicate summary for iteration " + std::to_string(t));
        rec.has_summary = true;
        if (s.contains("iou")) rec.iou = s["iou"].get<double>();
        rec.cumulative.n_positive = s.at("n_pos").get<std::int64_t>();
        rec.cumulative.n_negative = s.at("n_neg").get<std::int64_t>();
        rec.cumulative.n_erasures = s.at("n_erase").get<std::int64_t>();
        rec.digests = s.value("digests", std::vector<std::string>{});
      } else {
        const FeedbackAction a = action_from_json(j);
        if (a.kind != ActionKind::none) rec.actions.push_back(a);
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  if (!have_head) throw std::runtime_error("malformed session log: empty");
  const int max_t = by_t.empty() ? 0 : by_t.rbegin()->first;
  const bool summarized = std::any_of(by_t.begin(), by_t.end(),
                                      [](const auto& kv) { return kv.second.has_summary; });
  for (int t = 0; t <= max_t; ++t) {
    auto it = by_t.find(t);
    IterationRecord rec;
    rec.t = t;
    if (it != by_t.end()) rec = std::move(it->second);
    if (summarized && !rec.has_summary) {
      throw std::runtime_error("malformed session log: iteration " + std::to_string(t) +
                               " has no summary");
    }
    log.iterations.push_back(std::move(rec));
  }
  return log;
}

SessionLog read_session_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open session log " + path.string());
  return read_session_jsonl(in);
}

}  // namespace lungseg
