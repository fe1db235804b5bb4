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

// HTTP session API for live interactive segmentation.
//
//   GET  /scans
//   POST /sessions                       {"scan_id","topology","segmenter"}
//   GET  /sessions/{id}/slices/{k}       8-bit image (base64), RLE mask, clicks
//   GET  /sessions/{id}/slices/{k}/mask  RLE mask
//   POST /sessions/{id}/feedback         {"k","action":"pos"|"neg"|"erase","i","j","defer"}
//   POST /sessions/{id}/refine           closes the current feedback round
//   GET  /sessions/{id}/metrics          ledger, score, IoU when ground truth exists
//   GET  /sessions/{id}/log              session JSONL of closed rounds
//
// Errors are {"error": "..."} with 400 (bad input), 404 (unknown scan or
// session) or 409 {"accepted":false,"reason":"cap"|"duplicate"}.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "lungseg/experiment.hpp"
#include "lungseg/loop_runner.hpp"

namespace lungseg {

struct ServiceOptions {
  std::filesystem::path manifest;
  SystemSpec defaults;  // click, expert and window settings for new sessions
  SegmenterParams params;
  // When set, each session's JSONL log is rewritten there after every round.
  std::optional<std::filesystem::path> log_dir;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class SessionService {
 public:
  explicit SessionService(ServiceOptions options);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  // Transport-free handlers; the HTTP routes forward to these.
  ApiResponse list_scans() const;
  ApiResponse create_session(const nlohmann::json& body);
  ApiResponse get_slice(const std::string& id, int k) const;
  ApiResponse get_mask(const std::string& id, int k) const;
  ApiResponse post_feedback(const std::string& id, const nlohmann::json& body);
  ApiResponse refine(const std::string& id);
  ApiResponse metrics(const std::string& id) const;
  std::optional<std::string> session_log(const std::string& id) const;

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  // serve() on a background thread; returns once the server accepts requests.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lungseg
