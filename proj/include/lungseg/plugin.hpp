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

// External segmenters behind a length-prefixed frame protocol on a child
// process's stdin/stdout.
//
//   handshake (plug-in -> host, once): {"protocol":1,"roles":["predict","refine"]}\n
//   frame: u32 LE header length | JSON header | C*H*W little-endian f32
//   request header:  {"op":"predict"|"refine","shape":[C,H,W],"dtype":"f32le", ...}
//   response header: {"shape":[H,W],"dtype":"f32le"}
//
// Refine payload channels are [window slices..., pos clicks, neg clicks,
// previous mask]. Refine headers additionally carry "slice" and
// "clicks":{"pos":[[i,j],...],"neg":[...]}; a plug-in may ignore them. A
// plug-in that cannot answer replies with {"error":"..."} and no payload.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lungseg/image.hpp"
#include "lungseg/segmenters.hpp"

namespace lungseg::plugin {

inline constexpr int kProtocolVersion = 1;

class PluginError : public std::runtime_error {
 public:
  enum class Kind { handshake, frame, shape_mismatch, range, timeout, remote, process };
  PluginError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Frame {
  nlohmann::json header;
  std::vector<float> payload;
};

// Number of floats implied by a header's "shape".
std::size_t payload_floats(const nlohmann::json& header);

std::vector<std::uint8_t> encode_frame(const nlohmann::json& header, std::span<const float> payload);
// Whole-buffer decode; throws PluginError(frame) on any inconsistency.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// Blocking fd I/O. A negative timeout waits forever. read_frame returns false
// on a clean EOF before the first byte of a frame.
void write_frame(int fd, const nlohmann::json& header, std::span<const float> payload);
bool read_frame(int fd, Frame& out, std::chrono::milliseconds timeout);
std::string read_line(int fd, std::chrono::milliseconds timeout);

// Request builders shared by the host and by tests.
Frame make_predict_request(const SliceWindow& window);
Frame make_refine_request(const RefineRequest& req);

// Host side: one child process, requests serialized by a mutex.
class PluginClient {
 public:
  PluginClient(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~PluginClient();
  PluginClient(const PluginClient&) = delete;
  PluginClient& operator=(const PluginClient&) = delete;

  FloatPlane predict(const SliceWindow& window);
  FloatPlane refine(const RefineRequest& req);

  const std::vector<std::string>& roles() const { return roles_; }
  bool has_role(const std::string& r) const;

 private:
  FloatPlane round_trip(const Frame& request, Shape2D expected);
  void shutdown();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::vector<std::string> roles_;
  std::mutex mu_;
};

class PluginSegmenter : public InitialSegmenter, public RefinementSegmenter {
 public:
  explicit PluginSegmenter(std::shared_ptr<PluginClient> client) : client_(std::move(client)) {}
  FloatPlane predict(const SliceWindow& window) override { return client_->predict(window); }
  FloatPlane refine(const RefineRequest& req) override { return client_->refine(req); }

 private:
  std::shared_ptr<PluginClient> client_;
};

// ---- plug-in side ----------------------------------------------------------

struct PluginRequest {
  std::string op;
  nlohmann::json header;
  std::vector<FloatPlane> channels;
};

// Returns the response plane. Exceptions become {"error"} replies.
using PluginHandler = std::function<FloatPlane(const PluginRequest&)>;

// Writes the handshake, then answers frames until EOF. Returns 0 on clean EOF,
// 1 when the host goes away or sends a malformed frame.
int serve(int in_fd, int out_fd, const PluginHandler& handler,
          std::vector<std::string> roles = {"predict", "refine"});

// Splits a request back into window / click / mask inputs.
struct DecodedRefine {
  SliceWindow window;
  SliceMask prev_mask;
  Plane<double> pos_mask;
  Plane<double> neg_mask;
  std::vector<Pixel> pos_clicks;
  std::vector<Pixel> neg_clicks;
};
SliceWindow decode_predict(const PluginRequest& req);
DecodedRefine decode_refine(const PluginRequest& req);

}  // namespace lungseg::plugin
