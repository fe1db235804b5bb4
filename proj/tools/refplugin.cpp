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

// Reference segmentation plug-in. The default mode serves threshold_initial
// and conservative_refine; the other modes misbehave on purpose so the host's
// error paths can be exercised.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <thread>

#include "lungseg/plugin.hpp"
#include "lungseg/segmenters.hpp"

namespace {

using lungseg::FloatPlane;
using lungseg::plugin::PluginRequest;

FloatPlane reference(const PluginRequest& req) {
  if (req.op == "predict") return lungseg::threshold_initial(lungseg::plugin::decode_predict(req));
  if (req.op == "refine") {
    const auto d = lungseg::plugin::decode_refine(req);
    return lungseg::conservative_refine(d.window, d.prev_mask, d.pos_clicks, d.neg_clicks);
  }
  throw std::invalid_argument("unknown op '" + req.op + "'");
}

int usage() {
  std::fprintf(stderr,
               "usage: lungseg_refplugin [reference|echo|wrong-shape|out-of-range|slow|error|"
               "bad-handshake|garbage-frame|crash|predict-only]\n");
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "reference";
  using lungseg::plugin::serve;

  if (mode == "reference") return serve(STDIN_FILENO, STDOUT_FILENO, reference);
  if (mode == "predict-only") return serve(STDIN_FILENO, STDOUT_FILENO, reference, {"predict"});
  if (mode == "echo") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest& req) {
      if (req.op == "refine") return lungseg::to_probability(lungseg::plugin::decode_refine(req).prev_mask);
      return FloatPlane(req.channels.front().shape(), 0.0f);
    });
  }
  if (mode == "wrong-shape") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest& req) {
      const auto s = req.channels.front().shape();
      return FloatPlane({s.height + 1, s.width}, 0.0f);
    });
  }
  if (mode == "out-of-range") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest& req) {
      return FloatPlane(req.channels.front().shape(), 1.5f);
    });
  }
  if (mode == "slow") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest& req) {
      std::this_thread::sleep_for(std::chrono::seconds(3));
      return FloatPlane(req.channels.front().shape(), 0.0f);
    });
  }
  if (mode == "error") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest&) -> FloatPlane {
      throw std::runtime_error("model not loaded");
    });
  }
  if (mode == "crash") {
    return serve(STDIN_FILENO, STDOUT_FILENO, [](const PluginRequest&) -> FloatPlane {
      std::_Exit(3);
    });
  }
  if (mode == "bad-handshake") {
    const char msg[] = "hello, I am not a plug-in\n";
    return ::write(STDOUT_FILENO, msg, std::strlen(msg)) > 0 ? 0 : 1;
  }
  if (mode == "garbage-frame") {
    const char hs[] = "{\"protocol\":1,\"roles\":[\"predict\",\"refine\"]}\n";
    if (::write(STDOUT_FILENO, hs, std::strlen(hs)) < 0) return 1;
    lungseg::plugin::Frame request;
    if (!lungseg::plugin::read_frame(STDIN_FILENO, request, std::chrono::milliseconds(-1))) return 0;
    const unsigned char junk[] = {0x10, 0, 0, 0, 'n', 'o', 't', ' ', 'j', 's', 'o', 'n', '!', '!',
                                  '!', '!', '!', '!', '!', '!'};
    return ::write(STDOUT_FILENO, junk, sizeof junk) > 0 ? 0 : 1;
  }
  return usage();
}
