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

#include "lungseg/plugin.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <thread>

namespace lungseg::plugin {
namespace {

using Kind = PluginError::Kind;
constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;
constexpr std::size_t kMaxPayloadFloats = std::size_t{1} << 28;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

// Milliseconds left until `deadline`, or -1 for no deadline.
int remaining_ms(std::chrono::steady_clock::time_point deadline, bool unlimited) {
  if (unlimited) return -1;
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return static_cast<int>(std::max<std::int64_t>(0, left.count()));
}

// Reads exactly n bytes. Returns the number read before EOF (< n on EOF).
std::size_t read_exact(int fd, std::uint8_t* buf, std::size_t n,
                       std::chrono::steady_clock::time_point deadline, bool unlimited) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline, unlimited));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw PluginError(Kind::frame, std::string("poll failed: ") + std::strerror(errno));
    }
    if (r == 0) throw PluginError(Kind::timeout, "plug-in did not answer in time");
    const ssize_t k = ::read(fd, buf + got, n - got);
    if (k < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw PluginError(Kind::frame, std::string("read failed: ") + std::strerror(errno));
    }
    if (k == 0) return got;
    got += static_cast<std::size_t>(k);
  }
  return got;
}

void write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t k = ::write(fd, buf + done, n - done);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw PluginError(Kind::process, std::string("write to plug-in failed: ") +
                                           std::strerror(errno));
    }
    done += static_cast<std::size_t>(k);
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> get_floats(const std::uint8_t* p, std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = std::bit_cast<float>(get_u32(p + 4 * k));
  return v;
}

nlohmann::json parse_header(const std::uint8_t* p, std::size_t n) {
  nlohmann::json h = nlohmann::json::parse(p, p + n, nullptr, false);
  if (h.is_discarded() || !h.is_object()) throw PluginError(Kind::frame, "frame header is not a JSON object");
  return h;
}

void append_plane(std::vector<float>& out, const FloatPlane& p) {
  out.insert(out.end(), p.values().begin(), p.values().end());
}

void append_plane(std::vector<float>& out, const Plane<double>& p) {
  for (double v : p.values()) out.push_back(static_cast<float>(v));
}

nlohmann::json pixels_json(std::span<const Pixel> ps) {
  nlohmann::json a = nlohmann::json::array();
  for (const Pixel& p : ps) a.push_back({p.i, p.j});
  return a;
}

std::vector<Pixel> pixels_from_json(const nlohmann::json& a) {
  std::vector<Pixel> out;
  for (const auto& e : a) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return out;
}

// Clicks recovered from an encoded plane: local maxima reaching 1. Exact for
// clicks whose Gaussians do not overlap.
std::vector<Pixel> clicks_from_mask(const Plane<double>& m) {
  std::vector<Pixel> out;
  for (int i = 0; i < m.height(); ++i) {
    for (int j = 0; j < m.width(); ++j) {
      const double v = m(i, j);
      if (v < 1.0 - 1e-6) continue;
      bool peak = true;
      for (int di = -1; di <= 1 && peak; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const Pixel q{i + di, j + dj};
          if ((di || dj) && m.contains(q) && m[q] > v) {
            peak = false;
            break;
          }
        }
      if (peak) out.push_back({i, j});
    }
  }
  return out;
}

}  // namespace

std::size_t payload_floats(const nlohmann::json& header) {
  if (!header.contains("shape") || !header["shape"].is_array() || header["shape"].empty()) {
    throw PluginError(Kind::frame, "frame header lacks a shape");
  }
  std::size_t n = 1;
  for (const auto& d : header["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
      throw PluginError(Kind::frame, "frame shape entries must be non-negative integers");
    }
    n *= d.get<std::size_t>();
    if (n > kMaxPayloadFloats) throw PluginError(Kind::frame, "frame payload too large");
  }
  if (header.value("dtype", std::string("f32le")) != "f32le") {
    throw PluginError(Kind::frame, "unsupported dtype " + header["dtype"].dump());
  }
  return n;
}

std::vector<std::uint8_t> encode_frame(const nlohmann::json& header, std::span<const float> payload) {
  const std::string h = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(4 + h.size() + 4 * payload.size());
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  put_floats(out, payload);
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw PluginError(Kind::frame, "frame shorter than its length prefix");
  const std::uint32_t hlen = get_u32(bytes.data());
  if (hlen > kMaxHeaderBytes || 4 + static_cast<std::size_t>(hlen) > bytes.size()) {
    throw PluginError(Kind::frame, "frame header length out of range");
  }
  Frame f;
  f.header = parse_header(bytes.data() + 4, hlen);
  const std::size_t n = f.header.contains("error") ? 0 : payload_floats(f.header);
  if (bytes.size() != 4 + hlen + 4 * n) throw PluginError(Kind::frame, "frame payload size mismatch");
  f.payload = get_floats(bytes.data() + 4 + hlen, n);
  return f;
}

void write_frame(int fd, const nlohmann::json& header, std::span<const float> payload) {
  const auto bytes = encode_frame(header, payload);
  write_all(fd, bytes.data(), bytes.size());
}

bool read_frame(int fd, Frame& out, std::chrono::milliseconds timeout) {
  const bool unlimited = timeout.count() < 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::uint8_t len[4];
  const std::size_t got = read_exact(fd, len, 4, deadline, unlimited);
  if (got == 0) return false;
  if (got < 4) throw PluginError(Kind::frame, "EOF inside frame length");
  const std::uint32_t hlen = get_u32(len);
  if (hlen > kMaxHeaderBytes) throw PluginError(Kind::frame, "frame header length out of range");
  std::vector<std::uint8_t> hbuf(hlen);
  if (read_exact(fd, hbuf.data(), hlen, deadline, unlimited) < hlen) {
    throw PluginError(Kind::frame, "EOF inside frame header");
  }
  out.header = parse_header(hbuf.data(), hlen);
  const std::size_t n = out.header.contains("error") ? 0 : payload_floats(out.header);
  std::vector<std::uint8_t> pbuf(4 * n);
  if (read_exact(fd, pbuf.data(), pbuf.size(), deadline, unlimited) < pbuf.size()) {
    throw PluginError(Kind::frame, "EOF inside frame payload");
  }
  out.payload = get_floats(pbuf.data(), n);
  return true;
}

std::string read_line(int fd, std::chrono::milliseconds timeout) {
  const bool unlimited = timeout.count() < 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string line;
  std::uint8_t c = 0;
  while (true) {
    if (read_exact(fd, &c, 1, deadline, unlimited) == 0) {
      throw PluginError(Kind::handshake, "EOF before handshake line");
    }
    if (c == '\n') return line;
    line.push_back(static_cast<char>(c));
    if (line.size() > kMaxHeaderBytes) throw PluginError(Kind::handshake, "handshake line too long");
  }
}

Frame make_predict_request(const SliceWindow& window) {
  const Shape2D s = window.shape();
  Frame f;
  f.header = {{"op", "predict"},
              {"shape", {window.channels.size(), s.height, s.width}},
              {"dtype", "f32le"},
              {"slice", window.center_index}};
  f.payload.reserve(window.channels.size() * s.size());
  for (const auto& c : window.channels) append_plane(f.payload, c);
  return f;
}

Frame make_refine_request(const RefineRequest& req) {
  const Shape2D s = req.window.shape();
  Frame f;
  f.header = {{"op", "refine"},
              {"shape", {req.window.channels.size() + 3, s.height, s.width}},
              {"dtype", "f32le"},
              {"slice", req.slice},
              {"clicks", {{"pos", pixels_json(req.pos_clicks)}, {"neg", pixels_json(req.neg_clicks)}}}};
  f.payload.reserve((req.window.channels.size() + 3) * s.size());
  for (const auto& c : req.window.channels) append_plane(f.payload, c);
  append_plane(f.payload, req.pos_mask.values);
  append_plane(f.payload, req.neg_mask.values);
  append_plane(f.payload, to_probability(req.prev_mask));
  return f;
}

PluginClient::PluginClient(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw PluginError(Kind::process, "pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw PluginError(Kind::process, "pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw PluginError(Kind::process, "fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  pid_ = pid;
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    const std::string line = read_line(from_child_, timeout_);
    const auto hs = nlohmann::json::parse(line, nullptr, false);
    if (hs.is_discarded() || !hs.is_object() || hs.value("protocol", -1) != kProtocolVersion ||
        !hs.contains("roles") || !hs["roles"].is_array()) {
      throw PluginError(Kind::handshake, "bad handshake from '" + command_ + "': " + line);
    }
    for (const auto& r : hs["roles"]) roles_.push_back(r.get<std::string>());
  } catch (const PluginError& e) {
    shutdown();
    if (e.kind() == Kind::handshake) throw;
    throw PluginError(e.kind() == Kind::timeout ? Kind::timeout : Kind::handshake,
                      std::string("handshake failed: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    shutdown();
    throw PluginError(Kind::handshake, std::string("handshake failed: ") + e.what());
  }
}

PluginClient::~PluginClient() { shutdown(); }

void PluginClient::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int n = 0; n < 100; ++n) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

bool PluginClient::has_role(const std::string& r) const {
  return std::find(roles_.begin(), roles_.end(), r) != roles_.end();
}

FloatPlane PluginClient::round_trip(const Frame& request, Shape2D expected) {
  std::lock_guard<std::mutex> lock(mu_);
  if (to_child_ < 0) throw PluginError(Kind::process, "plug-in process is not running");
  write_frame(to_child_, request.header, request.payload);
  Frame resp;
  if (!read_frame(from_child_, resp, timeout_)) {
    throw PluginError(Kind::frame, "plug-in closed its output");
  }
  if (resp.header.contains("error")) {
    throw PluginError(Kind::remote, "plug-in error: " + resp.header["error"].dump());
  }
  const auto& shape = resp.header["shape"];
  if (shape.size() != 2 || shape[0].get<int>() != expected.height ||
      shape[1].get<int>() != expected.width) {
    throw PluginError(Kind::shape_mismatch, "plug-in returned shape " + shape.dump() +
                                                ", expected [" + std::to_string(expected.height) +
                                                "," + std::to_string(expected.width) + "]");
  }
  FloatPlane out(expected, std::move(resp.payload));
  for (float v : out.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw PluginError(Kind::range, "plug-in probability outside [0,1]");
  }
  return out;
}

FloatPlane PluginClient::predict(const SliceWindow& window) {
  if (!has_role("predict")) throw PluginError(Kind::handshake, "plug-in does not offer predict");
  return round_trip(make_predict_request(window), window.shape());
}

FloatPlane PluginClient::refine(const RefineRequest& req) {
  if (!has_role("refine")) throw PluginError(Kind::handshake, "plug-in does not offer refine");
  return round_trip(make_refine_request(req), req.window.shape());
}

namespace {

void serve_loop(int in_fd, int out_fd, const PluginHandler& handler,
                const std::vector<std::string>& roles) {
  const std::string hs =
      nlohmann::json{{"protocol", kProtocolVersion}, {"roles", roles}}.dump() + "\n";
  write_all(out_fd, reinterpret_cast<const std::uint8_t*>(hs.data()), hs.size());
  while (true) {
    Frame req;
    if (!read_frame(in_fd, req, std::chrono::milliseconds(-1))) return;
    try {
      const auto& shape = req.header.at("shape");
      if (shape.size() != 3) throw std::invalid_argument("request shape must be [C,H,W]");
      PluginRequest pr;
      pr.op = req.header.at("op").get<std::string>();
      pr.header = req.header;
      const int c = shape[0].get<int>(), h = shape[1].get<int>(), w = shape[2].get<int>();
      const std::size_t plane = static_cast<std::size_t>(h) * w;
      for (int k = 0; k < c; ++k) {
        pr.channels.emplace_back(Shape2D{h, w},
                                 std::vector<float>(req.payload.begin() + k * plane,
                                                    req.payload.begin() + (k + 1) * plane));
      }
      const FloatPlane out = handler(pr);
      write_frame(out_fd, {{"shape", {out.height(), out.width()}}, {"dtype", "f32le"}},
                  out.values());
    } catch (const PluginError&) {
      throw;
    } catch (const std::exception& e) {
      write_frame(out_fd, {{"error", e.what()}}, {});
    }
  }
}

}  // namespace

int serve(int in_fd, int out_fd, const PluginHandler& handler, std::vector<std::string> roles) {
  ignore_sigpipe();
  try {
    serve_loop(in_fd, out_fd, handler, roles);
  } catch (const PluginError& e) {
    // Write failures mean the host has gone away.
    if (e.kind() != Kind::process) std::fprintf(stderr, "plug-in: %s\n", e.what());
    return 1;
  }
  return 0;
}

SliceWindow decode_predict(const PluginRequest& req) {
  if (req.channels.empty() || req.channels.size() % 2 == 0) {
    throw std::invalid_argument("predict expects an odd number of window channels");
  }
  SliceWindow w;
  w.center_index = req.header.value("slice", 0);
  w.radius = static_cast<int>(req.channels.size() / 2);
  w.channels = req.channels;
  return w;
}

DecodedRefine decode_refine(const PluginRequest& req) {
  const std::size_t c = req.channels.size();
  if (c < 4 || (c - 3) % 2 == 0) {
    throw std::invalid_argument("refine expects window channels plus three feedback planes");
  }
  DecodedRefine d;
  d.window.center_index = req.header.value("slice", 0);
  d.window.radius = static_cast<int>((c - 3) / 2);
  d.window.channels.assign(req.channels.begin(), req.channels.end() - 3);
  const Shape2D s = req.channels.front().shape();
  d.pos_mask = Plane<double>(s, 0.0);
  d.neg_mask = Plane<double>(s, 0.0);
  d.prev_mask = SliceMask(s, 0);
  for (std::size_t n = 0; n < s.size(); ++n) {
    d.pos_mask.values()[n] = req.channels[c - 3].values()[n];
    d.neg_mask.values()[n] = req.channels[c - 2].values()[n];
    d.prev_mask.values()[n] = req.channels[c - 1].values()[n] > 0.5f;
  }
  if (req.header.contains("clicks")) {
    d.pos_clicks = pixels_from_json(req.header["clicks"].value("pos", nlohmann::json::array()));
    d.neg_clicks = pixels_from_json(req.header["clicks"].value("neg", nlohmann::json::array()));
  } else {
    d.pos_clicks = clicks_from_mask(d.pos_mask);
    d.neg_clicks = clicks_from_mask(d.neg_mask);
  }
  return d;
}

}  // namespace lungseg::plugin
