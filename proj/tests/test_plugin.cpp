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

#include <chrono>
#include <random>

#include "lungseg/plugin.hpp"
#include "lungseg/volume.hpp"

using namespace lungseg;
using namespace lungseg::plugin;

namespace {

std::string refplugin(const std::string& mode) { return std::string(LUNGSEG_REFPLUGIN) + " " + mode; }

PluginError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PluginError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no PluginError thrown";
  return PluginError::Kind::process;
}

SliceWindow phantom_window(std::uint64_t seed, int k) {
  const Phantom p = generate_phantom(seed, {});
  return extract_window(p.volume, k, 2);
}

}  // namespace

TEST(Frames, EncodeDecodeRoundTrip) {
  const std::vector<float> payload = {0.0f, 0.5f, 1.0f, -2.0f, 3.25f, 7.0f};
  const nlohmann::json header = {{"op", "predict"}, {"shape", {1, 2, 3}}, {"dtype", "f32le"}};
  const auto bytes = encode_frame(header, payload);
  EXPECT_EQ(bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (bytes[3] << 24),
            static_cast<int>(header.dump().size()));
  const Frame f = decode_frame(bytes);
  EXPECT_EQ(f.header, header);
  EXPECT_EQ(f.payload, payload);
}

TEST(Frames, RejectsInconsistentFrames) {
  const nlohmann::json header = {{"shape", {2, 2}}, {"dtype", "f32le"}};
  auto bytes = encode_frame(header, std::vector<float>(4, 0.0f));
  bytes.pop_back();
  EXPECT_EQ(kind_of([&] { decode_frame(bytes); }), PluginError::Kind::frame);
  EXPECT_EQ(kind_of([&] { decode_frame(std::vector<std::uint8_t>{1, 0}); }), PluginError::Kind::frame);
  const auto bad_dtype = encode_frame({{"shape", {1}}, {"dtype", "f64"}}, std::vector<float>(1, 0.0f));
  EXPECT_EQ(kind_of([&] { decode_frame(bad_dtype); }), PluginError::Kind::frame);
}

TEST(Frames, RefineRequestCarriesChannelsAndClicks) {
  const SliceWindow w = phantom_window(1, 8);
  const SliceMask prev(w.shape(), 0);
  const std::vector<Pixel> pos = {{3, 4}};
  const ClickMask pm = encode_clicks(pos, w.shape(), ClickEncoding{});
  const ClickMask nm = encode_clicks({}, w.shape(), ClickEncoding{});
  const Frame f = make_refine_request({8, w, prev, pm, nm, pos, {}});
  EXPECT_EQ(f.header["shape"], nlohmann::json({8, 64, 64}));
  EXPECT_EQ(f.header["clicks"]["pos"], nlohmann::json::array({{3, 4}}));
  EXPECT_EQ(f.payload.size(), 8u * 64 * 64);
  EXPECT_FLOAT_EQ(f.payload[5 * 64 * 64 + 3 * 64 + 4], 1.0f);
}

TEST(Loopback, ReferencePluginMatchesInProcess) {
  PluginClient client(refplugin("reference"), std::chrono::seconds(10));
  EXPECT_TRUE(client.has_role("predict"));
  EXPECT_TRUE(client.has_role("refine"));
  std::mt19937_64 rng(3);
  for (int n = 0; n < 10; ++n) {
    const Phantom p = generate_phantom(n, {});
    const int k = static_cast<int>(rng() % 16);
    const SliceWindow w = extract_window(p.volume, k, 2);
    EXPECT_EQ(client.predict(w), threshold_initial(w));
    const SliceMask prev = binarize(threshold_initial(w));
    std::vector<Pixel> pos = {{static_cast<int>(rng() % 64), static_cast<int>(rng() % 64)}};
    std::vector<Pixel> neg = {{static_cast<int>(rng() % 64), static_cast<int>(rng() % 64)}};
    const ClickMask pm = encode_clicks(pos, w.shape(), ClickEncoding{});
    const ClickMask nm = encode_clicks(neg, w.shape(), ClickEncoding{});
    EXPECT_EQ(client.refine({k, w, prev, pm, nm, pos, neg}), conservative_refine(w, prev, pos, neg));
  }
}

TEST(Loopback, ClicksRecoveredFromMasksWithoutHeader) {
  const SliceWindow w = phantom_window(2, 5);
  const std::vector<Pixel> pos = {{10, 12}, {40, 44}};
  const ClickMask pm = encode_clicks(pos, w.shape(), ClickEncoding{});
  const ClickMask nm = encode_clicks({}, w.shape(), ClickEncoding{});
  Frame f = make_refine_request({5, w, SliceMask(w.shape(), 0), pm, nm, pos, {}});
  f.header.erase("clicks");
  PluginRequest req;
  req.op = "refine";
  req.header = f.header;
  const std::size_t plane = w.shape().size();
  for (std::size_t c = 0; c < 8; ++c) {
    req.channels.emplace_back(w.shape(), std::vector<float>(f.payload.begin() + c * plane,
                                                            f.payload.begin() + (c + 1) * plane));
  }
  const DecodedRefine d = decode_refine(req);
  EXPECT_EQ(d.pos_clicks, pos);
  EXPECT_TRUE(d.neg_clicks.empty());
  EXPECT_EQ(d.window.radius, 2);
}

TEST(PluginErrors, WrongShapeIsReported) {
  PluginClient c(refplugin("wrong-shape"), std::chrono::seconds(10));
  EXPECT_EQ(kind_of([&] { c.predict(phantom_window(1, 3)); }), PluginError::Kind::shape_mismatch);
}

TEST(PluginErrors, OutOfRangeProbabilitiesAreReported) {
  PluginClient c(refplugin("out-of-range"), std::chrono::seconds(10));
  EXPECT_EQ(kind_of([&] { c.predict(phantom_window(1, 3)); }), PluginError::Kind::range);
}

TEST(PluginErrors, BadHandshakeIsReported) {
  EXPECT_EQ(kind_of([&] { PluginClient c(refplugin("bad-handshake"), std::chrono::seconds(10)); }),
            PluginError::Kind::handshake);
}

TEST(PluginErrors, MissingExecutableFailsHandshake) {
  EXPECT_EQ(kind_of([&] { PluginClient c("/nonexistent/plugin", std::chrono::seconds(10)); }),
            PluginError::Kind::handshake);
}

TEST(PluginErrors, SlowPluginTimesOut) {
  PluginClient c(refplugin("slow"), std::chrono::milliseconds(300));
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(kind_of([&] { c.predict(phantom_window(1, 3)); }), PluginError::Kind::timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(2));
}

TEST(PluginErrors, GarbageFrameIsReported) {
  PluginClient c(refplugin("garbage-frame"), std::chrono::seconds(10));
  EXPECT_EQ(kind_of([&] { c.predict(phantom_window(1, 3)); }), PluginError::Kind::frame);
}

TEST(PluginErrors, RemoteErrorIsForwarded) {
  PluginClient c(refplugin("error"), std::chrono::seconds(10));
  try {
    c.predict(phantom_window(1, 3));
    FAIL();
  } catch (const PluginError& e) {
    EXPECT_EQ(e.kind(), PluginError::Kind::remote);
    EXPECT_NE(std::string(e.what()).find("model not loaded"), std::string::npos);
  }
}

TEST(PluginErrors, CrashIsReported) {
  PluginClient c(refplugin("crash"), std::chrono::seconds(10));
  EXPECT_THROW(c.predict(phantom_window(1, 3)), PluginError);
}

TEST(PluginErrors, MissingRoleIsRefused) {
  PluginClient c(refplugin("predict-only"), std::chrono::seconds(10));
  EXPECT_FALSE(c.has_role("refine"));
  const SliceWindow w = phantom_window(1, 3);
  const ClickMask none = encode_clicks({}, w.shape(), ClickEncoding{});
  EXPECT_THROW(c.refine({3, w, SliceMask(w.shape(), 0), none, none, {}, {}}), PluginError);
}
