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

#include <cmath>
#include <random>

#include "lungseg/click_engine.hpp"
#include "oracles.hpp"

using namespace lungseg;

TEST(ClickMask, PeakIsOneAndSigmaGivesExpMinusHalf) {
  const std::vector<Pixel> c = {{30, 30}};
  const ClickMask m = encode_clicks(c, {64, 64}, 10.0, 30.0);
  EXPECT_NEAR(m.values(30, 30), 1.0, 1e-12);
  EXPECT_NEAR(m.values(30, 40), std::exp(-0.5), 1e-9);
  EXPECT_NEAR(m.values(40, 30), std::exp(-0.5), 1e-9);
}

TEST(ClickMask, ZeroAtAndBeyondClipRadius) {
  const std::vector<Pixel> c = {{32, 32}};
  const ClickMask m = encode_clicks(c, {96, 96}, 10.0, 30.0);
  EXPECT_EQ(m.values(32, 62), 0.0);  // exactly at the clip radius
  EXPECT_EQ(m.values(32 + 18, 32 + 24), 0.0);  // 18^2 + 24^2 = 30^2
  EXPECT_GT(m.values(32, 61), 0.0);
  for (int i = 0; i < 96; ++i)
    for (int j = 0; j < 96; ++j)
      if ((i - 32) * (i - 32) + (j - 32) * (j - 32) >= 900) {
        ASSERT_EQ(m.values(i, j), 0.0);
      }
}

TEST(ClickMask, NoClicksGivesZeroPlane) {
  const ClickMask m = encode_clicks({}, {8, 8}, 10.0, 30.0);
  for (double v : m.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(ClickMask, MatchesGaussianSumOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    std::vector<Pixel> clicks;
    for (int n = 0; n < 1 + t % 4; ++n) {
      clicks.push_back({static_cast<int>(rng() % 48), static_cast<int>(rng() % 48)});
    }
    const double sigma = 2.0 + (t % 5) * 3.0, clip = sigma * 3.0;
    const ClickMask m = encode_clicks(clicks, {48, 48}, sigma, clip);
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 48; ++j)
        ASSERT_NEAR(m.values(i, j), oracle::gaussian_sum(clicks, i, j, sigma, clip), 1e-12);
  }
}

TEST(ClickMask, SuperposesAdditively) {
  const std::vector<Pixel> a = {{10, 10}}, b = {{15, 18}}, ab = {{10, 10}, {15, 18}};
  const auto ma = encode_clicks(a, {40, 40}, 10, 30), mb = encode_clicks(b, {40, 40}, 10, 30),
             mab = encode_clicks(ab, {40, 40}, 10, 30);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) EXPECT_NEAR(mab.values(i, j), ma.values(i, j) + mb.values(i, j), 1e-12);
}

TEST(ClickCache, CapIsTwelvePerPolarityPerSlice) {
  ClickCache cache(2, {32, 32});
  for (int n = 0; n < 12; ++n) {
    EXPECT_EQ(cache.add({0, {n, n}, Polarity::positive}), AddResult::accepted);
  }
  EXPECT_EQ(cache.add({0, {20, 1}, Polarity::positive}), AddResult::cap);
  EXPECT_EQ(cache.count(0, Polarity::positive), 12);
  EXPECT_EQ(cache.add({0, {20, 1}, Polarity::negative}), AddResult::accepted);
  EXPECT_EQ(cache.add({1, {20, 1}, Polarity::positive}), AddResult::accepted);
}

TEST(ClickCache, DuplicateIsRejectedWithoutMutation) {
  ClickCache cache(1, {8, 8});
  EXPECT_TRUE(cache.add_click({0, {3, 3}, Polarity::positive}));
  EXPECT_EQ(cache.add({0, {3, 3}, Polarity::positive}), AddResult::duplicate);
  EXPECT_EQ(cache.count(0, Polarity::positive), 1);
  EXPECT_EQ(cache.add({0, {3, 3}, Polarity::negative}), AddResult::accepted);
}

TEST(ClickCache, OutOfBoundsThrows) {
  ClickCache cache(2, {8, 8});
  EXPECT_THROW(cache.add({2, {0, 0}, Polarity::positive}), std::out_of_range);
  EXPECT_THROW(cache.add({0, {8, 0}, Polarity::positive}), std::out_of_range);
  EXPECT_THROW(cache.add({0, {0, -1}, Polarity::negative}), std::out_of_range);
}

TEST(ClickCache, ResetProbabilityExtremes) {
  ClickCache never(1, {8, 8}, {12, 0.0, 1});
  ClickCache always(1, {8, 8}, {12, 1.0, 1});
  never.add({0, {1, 1}, Polarity::positive});
  always.add({0, {1, 1}, Polarity::positive});
  for (int n = 0; n < 20; ++n) EXPECT_FALSE(never.maybe_reset());
  EXPECT_EQ(never.total(), 1u);
  EXPECT_TRUE(always.maybe_reset());
  EXPECT_EQ(always.total(), 0u);
}

TEST(ClickCache, ResetRateMatchesProbability) {
  ClickCache cache(1, {8, 8}, {12, 0.3, 99});
  int resets = 0;
  for (int n = 0; n < 10000; ++n) resets += cache.maybe_reset();
  EXPECT_NEAR(resets / 10000.0, 0.3, 0.02);
}

TEST(ClickCache, ClearSliceOnlyTouchesThatSlice) {
  ClickCache cache(2, {8, 8});
  cache.add({0, {1, 1}, Polarity::positive});
  cache.add({1, {1, 1}, Polarity::negative});
  cache.clear_slice(0);
  EXPECT_EQ(cache.count(0, Polarity::positive), 0);
  EXPECT_EQ(cache.count(1, Polarity::negative), 1);
}

TEST(ClickCache, MasksForSliceSeparatePolarities) {
  ClickCache cache(1, {16, 16});
  cache.add({0, {4, 4}, Polarity::positive});
  cache.add({0, {12, 12}, Polarity::negative});
  const auto [pos, neg] = masks_for_slice(cache, 0);
  EXPECT_NEAR(pos.values(4, 4), 1.0, 1e-12);
  EXPECT_NEAR(neg.values(12, 12), 1.0, 1e-12);
  EXPECT_LT(pos.values(12, 12), 1.0);
}

TEST(Clicks, JsonRoundTrip) {
  const Click c{3, {5, 7}, Polarity::negative};
  const auto j = click_to_json(c, 2);
  EXPECT_EQ(j["polarity"], "neg");
  const Click back = click_from_json(j);
  EXPECT_EQ(back.slice, 3);
  EXPECT_EQ(back.position, (Pixel{5, 7}));
  EXPECT_EQ(back.polarity, Polarity::negative);
}
