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

#include <random>

#include "lungseg/rle.hpp"
#include "oracles.hpp"

using namespace lungseg;

TEST(Rle, EmptyMaskHasNoRuns) {
  const auto j = rle_encode(SliceMask({4, 5}, 0));
  EXPECT_EQ(j["shape"], nlohmann::json({4, 5}));
  EXPECT_TRUE(j["runs"].empty());
}

TEST(Rle, KnownVector) {
  SliceMask m({2, 4}, 0);
  m(0, 1) = m(0, 2) = m(0, 3) = m(1, 0) = m(1, 3) = 1;
  // Row-major flattening: 0 1 1 1 | 1 0 0 1 -> runs (1,4) and (7,1).
  EXPECT_EQ(rle_runs(m), (std::vector<std::int64_t>{1, 4, 7, 1}));
  EXPECT_EQ(rle_decode(rle_encode(m)), m);
}

TEST(Rle, RandomRoundTripIsExact) {
  std::mt19937_64 rng(30);
  for (int t = 0; t < 200; ++t) {
    const Shape2D s{1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40)};
    const SliceMask m = oracle::random_mask(rng, s, (t % 10) / 10.0);
    const auto runs = rle_runs(m);
    for (std::size_t r = 2; r < runs.size(); r += 2) ASSERT_GT(runs[r], runs[r - 2] + runs[r - 1]);
    ASSERT_EQ(rle_decode(rle_encode(m)), m);
  }
}

TEST(Rle, RejectsMalformedDocuments) {
  using J = nlohmann::json;
  EXPECT_THROW(rle_decode(J{{"runs", J::array()}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2}}, {"runs", J::array()}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {0}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {0, 0}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {3, 2}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {2, 1, 0, 1}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {0, 2, 1, 1}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {-1, 1}}}), RleError);
  EXPECT_THROW(rle_decode(J{{"shape", {2, 2}}, {"runs", {"0", 1}}}), RleError);
}
