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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "lungseg/volume.hpp"
#include "test_util.hpp"

using namespace lungseg;

namespace {

Volume small_volume() {
  Volume v;
  v.scan_id = "v";
  v.dims = {3, 4, 2};
  v.spacing = {0.5f, 0.75f, 2.0f};
  v.voxels.resize(v.dims.voxel_count());
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) v.voxels[v.offset(i, j, k)] = static_cast<std::int16_t>(100 * k + 10 * i + j - 50);
  return v;
}

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (std::uint32_t(b[at + 3]) << 24);
}

}  // namespace

TEST(Lvol, HeaderLayout) {
  const auto bytes = encode_volume(small_volume());
  ASSERT_EQ(bytes.size(), 32u + 3 * 4 * 2 * 2);
  EXPECT_EQ(std::memcmp(bytes.data(), "LVOL", 4), 0);
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);  // version
  EXPECT_EQ(bytes[6], 1);                    // int16 intensities
  EXPECT_EQ(u32_at(bytes, 8), 3u);
  EXPECT_EQ(u32_at(bytes, 12), 4u);
  EXPECT_EQ(u32_at(bytes, 16), 2u);
  float dz;
  std::memcpy(&dz, bytes.data() + 28, 4);
  EXPECT_EQ(dz, 2.0f);
}

TEST(Lvol, PayloadIsIFastestThenJThenK) {
  const Volume v = small_volume();
  const auto bytes = encode_volume(v);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 3; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i + 3 * (j + 4 * k));
        const auto lo = bytes[32 + 2 * idx], hi = bytes[32 + 2 * idx + 1];
        EXPECT_EQ(static_cast<std::int16_t>(lo | (hi << 8)), v.at(i, j, k));
      }
}

TEST(Lvol, VolumeRoundTrip) {
  const Volume v = small_volume();
  const Volume back = decode_volume(encode_volume(v));
  EXPECT_EQ(back.dims, v.dims);
  EXPECT_EQ(back.spacing, v.spacing);
  EXPECT_EQ(back.voxels, v.voxels);
}

TEST(Lvol, MaskRoundTripThroughFile) {
  testutil::TempDir dir;
  MaskVolume m("m", {5, 6, 3});
  std::mt19937_64 rng(4);
  for (auto& x : m.voxels) x = rng() & 1;
  write_mask(dir.path() / "m.lvol", m);
  const MaskVolume back = read_mask(dir.path() / "m.lvol");
  EXPECT_TRUE(back.same_voxels(m));
}

TEST(Lvol, RejectsBadMagic) {
  auto bytes = encode_volume(small_volume());
  bytes[0] = 'X';
  try {
    decode_volume(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::bad_magic);
  }
}

TEST(Lvol, RejectsUnknownVersion) {
  auto bytes = encode_volume(small_volume());
  bytes[4] = 2;
  try {
    decode_volume(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::bad_version);
  }
}

TEST(Lvol, RejectsDtypeMismatch) {
  const auto bytes = encode_volume(small_volume());
  try {
    decode_mask(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::dtype_mismatch);
  }
}

TEST(Lvol, RejectsTruncatedPayload) {
  auto bytes = encode_volume(small_volume());
  bytes.pop_back();
  try {
    decode_volume(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::truncated);
  }
}

TEST(Lvol, RejectsTrailingBytes) {
  auto bytes = encode_volume(small_volume());
  bytes.push_back(0);
  try {
    decode_volume(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::size_mismatch);
  }
}

TEST(Lvol, RejectsZeroDims) {
  auto bytes = encode_volume(small_volume());
  bytes[8] = bytes[9] = bytes[10] = bytes[11] = 0;
  EXPECT_THROW(decode_volume(bytes), LvolError);
}

TEST(Lvol, RejectsNonBinaryMask) {
  MaskVolume m("m", {2, 2, 1});
  auto bytes = encode_mask(m);
  bytes.back() = 7;
  try {
    decode_mask(bytes);
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::invalid_payload);
  }
}

TEST(Lvol, MissingFileIsIoError) {
  try {
    read_volume("/nonexistent/x.lvol");
    FAIL();
  } catch (const LvolError& e) {
    EXPECT_EQ(e.kind(), LvolError::Kind::io);
  }
}

TEST(Intensity, WindowMapsToUnitRange) {
  EXPECT_DOUBLE_EQ(normalize_intensity(-1000), 0.0);
  EXPECT_DOUBLE_EQ(normalize_intensity(400), 1.0);
  EXPECT_DOUBLE_EQ(normalize_intensity(-300), 0.5);
  EXPECT_DOUBLE_EQ(normalize_intensity(-3000), 0.0);
  EXPECT_DOUBLE_EQ(normalize_intensity(3000), 1.0);
}

TEST(Window, ClampsAtScanEnds) {
  const Volume v = small_volume();
  const SliceWindow w = extract_window(v, 0, 2);
  ASSERT_EQ(w.channels.size(), 5u);
  EXPECT_EQ(w.channels[0], w.channels[2]);  // below slice 0 repeats slice 0
  EXPECT_EQ(w.channels[1], w.channels[2]);
  EXPECT_EQ(w.channels[3], w.channels[4]);  // above the last slice repeats it
  EXPECT_NE(w.channels[2], w.channels[3]);
  EXPECT_FLOAT_EQ(w.center()(1, 2), static_cast<float>(normalize_intensity(v.at(1, 2, 0))));
  EXPECT_THROW(extract_window(v, 2, 2), std::out_of_range);
}

TEST(Manifest, RoundTripWithNullMask) {
  testutil::TempDir dir;
  std::vector<ManifestEntry> in = {{"a", "P1", "scans/a.lvol", std::string("masks/a.lvol"), 0.01},
                                   {"b", "P1", "scans/b.lvol", std::nullopt, 0.0}};
  write_manifest(dir.path() / "manifest.json", in);
  const auto out = read_manifest(dir.path() / "manifest.json");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].mask_path, in[0].mask_path);
  EXPECT_FALSE(out[1].mask_path.has_value());
  EXPECT_DOUBLE_EQ(out[0].relative_foreground_area, 0.01);
}

TEST(Phantom, DeterministicPerSeed) {
  const Phantom a = generate_phantom(11, {});
  const Phantom b = generate_phantom(11, {});
  const Phantom c = generate_phantom(12, {});
  EXPECT_EQ(a.volume.voxels, b.volume.voxels);
  EXPECT_TRUE(a.mask.same_voxels(b.mask));
  EXPECT_NE(a.volume.voxels, c.volume.voxels);
}

TEST(Phantom, LesionsAreBrightAndSmall) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Phantom p = generate_phantom(seed, {});
    EXPECT_EQ(p.volume.dims, (Dims{64, 64, 16}));
    const auto fg = p.mask.foreground_count();
    EXPECT_GT(fg, 0u);
    EXPECT_LT(fg, p.mask.voxels.size() / 10);
    double lesion = 0, background = 0;
    std::size_t nb = 0;
    for (std::size_t n = 0; n < p.mask.voxels.size(); ++n) {
      if (p.mask.voxels[n]) {
        lesion += p.volume.voxels[n];
      } else {
        background += p.volume.voxels[n];
        ++nb;
      }
    }
    EXPECT_GT(lesion / static_cast<double>(fg), -100.0);
    EXPECT_LT(background / static_cast<double>(nb), -700.0);
    EXPECT_DOUBLE_EQ(p.entry.relative_foreground_area,
                     static_cast<double>(fg) / static_cast<double>(p.mask.voxels.size()));
  }
}

TEST(Phantom, ExplicitLesionsAreUsedVerbatim) {
  PhantomSpec spec;
  spec.lesions = std::vector<Ellipsoid>{{32, 32, 8, 4, 4, 1}};
  spec.max_distractors = 0;
  const Phantom p = generate_phantom(1, spec);
  EXPECT_EQ(p.mask.at(32, 32, 8), 1);
  EXPECT_EQ(p.mask.at(32, 37, 8), 0);
  EXPECT_EQ(p.mask.at(32, 32, 10), 0);
}

TEST(Phantom, DatasetWriterProducesLoadableManifest) {
  testutil::TempDir dir;
  const auto entries = write_phantom_dataset(dir.path(), 4, 9, {}, 2);
  const auto manifest = read_manifest(dir.path() / "manifest.json");
  ASSERT_EQ(manifest.size(), 4u);
  EXPECT_EQ(manifest[0].patient_id, manifest[1].patient_id);
  EXPECT_NE(manifest[1].patient_id, manifest[2].patient_id);
  const Volume v = load_entry_volume(manifest[3], dir.path());
  const auto m = load_entry_mask(manifest[3], dir.path());
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(v.scan_id, "ph003");
  EXPECT_EQ(m->dims, v.dims);
}

TEST(ScanStats, MediansOverManifest) {
  std::vector<ManifestEntry> entries;
  std::vector<MaskVolume> masks;
  for (int n = 0; n < 3; ++n) {
    MaskVolume m("s", {4, 4, 2 + n});
    for (int k = 0; k <= n; ++k) m.at(0, 0, k) = 1;
    masks.push_back(m);
    entries.push_back({"s", "p", "", std::nullopt, 0});
  }
  const ScanStats s = scan_stats(entries, masks);
  EXPECT_DOUBLE_EQ(s.median_slices, 3);
  EXPECT_DOUBLE_EQ(s.median_lesion_slices, 2);
  EXPECT_DOUBLE_EQ(s.median_relative_area, 2.0 / 48.0);
}
