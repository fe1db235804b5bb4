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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg {

struct Dims {
  int height = 0;
  int width = 0;
  int n_slices = 0;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(height) * width * n_slices;
  }
  Shape2D slice_shape() const { return {height, width}; }
  bool operator==(const Dims&) const = default;
};

// Millimeters.
struct Spacing {
  float dy = 1.0f;
  float dx = 1.0f;
  float dz = 1.0f;
  bool operator==(const Spacing&) const = default;
};

// CT intensities in Hounsfield-like units. Slices are stored contiguously and
// each slice is row-major, so voxel (i, j, k) lives at (k*height + i)*width + j.
struct Volume {
  std::string scan_id;
  std::string patient_id;
  Dims dims;
  Spacing spacing;
  std::vector<std::int16_t> voxels;

  std::int16_t at(int i, int j, int k) const { return voxels[offset(i, j, k)]; }
  std::span<const std::int16_t> slice(int k) const {
    return {voxels.data() + static_cast<std::size_t>(k) * dims.slice_shape().size(),
            dims.slice_shape().size()};
  }
  std::size_t offset(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.height + i) * dims.width + j;
  }
  void validate() const;
};

struct MaskVolume {
  std::string scan_id;
  Dims dims;
  Spacing spacing;
  std::vector<std::uint8_t> voxels;

  MaskVolume() = default;
  MaskVolume(std::string id, Dims d, Spacing s = {})
      : scan_id(std::move(id)), dims(d), spacing(s), voxels(d.voxel_count(), 0) {}

  std::uint8_t at(int i, int j, int k) const { return voxels[offset(i, j, k)]; }
  std::uint8_t& at(int i, int j, int k) { return voxels[offset(i, j, k)]; }
  std::span<const std::uint8_t> slice_span(int k) const {
    return {voxels.data() + static_cast<std::size_t>(k) * dims.slice_shape().size(),
            dims.slice_shape().size()};
  }
  SliceMask slice(int k) const;
  void set_slice(int k, const SliceMask& m);
  std::size_t offset(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.height + i) * dims.width + j;
  }
  std::size_t foreground_count() const;
  bool slice_has_foreground(int k) const;
  void validate() const;
  bool same_voxels(const MaskVolume& o) const { return dims == o.dims && voxels == o.voxels; }
};

// Stack of normalized planes around slice `center_index`.
struct SliceWindow {
  int center_index = 0;
  int radius = 2;
  std::vector<FloatPlane> channels;

  const FloatPlane& center() const { return channels[static_cast<std::size_t>(radius)]; }
  Shape2D shape() const { return channels.empty() ? Shape2D{} : channels.front().shape(); }
};

struct ManifestEntry {
  std::string scan_id;
  std::string patient_id;
  std::string volume_path;
  std::optional<std::string> mask_path;
  double relative_foreground_area = 0.0;
};

// Intensity window mapped onto [0,1].
struct IntensityWindow {
  double lo = -1000.0;
  double hi = 400.0;
};

// ---- LVOL binary format ----------------------------------------------------

class LvolError : public std::runtime_error {
 public:
  enum class Kind {
    io,
    bad_magic,
    bad_version,
    dtype_mismatch,
    invalid_header,
    truncated,
    size_mismatch,
    invalid_payload,
  };
  LvolError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void write_volume(const std::filesystem::path& path, const Volume& v);
void write_mask(const std::filesystem::path& path, const MaskVolume& m);
// Identifiers are not part of the format; callers fill them from the manifest.
Volume read_volume(const std::filesystem::path& path);
MaskVolume read_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_volume(const Volume& v);
std::vector<std::uint8_t> encode_mask(const MaskVolume& m);
Volume decode_volume(std::span<const std::uint8_t> bytes);
MaskVolume decode_mask(std::span<const std::uint8_t> bytes);

// ---- preprocessing / windows ----------------------------------------------

double normalize_intensity(double raw, IntensityWindow w = {});
FloatPlane preprocess_slice(std::span<const std::int16_t> raw, Shape2D shape,
                            IntensityWindow w = {});
SliceWindow extract_window(const Volume& v, int k, int radius = 2, IntensityWindow w = {});

// ---- manifest --------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
// Loads an entry's volume (and mask when present), resolving relative paths
// against `base_dir`.
Volume load_entry_volume(const ManifestEntry& e, const std::filesystem::path& base_dir);
std::optional<MaskVolume> load_entry_mask(const ManifestEntry& e,
                                          const std::filesystem::path& base_dir);

// ---- phantoms --------------------------------------------------------------

// Axis-aligned ellipsoid in voxel units.
struct Ellipsoid {
  double ci = 0, cj = 0, ck = 0;
  double ri = 1, rj = 1, rk = 1;

  bool contains(int i, int j, int k) const {
    const double a = (i - ci) / ri, b = (j - cj) / rj, c = (k - ck) / rk;
    return a * a + b * b + c * c <= 1.0;
  }
};

struct PhantomSpec {
  Dims dims{64, 64, 16};
  Spacing spacing{0.7f, 0.7f, 2.5f};
  int min_lesions = 1;
  int max_lesions = 3;
  double min_radius_xy = 3.0;
  double max_radius_xy = 7.0;
  double min_radius_z = 1.0;
  double max_radius_z = 3.0;
  // Bright non-lesion blobs (vessel cross-sections) that a plain threshold
  // picks up as spurious foreground.
  int min_distractors = 0;
  int max_distractors = 2;
  double background_hu = -850.0;
  double lesion_hu = 30.0;
  double distractor_hu = 40.0;
  double noise_sd = 15.0;
  // When set, used verbatim instead of sampling lesions.
  std::optional<std::vector<Ellipsoid>> lesions;
};

struct Phantom {
  Volume volume;
  MaskVolume mask;
  ManifestEntry entry;
};

Phantom generate_phantom(std::uint64_t seed, const PhantomSpec& spec,
                         const std::string& scan_id = "phantom",
                         const std::string& patient_id = "P0");

// Seed of the idx-th phantom of a dataset generated with `seed`.
std::uint64_t phantom_seed(std::uint64_t seed, int idx);

// Writes `count` phantoms to dir/scans/<id>.lvol and dir/masks/<id>.lvol plus
// dir/manifest.json, with ids ph000, ph001, ... and `scans_per_patient`
// consecutive scans sharing a patient id.
std::vector<ManifestEntry> write_phantom_dataset(const std::filesystem::path& dir, int count,
                                                 std::uint64_t seed, const PhantomSpec& spec = {},
                                                 int scans_per_patient = 1);

struct ScanStats {
  double median_slices = 0;
  double median_lesion_slices = 0;
  double median_relative_area = 0;
};

ScanStats scan_stats(std::span<const ManifestEntry> manifest, std::span<const MaskVolume> masks);

}  // namespace lungseg
