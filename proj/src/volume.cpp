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

#include "lungseg/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include <json.hpp>

#include "lungseg/kernels.hpp"
#include "lungseg/metrics.hpp"

namespace lungseg {
namespace {

constexpr char kMagic[4] = {'L', 'V', 'O', 'L'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeIntensity = 1;
constexpr std::uint8_t kDtypeMask = 2;
constexpr std::size_t kHeaderSize = 32;

void check_dims(const Dims& d) {
  if (d.height < 1 || d.width < 1 || d.n_slices < 1) {
    throw std::invalid_argument("volume dims must all be >= 1");
  }
}

void check_spacing(const Spacing& s) {
  if (!(s.dy > 0) || !(s.dx > 0) || !(s.dz > 0)) {
    throw std::invalid_argument("volume spacing must be positive");
  }
}

// Little-endian writer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int b = 0; b < 2; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { return b_[pos_++]; }
  std::uint16_t u16() {
    std::uint16_t v = b_[pos_] | (b_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(b_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

struct Header {
  std::uint8_t dtype = 0;
  Dims dims;
  Spacing spacing;
};

std::vector<std::uint8_t> encode_header(std::uint8_t dtype, const Dims& d, const Spacing& s) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kFormatVersion);
  w.u8(dtype);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(d.height));
  w.u32(static_cast<std::uint32_t>(d.width));
  w.u32(static_cast<std::uint32_t>(d.n_slices));
  w.f32(s.dy);
  w.f32(s.dx);
  w.f32(s.dz);
  return w.take();
}

// Validates the header and the payload length; returns the parsed header.
Header decode_header(std::span<const std::uint8_t> bytes, std::uint8_t expected_dtype,
                     std::size_t bytes_per_voxel) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw LvolError(LvolError::Kind::bad_magic, "LVOL: bad magic");
  }
  if (bytes.size() < kHeaderSize) {
    throw LvolError(LvolError::Kind::truncated, "LVOL: truncated header");
  }
  ByteReader r(bytes.subspan(4));
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) {
    throw LvolError(LvolError::Kind::bad_version,
                    "LVOL: unsupported format version " + std::to_string(version));
  }
  Header h;
  h.dtype = r.u8();
  r.u8();
  if (h.dtype != expected_dtype) {
    throw LvolError(LvolError::Kind::dtype_mismatch,
                    "LVOL: dtype code " + std::to_string(h.dtype) + ", expected " +
                        std::to_string(expected_dtype));
  }
  const std::uint32_t hh = r.u32(), ww = r.u32(), nn = r.u32();
  h.spacing = {r.f32(), r.f32(), r.f32()};
  constexpr std::uint32_t kMaxExtent = 1u << 16;
  if (hh == 0 || ww == 0 || nn == 0 || hh > kMaxExtent || ww > kMaxExtent || nn > kMaxExtent) {
    throw LvolError(LvolError::Kind::invalid_header, "LVOL: dims out of range");
  }
  if (!(h.spacing.dy > 0) || !(h.spacing.dx > 0) || !(h.spacing.dz > 0)) {
    throw LvolError(LvolError::Kind::invalid_header, "LVOL: non-positive spacing");
  }
  h.dims = {static_cast<int>(hh), static_cast<int>(ww), static_cast<int>(nn)};
  const std::size_t expected = h.dims.voxel_count() * bytes_per_voxel;
  const std::size_t payload = bytes.size() - kHeaderSize;
  if (payload < expected) {
    throw LvolError(LvolError::Kind::truncated,
                    "LVOL: payload has " + std::to_string(payload) + " bytes, header declares " +
                        std::to_string(expected));
  }
  if (payload > expected) {
    throw LvolError(LvolError::Kind::size_mismatch,
                    "LVOL: " + std::to_string(payload - expected) + " trailing payload bytes");
  }
  return h;
}

// File payload order is i fastest, then j, then k.
std::size_t file_index(const Dims& d, int i, int j, int k) {
  return static_cast<std::size_t>(i) +
         static_cast<std::size_t>(d.height) * (static_cast<std::size_t>(j) +
                                               static_cast<std::size_t>(d.width) * k);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LvolError(LvolError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LvolError(LvolError::Kind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LvolError(LvolError::Kind::io, "write failed for " + path.string());
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void Volume::validate() const {
  check_dims(dims);
  check_spacing(spacing);
  if (voxels.size() != dims.voxel_count()) {
    throw std::invalid_argument("volume voxel count does not match dims");
  }
}

SliceMask MaskVolume::slice(int k) const {
  auto s = slice_span(k);
  return SliceMask(dims.slice_shape(), std::vector<std::uint8_t>(s.begin(), s.end()));
}

void MaskVolume::set_slice(int k, const SliceMask& m) {
  if (m.shape() != dims.slice_shape()) throw std::invalid_argument("set_slice: shape mismatch");
  std::copy(m.values().begin(), m.values().end(),
            voxels.begin() + static_cast<std::ptrdiff_t>(offset(0, 0, k)));
}

std::size_t MaskVolume::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(voxels.begin(), voxels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

bool MaskVolume::slice_has_foreground(int k) const {
  auto s = slice_span(k);
  return std::any_of(s.begin(), s.end(), [](std::uint8_t v) { return v != 0; });
}

void MaskVolume::validate() const {
  check_dims(dims);
  if (voxels.size() != dims.voxel_count()) {
    throw std::invalid_argument("mask voxel count does not match dims");
  }
  for (auto v : voxels) {
    if (v > 1) throw std::invalid_argument("mask voxels must be 0 or 1");
  }
}

std::vector<std::uint8_t> encode_volume(const Volume& v) {
  v.validate();
  auto bytes = encode_header(kDtypeIntensity, v.dims, v.spacing);
  bytes.resize(kHeaderSize + v.dims.voxel_count() * 2);
  std::uint8_t* payload = bytes.data() + kHeaderSize;
  for (int k = 0; k < v.dims.n_slices; ++k) {
    for (int i = 0; i < v.dims.height; ++i) {
      for (int j = 0; j < v.dims.width; ++j) {
        const auto u = static_cast<std::uint16_t>(v.at(i, j, k));
        const std::size_t f = file_index(v.dims, i, j, k) * 2;
        payload[f] = static_cast<std::uint8_t>(u & 0xff);
        payload[f + 1] = static_cast<std::uint8_t>(u >> 8);
      }
    }
  }
  return bytes;
}

std::vector<std::uint8_t> encode_mask(const MaskVolume& m) {
  m.validate();
  check_spacing(m.spacing);
  auto bytes = encode_header(kDtypeMask, m.dims, m.spacing);
  bytes.resize(kHeaderSize + m.dims.voxel_count());
  std::uint8_t* payload = bytes.data() + kHeaderSize;
  for (int k = 0; k < m.dims.n_slices; ++k) {
    for (int i = 0; i < m.dims.height; ++i) {
      for (int j = 0; j < m.dims.width; ++j) payload[file_index(m.dims, i, j, k)] = m.at(i, j, k);
    }
  }
  return bytes;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  const Header h = decode_header(bytes, kDtypeIntensity, 2);
  Volume v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  v.voxels.resize(h.dims.voxel_count());
  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  for (int k = 0; k < h.dims.n_slices; ++k) {
    for (int j = 0; j < h.dims.width; ++j) {
      for (int i = 0; i < h.dims.height; ++i) {
        const std::size_t f = file_index(h.dims, i, j, k) * 2;
        const auto u = static_cast<std::uint16_t>(payload[f] | (payload[f + 1] << 8));
        v.voxels[v.offset(i, j, k)] = static_cast<std::int16_t>(u);
      }
    }
  }
  return v;
}

MaskVolume decode_mask(std::span<const std::uint8_t> bytes) {
  const Header h = decode_header(bytes, kDtypeMask, 1);
  MaskVolume m("", h.dims, h.spacing);
  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  for (int k = 0; k < h.dims.n_slices; ++k) {
    for (int j = 0; j < h.dims.width; ++j) {
      for (int i = 0; i < h.dims.height; ++i) {
        const std::uint8_t b = payload[file_index(h.dims, i, j, k)];
        if (b > 1) throw LvolError(LvolError::Kind::invalid_payload, "LVOL: mask voxel not 0/1");
        m.at(i, j, k) = b;
      }
    }
  }
  return m;
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
  write_file(path, encode_volume(v));
}

void write_mask(const std::filesystem::path& path, const MaskVolume& m) {
  write_file(path, encode_mask(m));
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }

MaskVolume read_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

double normalize_intensity(double raw, IntensityWindow w) {
  return std::clamp((raw - w.lo) / (w.hi - w.lo), 0.0, 1.0);
}

FloatPlane preprocess_slice(std::span<const std::int16_t> raw, Shape2D shape, IntensityWindow w) {
  if (raw.size() != shape.size()) throw std::invalid_argument("preprocess_slice: size mismatch");
  if (!(w.hi > w.lo)) throw std::invalid_argument("intensity window must have hi > lo");
  FloatPlane out(shape);
  kernels::normalize_window(raw, out.values(), w.lo, w.hi);
  return out;
}

SliceWindow extract_window(const Volume& v, int k, int radius, IntensityWindow w) {
  if (k < 0 || k >= v.dims.n_slices) {
    throw std::out_of_range("extract_window: slice " + std::to_string(k) + " out of range");
  }
  if (radius < 0) throw std::invalid_argument("extract_window: negative radius");
  SliceWindow win;
  win.center_index = k;
  win.radius = radius;
  win.channels.reserve(static_cast<std::size_t>(2 * radius + 1));
  for (int o = -radius; o <= radius; ++o) {
    const int src = std::clamp(k + o, 0, v.dims.n_slices - 1);
    win.channels.push_back(preprocess_slice(v.slice(src), v.dims.slice_shape(), w));
  }
  return win;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (!doc.is_array()) throw std::runtime_error("manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  for (const auto& j : doc) {
    ManifestEntry e;
    e.scan_id = j.at("scan_id").get<std::string>();
    e.patient_id = j.at("patient_id").get<std::string>();
    e.volume_path = j.at("volume_path").get<std::string>();
    if (j.contains("mask_path") && !j["mask_path"].is_null()) {
      e.mask_path = j["mask_path"].get<std::string>();
    }
    e.relative_foreground_area = j.value("relative_foreground_area", 0.0);
    if (e.relative_foreground_area < 0 || e.relative_foreground_area > 1) {
      throw std::runtime_error("manifest: relative_foreground_area outside [0,1] for " +
                               e.scan_id);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j;
    j["scan_id"] = e.scan_id;
    j["patient_id"] = e.patient_id;
    j["volume_path"] = e.volume_path;
    j["mask_path"] = e.mask_path ? nlohmann::json(*e.mask_path) : nlohmann::json(nullptr);
    j["relative_foreground_area"] = e.relative_foreground_area;
    doc.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

Volume load_entry_volume(const ManifestEntry& e, const std::filesystem::path& base_dir) {
  Volume v = read_volume(resolve(e.volume_path, base_dir));
  v.scan_id = e.scan_id;
  v.patient_id = e.patient_id;
  return v;
}

std::optional<MaskVolume> load_entry_mask(const ManifestEntry& e,
                                          const std::filesystem::path& base_dir) {
  if (!e.mask_path) return std::nullopt;
  MaskVolume m = read_mask(resolve(*e.mask_path, base_dir));
  m.scan_id = e.scan_id;
  return m;
}

Phantom generate_phantom(std::uint64_t seed, const PhantomSpec& spec, const std::string& scan_id,
                         const std::string& patient_id) {
  const Dims d = spec.dims;
  if (d.height < 16 || d.width < 16 || d.n_slices < 16) {
    throw std::invalid_argument("phantom dims must be >= 16 per axis");
  }
  if (spec.min_lesions < 0 || spec.max_lesions < spec.min_lesions) {
    throw std::invalid_argument("phantom lesion count range is invalid");
  }
  auto fits = [&](double r, int extent) { return 2.0 * std::ceil(r) + 1.0 <= extent; };

  std::mt19937_64 rng(seed);
  std::vector<Ellipsoid> lesions;
  if (spec.lesions) {
    lesions = *spec.lesions;
    for (const auto& e : lesions) {
      if (!(e.ri > 0 && e.rj > 0 && e.rk > 0)) {
        throw std::invalid_argument("lesion radii must be positive");
      }
      if (!fits(e.ri, d.height) || !fits(e.rj, d.width) || !fits(e.rk, d.n_slices)) {
        throw std::invalid_argument("lesion radius exceeds volume extent");
      }
    }
  } else {
    if (!fits(spec.max_radius_xy, std::min(d.height, d.width)) ||
        !fits(spec.max_radius_z, d.n_slices)) {
      throw std::invalid_argument("lesion radius exceeds volume extent");
    }
    std::uniform_int_distribution<int> count(spec.min_lesions, spec.max_lesions);
    std::uniform_real_distribution<double> rxy(spec.min_radius_xy, spec.max_radius_xy);
    std::uniform_real_distribution<double> rz(spec.min_radius_z, spec.max_radius_z);
    const int n = count(rng);
    for (int l = 0; l < n; ++l) {
      Ellipsoid e;
      e.ri = rxy(rng);
      e.rj = rxy(rng);
      e.rk = rz(rng);
      auto center = [&](double r, int extent) {
        const int lo = static_cast<int>(std::ceil(r));
        return static_cast<double>(std::uniform_int_distribution<int>(lo, extent - 1 - lo)(rng));
      };
      e.ci = center(e.ri, d.height);
      e.cj = center(e.rj, d.width);
      e.ck = center(e.rk, d.n_slices);
      lesions.push_back(e);
    }
  }

  MaskVolume mask(scan_id, d, spec.spacing);
  for (const auto& e : lesions) {
    const int i0 = std::max(0, static_cast<int>(std::floor(e.ci - e.ri)));
    const int i1 = std::min(d.height - 1, static_cast<int>(std::ceil(e.ci + e.ri)));
    const int j0 = std::max(0, static_cast<int>(std::floor(e.cj - e.rj)));
    const int j1 = std::min(d.width - 1, static_cast<int>(std::ceil(e.cj + e.rj)));
    const int k0 = std::max(0, static_cast<int>(std::floor(e.ck - e.rk)));
    const int k1 = std::min(d.n_slices - 1, static_cast<int>(std::ceil(e.ck + e.rk)));
    for (int k = k0; k <= k1; ++k)
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j)
          if (e.contains(i, j, k)) mask.at(i, j, k) = 1;
  }

  // Distractors keep a 3-voxel gap from every lesion voxel.
  std::vector<Ellipsoid> distractors;
  if (spec.max_distractors > 0) {
    std::uniform_int_distribution<int> count(std::max(0, spec.min_distractors),
                                             std::max(0, spec.max_distractors));
    std::uniform_real_distribution<double> rad(1.5, 2.5);
    const int n = count(rng);
    for (int t = 0; t < n; ++t) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double r = rad(rng);
        const int lo = static_cast<int>(std::ceil(r));
        Ellipsoid s{static_cast<double>(std::uniform_int_distribution<int>(lo, d.height - 1 - lo)(rng)),
                    static_cast<double>(std::uniform_int_distribution<int>(lo, d.width - 1 - lo)(rng)),
                    static_cast<double>(std::uniform_int_distribution<int>(lo, d.n_slices - 1 - lo)(rng)),
                    r, r, r};
        const double margin = r + 3.0;
        const int m = static_cast<int>(std::ceil(margin));
        bool clear = true;
        for (int k = std::max(0, static_cast<int>(s.ck) - m);
             clear && k <= std::min(d.n_slices - 1, static_cast<int>(s.ck) + m); ++k)
          for (int i = std::max(0, static_cast<int>(s.ci) - m);
               clear && i <= std::min(d.height - 1, static_cast<int>(s.ci) + m); ++i)
            for (int j = std::max(0, static_cast<int>(s.cj) - m);
                 j <= std::min(d.width - 1, static_cast<int>(s.cj) + m); ++j) {
              const double di = i - s.ci, dj = j - s.cj, dk = k - s.ck;
              if (mask.at(i, j, k) && di * di + dj * dj + dk * dk <= margin * margin) {
                clear = false;
                break;
              }
            }
        if (clear) {
          distractors.push_back(s);
          break;
        }
      }
    }
  }

  Volume vol;
  vol.scan_id = scan_id;
  vol.patient_id = patient_id;
  vol.dims = d;
  vol.spacing = spec.spacing;
  vol.voxels.resize(d.voxel_count());
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0 ? spec.noise_sd : 1.0);
  for (int k = 0; k < d.n_slices; ++k) {
    for (int i = 0; i < d.height; ++i) {
      for (int j = 0; j < d.width; ++j) {
        double base = spec.background_hu;
        if (mask.at(i, j, k)) {
          base = spec.lesion_hu;
        } else {
          for (const auto& s : distractors) {
            if (s.contains(i, j, k)) {
              base = spec.distractor_hu;
              break;
            }
          }
        }
        const double value = base + (spec.noise_sd > 0 ? noise(rng) : 0.0);
        vol.voxels[vol.offset(i, j, k)] =
            static_cast<std::int16_t>(std::clamp(std::lround(value), -32768L, 32767L));
      }
    }
  }

  Phantom p;
  p.entry.scan_id = scan_id;
  p.entry.patient_id = patient_id;
  p.entry.relative_foreground_area =
      static_cast<double>(mask.foreground_count()) / static_cast<double>(d.voxel_count());
  p.volume = std::move(vol);
  p.mask = std::move(mask);
  return p;
}

std::uint64_t phantom_seed(std::uint64_t seed, int idx) {
  return seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(idx) * 0xbf58476d1ce4e5b9ull + 1;
}

std::vector<ManifestEntry> write_phantom_dataset(const std::filesystem::path& dir, int count,
                                                 std::uint64_t seed, const PhantomSpec& spec,
                                                 int scans_per_patient) {
  if (count < 0) throw std::invalid_argument("phantom count must be >= 0");
  if (scans_per_patient < 1) throw std::invalid_argument("scans per patient must be >= 1");
  std::filesystem::create_directories(dir / "scans");
  std::filesystem::create_directories(dir / "masks");
  std::vector<ManifestEntry> entries;
  for (int n = 0; n < count; ++n) {
    char id[32], patient[32];
    std::snprintf(id, sizeof id, "ph%03d", n);
    std::snprintf(patient, sizeof patient, "P%03d", n / scans_per_patient);
    Phantom p = generate_phantom(phantom_seed(seed, n), spec, id, patient);
    p.entry.volume_path = std::string("scans/") + id + ".lvol";
    p.entry.mask_path = std::string("masks/") + id + ".lvol";
    write_volume(dir / p.entry.volume_path, p.volume);
    write_mask(dir / *p.entry.mask_path, p.mask);
    entries.push_back(p.entry);
  }
  write_manifest(dir / "manifest.json", entries);
  return entries;
}

ScanStats scan_stats(std::span<const ManifestEntry> manifest, std::span<const MaskVolume> masks) {
  if (manifest.empty()) throw std::invalid_argument("scan_stats: empty manifest");
  if (masks.size() != manifest.size()) {
    throw std::invalid_argument("scan_stats: a mask is required for every entry");
  }
  std::vector<double> slices, lesion_slices, areas;
  for (std::size_t n = 0; n < manifest.size(); ++n) {
    const MaskVolume& m = masks[n];
    slices.push_back(m.dims.n_slices);
    int with_lesion = 0;
    for (int k = 0; k < m.dims.n_slices; ++k) with_lesion += m.slice_has_foreground(k);
    lesion_slices.push_back(with_lesion);
    areas.push_back(static_cast<double>(m.foreground_count()) /
                    static_cast<double>(m.dims.voxel_count()));
  }
  return {median(std::move(slices)), median(std::move(lesion_slices)), median(std::move(areas))};
}

}  // namespace lungseg
