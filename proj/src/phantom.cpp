#include "cfs/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstring>
#include <string>

#include "cfs/mask_io.hpp"
#include "cfs/rng.hpp"

namespace cfs {

std::optional<VoxelLabel> decode_voxel_label(std::uint8_t code) {
  if (code == 0) return std::nullopt;
  if (code > kMaxVoxelLabel) {
    throw Error(ErrorCode::InvalidArgument, "voxel label " + std::to_string(code) + " out of range");
  }
  const int v = code - 1;
  return VoxelLabel{category_from_index(v / kMaxFragmentsPerCategory), v % kMaxFragmentsPerCategory};
}

LabelVolume::LabelVolume(std::array<int, 3> dims, std::array<double, 3> spacing_mm)
    : dims_(dims), spacing_(spacing_mm) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw Error(ErrorCode::InvalidArgument, "volume dims must be >= 1");
    if (!(spacing_mm[a] > 0.0) || !std::isfinite(spacing_mm[a])) {
      throw Error(ErrorCode::InvalidArgument, "volume spacing must be positive");
    }
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
                        static_cast<std::size_t>(dims[2]);
  mu_.assign(n, 0.0f);
  labels_.assign(n, 0);
}

std::array<double, 3> LabelVolume::extent_mm() const noexcept {
  return {dims_[0] * spacing_[0], dims_[1] * spacing_[1], dims_[2] * spacing_[2]};
}

std::array<int, 3> LabelVolume::coords(std::size_t index) const noexcept {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny), static_cast<int>(index / (nx * ny))};
}

std::array<double, 3> LabelVolume::voxel_center(std::size_t index) const noexcept {
  const auto c = coords(index);
  return {(c[0] + 0.5) * spacing_[0], (c[1] + 0.5) * spacing_[1], (c[2] + 0.5) * spacing_[2]};
}

int LabelVolume::fragment_count(CategoryId c) const noexcept {
  const int lo = encode_voxel_label(c, 0);
  const int hi = encode_voxel_label(c, kMaxFragmentsPerCategory - 1);
  int count = 0;
  for (std::uint8_t code : labels_) {
    if (code >= lo && code <= hi) count = std::max(count, code - lo + 1);
  }
  return count;
}

std::vector<std::size_t> LabelVolume::voxels_of(CategoryId c) const {
  const int lo = encode_voxel_label(c, 0);
  const int hi = encode_voxel_label(c, kMaxFragmentsPerCategory - 1);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= lo && labels_[i] <= hi) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabelVolume::voxels_of(CategoryId c, int fragment) const {
  const std::uint8_t code = encode_voxel_label(c, fragment);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == code) out.push_back(i);
  }
  return out;
}

void validate(const PhantomSpec& spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec.dims[a] < 16) throw Error(ErrorCode::InvalidArgument, "phantom dims must be >= 16 per axis");
    if (!(spec.spacing_mm[a] > 0.0)) throw Error(ErrorCode::InvalidArgument, "phantom spacing must be positive");
  }
  for (int c = 0; c < kNumCategories; ++c) {
    if (spec.fragments[c] < 1 || spec.fragments[c] > kMaxFragmentsPerCategory) {
      throw Error(ErrorCode::FragmentCountOutOfRange,
                  std::string(category_name(category_from_index(c))) + " fragment count " +
                      std::to_string(spec.fragments[c]) + " not in [1,10]");
    }
  }
  if (!(spec.mu_soft > 0.0) || !(spec.mu_bone > spec.mu_soft)) {
    throw Error(ErrorCode::InvalidArgument, "attenuation must satisfy mu_bone > mu_soft > 0");
  }
  if (!(spec.shell_fraction > 0.0 && spec.shell_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "shell_fraction must be in (0,1]");
  }
  if (!(spec.body_scale > 0.0) || !(spec.bone_scale > 0.0) || spec.geometry_jitter < 0.0 ||
      spec.geometry_jitter >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid phantom geometry scales");
  }
  if (!(spec.fracture_tilt_deg >= 0.0 && spec.fracture_tilt_deg <= 90.0)) {
    throw Error(ErrorCode::InvalidArgument, "fracture_tilt_deg must be in [0, 90]");
  }
}

namespace {

constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kFractureStream = 2;

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> semi;

  double level(const std::array<double, 3>& p) const noexcept {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = (p[a] - center[a]) / semi[a];
      s += d * d;
    }
    return s;
  }
};

struct Shell {
  Ellipsoid outer;
  double inner_scale;  // inner semi-axes = outer * inner_scale

  bool contains(const std::array<double, 3>& p) const noexcept {
    const double l = outer.level(p);
    return l <= 1.0 && l > inner_scale * inner_scale;
  }
};

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) noexcept {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

FracturePlane sample_plane(CounterRng& rng, const std::array<double, 3>& centroid,
                           const std::array<double, 3>& extent, double max_tilt_deg) {
  FracturePlane plane;
  if (max_tilt_deg >= 90.0) {
    std::array<double, 3> n{};
    double len = 0.0;
    do {
      n = {rng.normal(), rng.normal(), rng.normal()};
      len = std::sqrt(dot(n, n));
    } while (len < 1e-12);
    for (int a = 0; a < 3; ++a) plane.normal[a] = n[a] / len;
  } else {
    // Uniform on the spherical cap around +z.
    const double cos_max = std::cos(max_tilt_deg * std::numbers::pi / 180.0);
    const double cz = 1.0 - rng.uniform() * (1.0 - cos_max);
    const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    plane.normal = {sz * std::cos(psi), sz * std::sin(psi), cz};
  }
  for (int a = 0; a < 3; ++a) plane.point[a] = centroid[a] + rng.uniform(-0.1, 0.1) * extent[a];
  return plane;
}

}  // namespace

std::size_t min_fragment_voxels(std::size_t bone_voxels) noexcept {
  return std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(0.005 * static_cast<double>(bone_voxels))));
}

LabelVolume generate(const PhantomSpec& spec) {
  validate(spec);
  LabelVolume vol(spec.dims, spec.spacing_mm);
  const auto extent = vol.extent_mm();
  const std::array<double, 3> half{extent[0] / 2, extent[1] / 2, extent[2] / 2};
  const std::array<double, 3> mid = half;

  CounterRng geo(CounterRng::derive(spec.seed, {kGeometryStream}));
  std::array<double, 3> sa_jitter{};
  std::array<double, 3> ilium_jitter{};
  for (auto& j : sa_jitter) j = 1.0 + geo.uniform(-spec.geometry_jitter, spec.geometry_jitter);
  for (auto& j : ilium_jitter) j = 1.0 + geo.uniform(-spec.geometry_jitter, spec.geometry_jitter);

  const double inner = 1.0 - spec.shell_fraction;
  const Ellipsoid body{mid, {spec.body_scale * half[0], spec.body_scale * 0.75 * half[1], spec.body_scale * half[2]}};
  const double b = spec.bone_scale;
  const Shell sacrum{{{mid[0], mid[1] + 0.30 * half[1], mid[2] - 0.05 * half[2]},
                      {b * 0.22 * half[0] * sa_jitter[0], b * 0.16 * half[1] * sa_jitter[1],
                       b * 0.40 * half[2] * sa_jitter[2]}},
                     inner};
  const std::array<double, 3> ilium_semi{b * 0.10 * half[0] * ilium_jitter[0], b * 0.36 * half[1] * ilium_jitter[1],
                                         b * 0.38 * half[2] * ilium_jitter[2]};
  const Shell left{{{mid[0] - 0.50 * half[0], mid[1] - 0.05 * half[1], mid[2] + 0.15 * half[2]}, ilium_semi}, inner};
  const Shell right{{{mid[0] + 0.50 * half[0], mid[1] - 0.05 * half[1], mid[2] + 0.15 * half[2]}, ilium_semi}, inner};

  auto mu = vol.mu();
  auto labels = vol.labels();
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) {
    const auto p = vol.voxel_center(i);
    if (sacrum.contains(p)) {
      labels[i] = encode_voxel_label(CategoryId::SA, 0);
    } else if (left.contains(p)) {
      labels[i] = encode_voxel_label(CategoryId::LI, 0);
    } else if (right.contains(p)) {
      labels[i] = encode_voxel_label(CategoryId::RI, 0);
    }
    if (labels[i] != 0) {
      mu[i] = static_cast<float>(spec.mu_bone);
    } else if (body.level(p) <= 1.0) {
      mu[i] = static_cast<float>(spec.mu_soft);
    }
  }

  for (CategoryId c : kAllCategories) {
    if (vol.fragment_count(c) == 0) {
      throw Error(ErrorCode::CategoryAbsent, std::string(category_name(c)) + " bone is empty at these dims/scales");
    }
    const int n = spec.fragments[static_cast<std::size_t>(index_of(c))];
    FractureOptions options;
    options.max_tilt_deg = spec.fracture_tilt_deg;
    vol = fracture(vol, c, n, CounterRng::derive(spec.seed, {kFractureStream, static_cast<std::uint64_t>(index_of(c))}),
                   options);
  }
  return vol;
}

LabelVolume fracture(const LabelVolume& volume, CategoryId category, int n, std::uint64_t seed,
                     const FractureOptions& options) {
  if (n < 1 || n > kMaxFragmentsPerCategory) {
    throw Error(ErrorCode::FragmentCountOutOfRange, "fragment count " + std::to_string(n) + " not in [1,10]");
  }
  if (!(options.max_tilt_deg >= 0.0 && options.max_tilt_deg <= 90.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_tilt_deg must be in [0, 90]");
  }
  if (options.forced_plane) {
    const auto& nrm = options.forced_plane->normal;
    if (std::abs(std::sqrt(dot(nrm, nrm)) - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument, "fracture plane normal must be unit length");
    }
  }
  const std::vector<std::size_t> bone = volume.voxels_of(category);
  if (bone.empty()) {
    throw Error(ErrorCode::CategoryAbsent, std::string(category_name(category)) + " not present in volume");
  }

  int count = volume.fragment_count(category);
  if (count >= n) return volume;

  std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(count));
  for (std::size_t idx : bone) {
    parts[static_cast<std::size_t>(decode_voxel_label(volume.labels()[idx])->fragment)].push_back(idx);
  }

  LabelVolume out = volume;
  const std::size_t min_size = min_fragment_voxels(bone.size());
  CounterRng rng(seed);

  while (count < n) {
    std::size_t largest = 0;
    for (std::size_t f = 1; f < parts.size(); ++f) {
      if (parts[f].size() > parts[largest].size()) largest = f;
    }
    const auto& target = parts[largest];

    std::array<double, 3> centroid{0, 0, 0};
    std::array<double, 3> lo{1e300, 1e300, 1e300};
    std::array<double, 3> hi{-1e300, -1e300, -1e300};
    for (std::size_t idx : target) {
      const auto p = out.voxel_center(idx);
      for (int a = 0; a < 3; ++a) {
        centroid[a] += p[a];
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    std::array<double, 3> extent{};
    for (int a = 0; a < 3; ++a) {
      centroid[a] /= static_cast<double>(target.size());
      extent[a] = hi[a] - lo[a] + out.spacing()[a];
    }

    bool accepted = false;
    for (int attempt = 0; attempt < options.max_resamples && !accepted; ++attempt) {
      const FracturePlane plane = options.forced_plane ? *options.forced_plane : sample_plane(rng, centroid, extent, options.max_tilt_deg);
      std::vector<std::size_t> keep;
      std::vector<std::size_t> split;
      for (std::size_t idx : target) {
        const auto p = out.voxel_center(idx);
        const std::array<double, 3> d{p[0] - plane.point[0], p[1] - plane.point[1], p[2] - plane.point[2]};
        (dot(d, plane.normal) >= 0.0 ? keep : split).push_back(idx);
      }
      if (keep.size() < min_size || split.size() < min_size) continue;
      const std::uint8_t code = encode_voxel_label(category, count);
      for (std::size_t idx : split) out.labels()[idx] = code;
      parts[largest] = std::move(keep);
      parts.push_back(std::move(split));
      ++count;
      accepted = true;
    }
    if (!accepted) {
      throw Error(ErrorCode::DegenerateFracture,
                  "no admissible split of " + std::string(category_name(category)) + " fragment " +
                      std::to_string(largest) + " after " + std::to_string(options.max_resamples) + " planes");
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_volume(const LabelVolume& volume) {
  ByteWriter w;
  w.reserve(4 + 4 + 12 + 24 + 5 * volume.voxel_count());
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("CFSV"), 4));
  w.u32(1);
  for (int d : volume.dims()) w.u32(static_cast<std::uint32_t>(d));
  for (double s : volume.spacing()) w.f64(s);
  for (float m : volume.mu()) w.f32(m);
  w.raw(volume.labels());
  return w.take();
}

LabelVolume parse_volume(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CFSV", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a CFSV volume file");
  }
  ByteReader r(bytes);
  r.raw(4);
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error(ErrorCode::UnsupportedVersion, "volume format version " + std::to_string(version));
  std::array<int, 3> dims{};
  for (auto& d : dims) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 12)) throw Error(ErrorCode::DimensionOverflow, "volume dim " + std::to_string(v));
    d = static_cast<int>(v);
  }
  std::array<double, 3> spacing{};
  for (auto& s : spacing) s = r.f64();
  LabelVolume vol(dims, spacing);
  if (r.remaining() < 5 * vol.voxel_count()) throw Error(ErrorCode::TruncatedFile, "volume payload truncated");
  if (r.remaining() > 5 * vol.voxel_count()) throw Error(ErrorCode::TrailingData, "bytes after volume payload");
  for (auto& m : vol.mu()) {
    m = r.f32();
    if (!(m >= 0.0f) || !std::isfinite(m)) throw Error(ErrorCode::InvalidArgument, "negative or non-finite mu");
  }
  auto labels = r.raw(vol.voxel_count());
  std::copy(labels.begin(), labels.end(), vol.labels().begin());
  for (std::uint8_t code : vol.labels()) {
    if (code > kMaxVoxelLabel) throw Error(ErrorCode::InvalidArgument, "voxel label out of range");
  }
  return vol;
}

void write_volume_file(const LabelVolume& volume, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_volume(volume));
}

LabelVolume read_volume_file(const std::filesystem::path& path) { return parse_volume(read_file_bytes(path)); }

}  // namespace cfs
