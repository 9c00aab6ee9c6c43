#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cfs/mask_model.hpp"

namespace cfs {

// Voxel label: 0 = background, otherwise 1 + 10 * category + fragment.
struct VoxelLabel {
  CategoryId category;
  int fragment;
};

constexpr std::uint8_t encode_voxel_label(CategoryId c, int fragment) noexcept {
  return static_cast<std::uint8_t>(1 + kMaxFragmentsPerCategory * index_of(c) + fragment);
}
std::optional<VoxelLabel> decode_voxel_label(std::uint8_t code);

inline constexpr std::uint8_t kMaxVoxelLabel = 1 + kMaxFragmentsPerCategory * kNumCategories - 1;

// Attenuation volume with per-voxel fragment labels. Voxel (x, y, z) is stored
// at x + nx * (y + ny * z); its center is at ((x + 0.5) * sx, ...) mm.
class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(std::array<int, 3> dims, std::array<double, 3> spacing_mm);

  const std::array<int, 3>& dims() const noexcept { return dims_; }
  const std::array<double, 3>& spacing() const noexcept { return spacing_; }
  std::size_t voxel_count() const noexcept { return mu_.size(); }
  std::array<double, 3> extent_mm() const noexcept;

  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(y) +
                                                 static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(z));
  }
  std::array<int, 3> coords(std::size_t index) const noexcept;
  std::array<double, 3> voxel_center(std::size_t index) const noexcept;

  std::span<const float> mu() const noexcept { return mu_; }
  std::span<float> mu() noexcept { return mu_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<std::uint8_t> labels() noexcept { return labels_; }

  // Number of fragment slots of a category (max fragment index + 1).
  int fragment_count(CategoryId c) const noexcept;
  std::vector<std::size_t> voxels_of(CategoryId c) const;
  std::vector<std::size_t> voxels_of(CategoryId c, int fragment) const;

  bool operator==(const LabelVolume&) const = default;

 private:
  std::array<int, 3> dims_{0, 0, 0};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
  std::vector<float> mu_;
  std::vector<std::uint8_t> labels_;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::array<int, 3> dims{128, 128, 128};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::array<int, 3> fragments{1, 1, 1};  // SA, LI, RI

  // Geometry knobs, all relative to the volume half-extent.
  double body_scale = 0.9;
  double bone_scale = 1.0;
  double shell_fraction = 0.35;   // shell thickness as a fraction of each semi-axis
  double geometry_jitter = 0.05;  // +/- relative perturbation of bone semi-axes

  double mu_bone = 0.05;  // mm^-1
  double mu_soft = 0.015; // mm^-1

  // Cut normals within this angle of z, the rotation axis of the views.
  double fracture_tilt_deg = 30.0;
};

void validate(const PhantomSpec& spec);

struct FracturePlane {
  std::array<double, 3> point{};   // mm, volume coordinates
  std::array<double, 3> normal{0, 0, 1};
};

struct FractureOptions {
  int max_resamples = 32;
  // Sampled normals lie within this angle of the z axis; 90 samples the full sphere.
  double max_tilt_deg = 90.0;
  // Test hook: use this plane for every split instead of sampling.
  std::optional<FracturePlane> forced_plane;
};

LabelVolume generate(const PhantomSpec& spec);

// Splits the largest fragment of `category` by a random jittered plane through
// its centroid until `n` fragments exist. The positive half-space keeps the
// existing index; the other side receives the next free index.
LabelVolume fracture(const LabelVolume& volume, CategoryId category, int n, std::uint64_t seed,
                     const FractureOptions& options = {});

// Smallest admissible fragment: max(8, 0.5% of the bone's voxels).
std::size_t min_fragment_voxels(std::size_t bone_voxels) noexcept;

// .cfsv layout (little-endian): "CFSV" | u32 version=1 | 3 x u32 dims |
// 3 x f64 spacing | f32 mu[n] | u8 labels[n], x fastest.
std::vector<std::uint8_t> serialize_volume(const LabelVolume& volume);
LabelVolume parse_volume(std::span<const std::uint8_t> bytes);
void write_volume_file(const LabelVolume& volume, const std::filesystem::path& path);
LabelVolume read_volume_file(const std::filesystem::path& path);

}  // namespace cfs
