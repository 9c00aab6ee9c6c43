#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cfs/image.hpp"

namespace cfs {

enum class CategoryId : std::uint8_t { SA = 0, LI = 1, RI = 2 };

inline constexpr int kNumCategories = 3;
inline constexpr int kMaxFragmentsPerCategory = 10;
inline constexpr std::array<CategoryId, kNumCategories> kAllCategories = {
    CategoryId::SA, CategoryId::LI, CategoryId::RI};

constexpr int index_of(CategoryId c) noexcept { return static_cast<int>(c); }
CategoryId category_from_index(int index);

// "SA", "LI", "RI"
std::string_view category_name(CategoryId c) noexcept;
// Accepts "SA"/"LI"/"RI" in any case.
CategoryId parse_category(std::string_view name);

// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct BoundingBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  bool empty() const noexcept { return row1 <= row0 || col1 <= col0; }
  bool operator==(const BoundingBox&) const = default;
};

class BinaryMask2D {
 public:
  BinaryMask2D() = default;
  BinaryMask2D(int width, int height) : bits_(width, height, 0) {}

  int width() const noexcept { return bits_.width(); }
  int height() const noexcept { return bits_.height(); }
  bool contains(int row, int col) const noexcept { return bits_.contains(row, col); }

  bool test(int row, int col) const { return bits_.at(row, col) != 0; }
  void set(int row, int col, bool on = true) { bits_.at(row, col) = on ? 1 : 0; }

  std::span<const std::uint8_t> pixels() const noexcept { return bits_.pixels(); }
  std::span<std::uint8_t> pixels() noexcept { return bits_.pixels(); }

  std::size_t area() const noexcept;
  bool none() const noexcept { return area() == 0; }
  bool same_shape(const BinaryMask2D& other) const noexcept {
    return bits_.same_shape(other.bits_);
  }

  bool operator==(const BinaryMask2D&) const = default;

 private:
  Image2D<std::uint8_t> bits_;
};

// Tight bounds of the foreground; all-zero box for an empty mask.
BoundingBox tight_bbox(const BinaryMask2D& mask);

BinaryMask2D mask_and(const BinaryMask2D& a, const BinaryMask2D& b);
BinaryMask2D mask_or(const BinaryMask2D& a, const BinaryMask2D& b);
std::size_t intersection_area(const BinaryMask2D& a, const BinaryMask2D& b);
bool is_subset(const BinaryMask2D& inner, const BinaryMask2D& outer);
// Mean (row, col) of foreground pixels.
std::array<double, 2> centroid(const BinaryMask2D& mask);

// Per-category ordered fragment lists over a shared raster size. The list
// position of a mask is its fragment index.
class FragmentMaskSet {
 public:
  FragmentMaskSet() = default;
  FragmentMaskSet(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  const std::vector<BinaryMask2D>& fragments(CategoryId c) const {
    return lists_[static_cast<std::size_t>(index_of(c))];
  }
  // Appends a fragment; returns its fragment index.
  int add(CategoryId c, BinaryMask2D mask);
  void set_fragments(CategoryId c, std::vector<BinaryMask2D> masks);

  std::size_t fragment_count() const noexcept;
  // Union of all fragments of one category (empty mask if it has none).
  BinaryMask2D category_union(CategoryId c) const;

  bool operator==(const FragmentMaskSet&) const = default;

 private:
  void check(const BinaryMask2D& mask) const;

  int width_ = 0;
  int height_ = 0;
  std::array<std::vector<BinaryMask2D>, kNumCategories> lists_;
};

// One 32-bit word per pixel; bit 10*c + f marks fragment f of category c.
using EncodedMaskImage = Image2D<std::uint32_t>;

inline constexpr std::uint32_t kReservedBitsMask = 0xC0000000u;

constexpr int fragment_bit(CategoryId c, int fragment) noexcept {
  return kMaxFragmentsPerCategory * index_of(c) + fragment;
}

EncodedMaskImage encode(const FragmentMaskSet& set);
// Trailing fragment slots with no pixels are not materialized.
FragmentMaskSet decode(const EncodedMaskImage& img);

// Single-bit raster helpers used by the prediction exchange (bit 0 only).
EncodedMaskImage encode_single(const BinaryMask2D& mask);
BinaryMask2D decode_single(const EncodedMaskImage& img);

struct Radiograph {
  Image2D<double> intensity;            // in [0, 1]
  std::optional<Image2D<double>> raw;   // line integral, >= 0

  int width() const noexcept { return intensity.width(); }
  int height() const noexcept { return intensity.height(); }

  bool operator==(const Radiograph&) const = default;
};

}  // namespace cfs
