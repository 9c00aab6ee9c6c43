#pragma once

#include <cmath>
#include <cstdint>

#include "cfs/mask_model.hpp"

namespace cfs {

// Exact Euclidean distance to the nearest foreground pixel of a source mask.
struct DistanceMap {
  Image2D<std::int64_t> squared;  // integer squared pixel distances
  double spacing = 1.0;           // isotropic pixel size applied by distance()

  double distance(int row, int col) const { return std::sqrt(static_cast<double>(squared.at(row, col))) * spacing; }
};

// Two-pass lower-envelope transform (column pass, then row pass) over
// integer squared distances. Throws EmptyMask when there is no foreground.
DistanceMap edt(const BinaryMask2D& mask, double spacing = 1.0);

// Foreground pixels with a background 4-neighbour; pixels on the image
// border count as touching background.
BinaryMask2D boundary(const BinaryMask2D& mask);

}  // namespace cfs
