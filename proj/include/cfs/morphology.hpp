#pragma once

#include "cfs/mask_model.hpp"

namespace cfs {

enum class StructuringElement {
  Disc,    // offsets with dr^2 + dc^2 <= r^2
  Square,  // (2r+1) x (2r+1)
};

// Pixels outside the image are background for both operations.
BinaryMask2D dilate(const BinaryMask2D& mask, int radius, StructuringElement element = StructuringElement::Disc);
BinaryMask2D erode(const BinaryMask2D& mask, int radius, StructuringElement element = StructuringElement::Disc);

// Shift by (dr, dc); pixels leaving the frame are dropped.
BinaryMask2D translate(const BinaryMask2D& mask, int dr, int dc);

}  // namespace cfs
