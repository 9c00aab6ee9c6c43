#include "cfs/morphology.hpp"

#include <algorithm>
#include <cstdlib>

#include "cfs/distance_transform.hpp"

namespace cfs {

namespace {

void check_radius(int radius) {
  if (radius < 0) throw Error(ErrorCode::InvalidArgument, "morphology radius must be >= 0");
}

// Chebyshev-distance dilation: separable running max over rows then columns.
BinaryMask2D dilate_square(const BinaryMask2D& mask, int r) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask2D rows(w, h);
  for (int y = 0; y < h; ++y) {
    int last = -(r + 1) - 1;  // most recent foreground column seen
    for (int x = 0; x < std::min(w, r); ++x) {
      if (mask.test(y, x)) last = x;
    }
    for (int x = 0; x < w; ++x) {
      if (x + r < w && mask.test(y, x + r)) last = x + r;
      if (last >= x - r) rows.set(y, x);
    }
  }
  BinaryMask2D out(w, h);
  for (int x = 0; x < w; ++x) {
    int last = -(r + 1) - 1;
    for (int y = 0; y < std::min(h, r); ++y) {
      if (rows.test(y, x)) last = y;
    }
    for (int y = 0; y < h; ++y) {
      if (y + r < h && rows.test(y + r, x)) last = y + r;
      if (last >= y - r) out.set(y, x);
    }
  }
  return out;
}

BinaryMask2D complement_with_frame(const BinaryMask2D& mask) {
  BinaryMask2D out(mask.width() + 2, mask.height() + 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const bool inside = y >= 1 && x >= 1 && y <= mask.height() && x <= mask.width();
      if (!inside || !mask.test(y - 1, x - 1)) out.set(y, x);
    }
  }
  return out;
}

}  // namespace

BinaryMask2D dilate(const BinaryMask2D& mask, int radius, StructuringElement element) {
  check_radius(radius);
  if (radius == 0 || mask.none()) return mask;
  if (element == StructuringElement::Square) return dilate_square(mask, radius);
  const DistanceMap dist = edt(mask);
  const std::int64_t r2 = static_cast<std::int64_t>(radius) * radius;
  BinaryMask2D out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (dist.squared.at(y, x) <= r2) out.set(y, x);
    }
  }
  return out;
}

BinaryMask2D erode(const BinaryMask2D& mask, int radius, StructuringElement element) {
  check_radius(radius);
  if (radius == 0 || mask.none()) return mask;
  // Erosion is the complement of dilating the background, where the
  // background includes a one-pixel frame outside the image.
  const BinaryMask2D bg = complement_with_frame(mask);
  BinaryMask2D out(mask.width(), mask.height());
  if (element == StructuringElement::Square) {
    const BinaryMask2D grown = dilate_square(bg, radius);
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!grown.test(y + 1, x + 1)) out.set(y, x);
      }
    }
    return out;
  }
  const DistanceMap dist = edt(bg);
  const std::int64_t r2 = static_cast<std::int64_t>(radius) * radius;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (dist.squared.at(y + 1, x + 1) > r2) out.set(y, x);
    }
  }
  return out;
}

BinaryMask2D translate(const BinaryMask2D& mask, int dr, int dc) {
  if (dr == 0 && dc == 0) return mask;
  BinaryMask2D out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(y, x) && out.contains(y + dr, x + dc)) out.set(y + dr, x + dc);
    }
  }
  return out;
}

}  // namespace cfs
