#include "cfs/mask_model.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <string>

namespace cfs {

CategoryId category_from_index(int index) {
  if (index < 0 || index >= kNumCategories) {
    throw Error(ErrorCode::InvalidArgument, "category index out of range: " + std::to_string(index));
  }
  return static_cast<CategoryId>(index);
}

std::string_view category_name(CategoryId c) noexcept {
  switch (c) {
    case CategoryId::SA: return "SA";
    case CategoryId::LI: return "LI";
    case CategoryId::RI: return "RI";
  }
  return "??";
}

CategoryId parse_category(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  for (CategoryId c : kAllCategories) {
    if (upper == category_name(c)) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown category '" + std::string(name) + "'");
}

std::size_t BinaryMask2D::area() const noexcept {
  auto px = bits_.pixels();
  return static_cast<std::size_t>(std::count_if(px.begin(), px.end(), [](std::uint8_t v) { return v != 0; }));
}

BoundingBox tight_bbox(const BinaryMask2D& mask) {
  BoundingBox box{mask.height(), mask.width(), 0, 0};
  bool any = false;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.test(r, c)) continue;
      any = true;
      box.row0 = std::min(box.row0, r);
      box.col0 = std::min(box.col0, c);
      box.row1 = std::max(box.row1, r + 1);
      box.col1 = std::max(box.col1, c + 1);
    }
  }
  return any ? box : BoundingBox{};
}

namespace {

void require_same_shape(const BinaryMask2D& a, const BinaryMask2D& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

template <typename Op>
BinaryMask2D combine(const BinaryMask2D& a, const BinaryMask2D& b, Op op, const char* what) {
  require_same_shape(a, b, what);
  BinaryMask2D out(a.width(), a.height());
  auto pa = a.pixels();
  auto pb = b.pixels();
  auto po = out.pixels();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = op(pa[i] != 0, pb[i] != 0) ? 1 : 0;
  return out;
}

}  // namespace

BinaryMask2D mask_and(const BinaryMask2D& a, const BinaryMask2D& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; }, "mask_and");
}

BinaryMask2D mask_or(const BinaryMask2D& a, const BinaryMask2D& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; }, "mask_or");
}

std::size_t intersection_area(const BinaryMask2D& a, const BinaryMask2D& b) {
  require_same_shape(a, b, "intersection_area");
  auto pa = a.pixels();
  auto pb = b.pixels();
  std::size_t n = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) n += (pa[i] != 0 && pb[i] != 0) ? 1 : 0;
  return n;
}

bool is_subset(const BinaryMask2D& inner, const BinaryMask2D& outer) {
  require_same_shape(inner, outer, "is_subset");
  auto pi = inner.pixels();
  auto po = outer.pixels();
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] != 0 && po[i] == 0) return false;
  }
  return true;
}

std::array<double, 2> centroid(const BinaryMask2D& mask) {
  double sr = 0.0;
  double sc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.test(r, c)) continue;
      sr += r;
      sc += c;
      ++n;
    }
  }
  if (n == 0) return {0.0, 0.0};
  return {sr / static_cast<double>(n), sc / static_cast<double>(n)};
}

FragmentMaskSet::FragmentMaskSet(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "fragment set dimensions must be >= 1");
  }
}

void FragmentMaskSet::check(const BinaryMask2D& mask) const {
  if (mask.width() != width_ || mask.height() != height_) {
    throw Error(ErrorCode::DimensionMismatch, "fragment mask does not match set dimensions");
  }
}

int FragmentMaskSet::add(CategoryId c, BinaryMask2D mask) {
  check(mask);
  auto& list = lists_[static_cast<std::size_t>(index_of(c))];
  if (list.size() >= static_cast<std::size_t>(kMaxFragmentsPerCategory)) {
    throw Error(ErrorCode::FragmentOverflow,
                std::string("more than 10 fragments in category ") + std::string(category_name(c)));
  }
  list.push_back(std::move(mask));
  return static_cast<int>(list.size()) - 1;
}

void FragmentMaskSet::set_fragments(CategoryId c, std::vector<BinaryMask2D> masks) {
  if (masks.size() > static_cast<std::size_t>(kMaxFragmentsPerCategory)) {
    throw Error(ErrorCode::FragmentOverflow,
                std::string("more than 10 fragments in category ") + std::string(category_name(c)));
  }
  for (const auto& m : masks) check(m);
  lists_[static_cast<std::size_t>(index_of(c))] = std::move(masks);
}

std::size_t FragmentMaskSet::fragment_count() const noexcept {
  return std::accumulate(lists_.begin(), lists_.end(), std::size_t{0},
                         [](std::size_t acc, const auto& l) { return acc + l.size(); });
}

BinaryMask2D FragmentMaskSet::category_union(CategoryId c) const {
  BinaryMask2D out(width_, height_);
  auto po = out.pixels();
  for (const auto& m : fragments(c)) {
    auto pm = m.pixels();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] |= pm[i];
  }
  return out;
}

EncodedMaskImage encode(const FragmentMaskSet& set) {
  EncodedMaskImage img(set.width(), set.height(), 0u);
  auto words = img.pixels();
  for (CategoryId c : kAllCategories) {
    const auto& list = set.fragments(c);
    if (list.size() > static_cast<std::size_t>(kMaxFragmentsPerCategory)) {
      throw Error(ErrorCode::FragmentOverflow, "category exceeds the 10-fragment encoding cap");
    }
    for (std::size_t f = 0; f < list.size(); ++f) {
      const std::uint32_t bit = 1u << fragment_bit(c, static_cast<int>(f));
      auto px = list[f].pixels();
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (px[i] != 0) words[i] |= bit;
      }
    }
  }
  return img;
}

FragmentMaskSet decode(const EncodedMaskImage& img) {
  auto words = img.pixels();
  std::uint32_t present = 0;
  for (std::uint32_t w : words) {
    if (w & kReservedBitsMask) {
      throw Error(ErrorCode::ReservedBitsSet, "bit 30 or 31 set in encoded mask");
    }
    present |= w;
  }

  FragmentMaskSet set(img.width(), img.height());
  for (CategoryId c : kAllCategories) {
    int count = 0;
    for (int f = 0; f < kMaxFragmentsPerCategory; ++f) {
      if (present & (1u << fragment_bit(c, f))) count = f + 1;
    }
    std::vector<BinaryMask2D> list;
    list.reserve(static_cast<std::size_t>(count));
    for (int f = 0; f < count; ++f) {
      const std::uint32_t bit = 1u << fragment_bit(c, f);
      BinaryMask2D m(img.width(), img.height());
      auto px = m.pixels();
      for (std::size_t i = 0; i < words.size(); ++i) px[i] = (words[i] & bit) ? 1 : 0;
      list.push_back(std::move(m));
    }
    set.set_fragments(c, std::move(list));
  }
  return set;
}

EncodedMaskImage encode_single(const BinaryMask2D& mask) {
  EncodedMaskImage img(mask.width(), mask.height(), 0u);
  auto px = mask.pixels();
  auto words = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) words[i] = px[i] ? 1u : 0u;
  return img;
}

BinaryMask2D decode_single(const EncodedMaskImage& img) {
  BinaryMask2D mask(img.width(), img.height());
  auto words = img.pixels();
  auto px = mask.pixels();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] & ~1u) {
      throw Error(ErrorCode::ReservedBitsSet, "single-bit mask file uses bits other than bit 0");
    }
    px[i] = static_cast<std::uint8_t>(words[i] & 1u);
  }
  return mask;
}

}  // namespace cfs
