#include "cfs/distance_transform.hpp"

#include <limits>
#include <vector>

namespace cfs {

namespace {

constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::max();

// Squared distance transform of a 1D sampled function (Felzenszwalb &
// Huttenlocher). Samples equal to kUnreached contribute no parabola.
void lower_envelope(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out, std::vector<int>& v,
                    std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kUnreached) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    // z[0] = -inf bounds the pop loop at k = 0.
    double s = 0.0;
    for (;;) {
      const int p = v[k];
      const auto num = (f[q] + static_cast<std::int64_t>(q) * q) - (f[p] + static_cast<std::int64_t>(p) * p);
      s = static_cast<double>(num) / static_cast<double>(2 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kUnreached);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const std::int64_t d = q - v[j];
    out[q] = d * d + f[v[j]];
  }
}

}  // namespace

DistanceMap edt(const BinaryMask2D& mask, double spacing) {
  if (mask.none()) throw Error(ErrorCode::EmptyMask, "distance transform of an empty mask");
  const int w = mask.width();
  const int h = mask.height();
  DistanceMap out{Image2D<std::int64_t>(w, h, 0), spacing};

  Image2D<std::int64_t> cols(w, h, 0);
  {
    std::vector<std::int64_t> f(static_cast<std::size_t>(h));
    std::vector<std::int64_t> d(static_cast<std::size_t>(h));
    std::vector<int> v(static_cast<std::size_t>(h));
    std::vector<double> z(static_cast<std::size_t>(h) + 1);
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < h; ++r) f[static_cast<std::size_t>(r)] = mask.test(r, c) ? 0 : kUnreached;
      lower_envelope(f, d, v, z);
      for (int r = 0; r < h; ++r) cols.at(r, c) = d[static_cast<std::size_t>(r)];
    }
  }
  std::vector<std::int64_t> f(static_cast<std::size_t>(w));
  std::vector<std::int64_t> d(static_cast<std::size_t>(w));
  std::vector<int> v(static_cast<std::size_t>(w));
  std::vector<double> z(static_cast<std::size_t>(w) + 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[static_cast<std::size_t>(c)] = cols.at(r, c);
    lower_envelope(f, d, v, z);
    for (int c = 0; c < w; ++c) out.squared.at(r, c) = d[static_cast<std::size_t>(c)];
  }
  return out;
}

BinaryMask2D boundary(const BinaryMask2D& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask2D out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.test(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1 || !mask.test(r - 1, c) ||
                        !mask.test(r + 1, c) || !mask.test(r, c - 1) || !mask.test(r, c + 1);
      if (edge) out.set(r, c);
    }
  }
  return out;
}

}  // namespace cfs
