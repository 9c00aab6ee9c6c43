#include "cfs/projector.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cfs/parallel.hpp"

namespace cfs {

bool clip_ray_to_box(const GridGeometry& grid, const std::array<double, 3>& origin,
                     const std::array<double, 3>& direction, double& t_enter, double& t_exit) noexcept {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double box_hi = grid.dims[a] * grid.spacing[a];
    if (direction[a] == 0.0) {
      if (origin[a] < 0.0 || origin[a] > box_hi) return false;
      continue;
    }
    double t0 = (0.0 - origin[a]) / direction[a];
    double t1 = (box_hi - origin[a]) / direction[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (!(hi > lo)) return false;
  t_enter = lo;
  t_exit = hi;
  return true;
}

RaySegmentList traverse(const GridGeometry& grid, const std::array<double, 3>& origin,
                        const std::array<double, 3>& direction) {
  RaySegmentList out;
  traverse_visit(grid, origin, direction, [&](std::size_t voxel, double length) { out.push_back({voxel, length}); });
  return out;
}

namespace {

// sin/cos of an angle in degrees, exact at multiples of 90.
std::array<double, 2> sincos_deg(double deg) noexcept {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r == 0.0) return {0.0, 1.0};
  if (r == 90.0) return {1.0, 0.0};
  if (r == 180.0) return {0.0, -1.0};
  if (r == 270.0) return {-1.0, 0.0};
  const double rad = r * std::numbers::pi / 180.0;
  return {std::sin(rad), std::cos(rad)};
}

}  // namespace

std::array<double, 3> ProjectionGeometry::direction() const noexcept {
  const auto [s, c] = sincos_deg(theta_deg);
  return {c, s, 0.0};
}

std::array<double, 3> ProjectionGeometry::column_axis() const noexcept {
  const auto [s, c] = sincos_deg(theta_deg);
  return {-s, c, 0.0};
}

void validate(const ProjectionGeometry& geom) {
  if (geom.detector_width < 1 || geom.detector_height < 1) {
    throw Error(ErrorCode::InvalidArgument, "detector dimensions must be >= 1");
  }
  if (!(geom.pixel_mm > 0.0) || !std::isfinite(geom.pixel_mm)) {
    throw Error(ErrorCode::InvalidArgument, "detector pixel spacing must be positive");
  }
  if (!(geom.tau_len_mm >= 0.0) || !std::isfinite(geom.theta_deg)) {
    throw Error(ErrorCode::InvalidArgument, "invalid projection parameters");
  }
}

namespace {

// Whether the footprint of the attenuating support leaves the detector.
bool support_exceeds_fov(const LabelVolume& volume, const ProjectionGeometry& geom) {
  std::array<int, 3> lo{volume.dims()[0], volume.dims()[1], volume.dims()[2]};
  std::array<int, 3> hi{-1, -1, -1};
  const auto mu = volume.mu();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] <= 0.0f && volume.labels()[i] == 0) continue;
    const auto c = volume.coords(i);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  if (hi[0] < 0) return false;
  const auto ext = volume.extent_mm();
  const auto& sp = volume.spacing();
  const auto u = geom.column_axis();
  const double half_w = 0.5 * geom.detector_width * geom.pixel_mm;
  const double half_h = 0.5 * geom.detector_height * geom.pixel_mm;
  for (int corner = 0; corner < 8; ++corner) {
    std::array<double, 3> p{};
    for (int a = 0; a < 3; ++a) {
      const int idx = (corner >> a) & 1 ? hi[a] + 1 : lo[a];
      p[a] = idx * sp[a] - 0.5 * ext[a];
    }
    const double du = p[0] * u[0] + p[1] * u[1];
    if (std::abs(du) > half_w + 1e-9 || std::abs(p[2]) > half_h + 1e-9) return true;
  }
  return false;
}

}  // namespace

Projection project(const LabelVolume& volume, const ProjectionGeometry& geom, int workers) {
  validate(geom);
  Projection out;
  out.fov_clipped = support_exceeds_fov(volume, geom);
  if (out.fov_clipped && geom.strict_fov) {
    throw Error(ErrorCode::DetectorTooSmall,
                "volume footprint exceeds the detector field of view at theta = " + std::to_string(geom.theta_deg));
  }

  const int width = geom.detector_width;
  const int height = geom.detector_height;
  out.image.intensity = Image2D<double>(width, height, 1.0);
  out.image.raw = Image2D<double>(width, height, 0.0);
  out.masks = FragmentMaskSet(width, height);

  // Filled in place, then moved into the set; each pixel is owned by exactly
  // one row task.
  std::array<std::vector<BinaryMask2D>, kNumCategories> lists;
  for (CategoryId c : kAllCategories) {
    lists[static_cast<std::size_t>(index_of(c))].assign(static_cast<std::size_t>(volume.fragment_count(c)),
                                                          BinaryMask2D(width, height));
  }

  const GridGeometry grid{volume.dims(), volume.spacing()};
  const auto ext = volume.extent_mm();
  const std::array<double, 3> center{0.5 * ext[0], 0.5 * ext[1], 0.5 * ext[2]};
  const double back_off = std::sqrt(ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]) + 1.0;
  const auto d = geom.direction();
  const auto u = geom.column_axis();
  const auto mu = volume.mu();
  const auto labels = volume.labels();
  auto intensity = out.image.intensity.pixels();
  auto raw = out.image.raw->pixels();
  constexpr int kSlots = kNumCategories * kMaxFragmentsPerCategory;

  parallel_for(static_cast<std::size_t>(height), workers, [&](std::size_t row) {
    std::array<double, kSlots> chord{};
    const double vz = (0.5 * height - static_cast<double>(row) - 0.5) * geom.pixel_mm;
    for (int col = 0; col < width; ++col) {
      const double uc = (static_cast<double>(col) + 0.5 - 0.5 * width) * geom.pixel_mm;
      const std::array<double, 3> origin{center[0] + uc * u[0] - back_off * d[0],
                                         center[1] + uc * u[1] - back_off * d[1], center[2] + vz};
      chord.fill(0.0);
      double line = 0.0;
      bool any_label = false;
      traverse_visit(grid, origin, d, [&](std::size_t v, double len) {
        line += static_cast<double>(mu[v]) * len;
        if (labels[v] != 0) {
          chord[labels[v] - 1] += len;
          any_label = true;
        }
      });
      const std::size_t px = row * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
      raw[px] = line;
      intensity[px] = std::exp(-line);
      if (!any_label) continue;
      for (int s = 0; s < kSlots; ++s) {
        if (!(chord[s] > geom.tau_len_mm)) continue;
        const int c = s / kMaxFragmentsPerCategory;
        const int f = s % kMaxFragmentsPerCategory;
        auto& list = lists[static_cast<std::size_t>(c)];
        if (static_cast<std::size_t>(f) < list.size()) list[static_cast<std::size_t>(f)].pixels()[px] = 1;
      }
    }
  });
  for (CategoryId c : kAllCategories) {
    out.masks.set_fragments(c, std::move(lists[static_cast<std::size_t>(index_of(c))]));
  }
  return out;
}

std::vector<double> view_angles(int n_views) {
  if (n_views < 1) throw Error(ErrorCode::InvalidArgument, "n_views must be >= 1");
  std::vector<double> angles(static_cast<std::size_t>(n_views));
  for (int k = 0; k < n_views; ++k) angles[static_cast<std::size_t>(k)] = k * (180.0 / n_views);
  return angles;
}

std::vector<View> make_views(const LabelVolume& volume, int n_views, const ProjectionGeometry& base, int workers) {
  std::vector<View> views;
  for (double theta : view_angles(n_views)) {
    ProjectionGeometry g = base;
    g.theta_deg = theta;
    views.push_back({theta, project(volume, g, workers)});
  }
  return views;
}

double overlap_ratio(const FragmentMaskSet& set, CategoryId reference) {
  const BinaryMask2D ref = set.category_union(reference);
  const std::size_t ref_area = ref.area();
  if (ref_area == 0) {
    throw Error(ErrorCode::EmptyReference, std::string(category_name(reference)) + " has no projected pixels");
  }
  BinaryMask2D others(set.width(), set.height());
  for (CategoryId c : kAllCategories) {
    if (c != reference) others = mask_or(others, set.category_union(c));
  }
  return static_cast<double>(intersection_area(ref, others)) / static_cast<double>(ref_area);
}

}  // namespace cfs
