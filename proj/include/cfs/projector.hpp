#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstddef>
#include <vector>

#include "cfs/mask_model.hpp"
#include "cfs/phantom.hpp"

namespace cfs {

struct GridGeometry {
  std::array<int, 3> dims;
  std::array<double, 3> spacing;  // mm; grid spans [0, dims * spacing)
};

struct RaySegment {
  std::size_t voxel;  // x + nx * (y + ny * z)
  double length;      // mm, > 0
};

using RaySegmentList = std::vector<RaySegment>;

// Parameter interval [t_enter, t_exit] (t >= 0) where origin + t * direction
// lies inside the grid box. Returns false on a miss.
bool clip_ray_to_box(const GridGeometry& grid, const std::array<double, 3>& origin,
                     const std::array<double, 3>& direction, double& t_enter, double& t_exit) noexcept;

// Incremental voxel walk (Amanatides-Woo stepping with Siddon-style exact
// chord lengths). Calls visit(voxel_index, chord_mm) in ray order for every
// voxel crossed with positive length.
template <typename Visit>
void traverse_visit(const GridGeometry& grid, const std::array<double, 3>& origin,
                    const std::array<double, 3>& direction, Visit&& visit);

RaySegmentList traverse(const GridGeometry& grid, const std::array<double, 3>& origin,
                        const std::array<double, 3>& direction);

// Parallel-beam view rotated by theta about the volume z axis. At theta = 0
// rays travel along +x, detector columns run along +y and rows run from +z
// (row 0) downwards. The detector is centred on the volume centre.
struct ProjectionGeometry {
  double theta_deg = 0.0;
  int detector_width = 448;
  int detector_height = 448;
  double pixel_mm = 1.0;
  double tau_len_mm = 1e-6;  // a fragment marks a pixel iff its chord exceeds this
  bool strict_fov = false;   // DetectorTooSmall is an error instead of a warning

  std::array<double, 3> direction() const noexcept;
  std::array<double, 3> column_axis() const noexcept;
};

void validate(const ProjectionGeometry& geom);

struct Projection {
  Radiograph image;        // intensity plus raw line integral
  FragmentMaskSet masks;   // one slot per fragment index present in the volume
  bool fov_clipped = false;
};

// Monoenergetic Beer-Lambert: raw = sum(mu * chord), intensity = exp(-raw).
Projection project(const LabelVolume& volume, const ProjectionGeometry& geom, int workers = 1);

struct View {
  double theta_deg;
  Projection projection;
};

// Angles k * 180 / n_views for k in [0, n_views).
std::vector<double> view_angles(int n_views);
std::vector<View> make_views(const LabelVolume& volume, int n_views, const ProjectionGeometry& base,
                             int workers = 1);

// |R ∩ O| / |R| with R the union of the reference category's fragments and O
// the union of all fragments of the other categories.
double overlap_ratio(const FragmentMaskSet& set, CategoryId reference);

// ---------------------------------------------------------------------------

template <typename Visit>
void traverse_visit(const GridGeometry& grid, const std::array<double, 3>& origin,
                    const std::array<double, 3>& direction, Visit&& visit) {
  double t_enter = 0.0;
  double t_exit = 0.0;
  if (!clip_ray_to_box(grid, origin, direction, t_enter, t_exit)) return;

  std::array<int, 3> cell{};
  std::array<int, 3> step{};
  std::array<double, 3> t_next{};
  const double inf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    // A ray starting exactly on a cell face while moving in -a belongs to the
    // lower cell.
    const double p = origin[a] + t_enter * direction[a];
    int c = static_cast<int>(std::floor(p / grid.spacing[a]));
    if (direction[a] < 0.0 && p == c * grid.spacing[a]) --c;
    cell[a] = std::clamp(c, 0, grid.dims[a] - 1);
    if (direction[a] > 0.0) {
      step[a] = 1;
      t_next[a] = ((cell[a] + 1) * grid.spacing[a] - origin[a]) / direction[a];
    } else if (direction[a] < 0.0) {
      step[a] = -1;
      t_next[a] = (cell[a] * grid.spacing[a] - origin[a]) / direction[a];
    } else {
      step[a] = 0;
      t_next[a] = inf;
    }
  }

  const auto nx = static_cast<std::size_t>(grid.dims[0]);
  const auto nxy = nx * static_cast<std::size_t>(grid.dims[1]);
  double t = t_enter;
  for (;;) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double t_end = std::min(t_next[axis], t_exit);
    if (t_end > t) {
      visit(static_cast<std::size_t>(cell[0]) + nx * static_cast<std::size_t>(cell[1]) +
                nxy * static_cast<std::size_t>(cell[2]),
            t_end - t);
      t = t_end;
    }
    if (t_next[axis] >= t_exit) return;
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= grid.dims[axis]) return;
    t_next[axis] = ((cell[axis] + (step[axis] > 0 ? 1 : 0)) * grid.spacing[axis] - origin[axis]) / direction[axis];
  }
}

}  // namespace cfs
