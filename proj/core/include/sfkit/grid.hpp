#pragma once

#include <array>
#include <cstdint>

#include "sfkit/errors.hpp"

namespace sfkit {

using Vec3 = std::array<double, 3>;
using Cell3 = std::array<std::int64_t, 3>;

/// Axis-aligned voxel grid over a spatial range, half-open cells: a point on
/// a cell boundary belongs to the higher-index cell.
struct GridSpec {
  Vec3 range_min{0.0, 0.0, 0.0};
  Vec3 range_max{1.0, 1.0, 1.0};
  Vec3 voxel_size{1.0, 1.0, 1.0};

  GridSpec() = default;
  GridSpec(Vec3 min, Vec3 max, Vec3 size);

  /// Number of cells per axis (ceiled so the range is fully covered).
  std::array<std::int64_t, 3> dims() const;

  bool contains(const Vec3& p) const;

  /// Cell of a point inside the range. floor((p - range_min) / voxel_size).
  Cell3 cell_of(const Vec3& p) const;

  /// Geometric center of a cell, in meters.
  Vec3 cell_center(const Cell3& c) const;
};

}  // namespace sfkit
