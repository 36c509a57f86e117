#pragma once

#include <string>
#include <vector>

#include "sfkit/grid.hpp"

namespace sfkit {

/// N x 3 point coordinates in meters, optional per-point intensity.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> intensity;  // empty, or one entry per point

  std::size_t size() const { return points.size(); }
  bool has_intensity() const { return !intensity.empty(); }

  /// Throws InputError if empty, intensity length mismatches, or any
  /// coordinate is non-finite.
  void validate() const;
};

/// Binary format: magic "SFPC", point count as little-endian u64, then
/// count x (3 or 4) little-endian f32 (4 when intensity is present; the
/// reader infers the stride from the payload size).
void save_point_cloud(const std::string& path, const PointCloud& pc);
PointCloud load_point_cloud(const std::string& path);

}  // namespace sfkit
