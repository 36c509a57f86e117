#include "sfkit/grid.hpp"

#include <cmath>
#include <string>

namespace sfkit {

GridSpec::GridSpec(Vec3 min, Vec3 max, Vec3 size)
    : range_min(min), range_max(max), voxel_size(size) {
  for (int a = 0; a < 3; ++a) {
    if (!(range_max[a] > range_min[a])) {
      throw InputError("grid range_max must exceed range_min on axis " + std::to_string(a));
    }
    if (!(voxel_size[a] > 0.0)) {
      throw InputError("grid voxel_size must be positive on axis " + std::to_string(a));
    }
  }
}

std::array<std::int64_t, 3> GridSpec::dims() const {
  std::array<std::int64_t, 3> d{};
  for (int a = 0; a < 3; ++a) {
    d[a] = static_cast<std::int64_t>(std::ceil((range_max[a] - range_min[a]) / voxel_size[a]));
    if (d[a] < 1) d[a] = 1;
  }
  return d;
}

bool GridSpec::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < range_min[a] || p[a] >= range_max[a]) return false;
  }
  return true;
}

Cell3 GridSpec::cell_of(const Vec3& p) const {
  Cell3 c{};
  for (int a = 0; a < 3; ++a) {
    c[a] = static_cast<std::int64_t>(std::floor((p[a] - range_min[a]) / voxel_size[a]));
  }
  return c;
}

Vec3 GridSpec::cell_center(const Cell3& c) const {
  Vec3 p{};
  for (int a = 0; a < 3; ++a) {
    p[a] = range_min[a] + (static_cast<double>(c[a]) + 0.5) * voxel_size[a];
  }
  return p;
}

}  // namespace sfkit
