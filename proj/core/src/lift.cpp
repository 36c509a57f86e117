#include "sfkit/lift.hpp"

#include <cmath>
#include <unordered_map>

namespace sfkit {

double DepthBins::depth_of(std::size_t bin) const {
  return d_min + (static_cast<double>(bin) + 0.5) * (d_max - d_min) / static_cast<double>(count);
}

void DepthBins::validate() const {
  if (!(d_max > d_min) || !(d_min > 0.0)) throw InputError("depth bins need 0 < d_min < d_max");
  if (count < 1) throw InputError("depth bin count must be >= 1");
}

TokenSequence lift_to_bev(const TokenSequence& image_tokens, const Tensor& depth_weights,
                          const DepthBins& bins, const CameraModel& cam, const GridSpec& grid) {
  image_tokens.validate();
  bins.validate();
  cam.validate();
  const std::size_t n = image_tokens.size();
  const std::size_t c = image_tokens.channels();
  if (depth_weights.rank() != 2 || depth_weights.extent(0) != n ||
      depth_weights.extent(1) != bins.count) {
    throw InputError("lift_to_bev: depth_weights must be [N x Dbin]");
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < bins.count; ++j) row += depth_weights[i * bins.count + j];
    if (std::abs(row - 1.0) > 1e-6) {
      throw InputError("lift_to_bev: depth weight row " + std::to_string(i) +
                       " sums to " + std::to_string(row) + ", not 1");
    }
  }

  struct CellKey {
    std::int64_t x, y;
    bool operator==(const CellKey& o) const { return x == o.x && y == o.y; }
  };
  struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
      return std::hash<std::int64_t>()(k.x * 0x9e3779b97f4a7c15LL ^ k.y);
    }
  };

  std::unordered_map<CellKey, std::size_t, CellKeyHash> index_of;
  std::vector<CellKey> cells;
  std::vector<std::vector<double>> feature_sum;
  std::vector<double> mass;

  const auto dims = grid.dims();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = image_tokens.coords[i][0];
    const double v = image_tokens.coords[i][1];
    for (std::size_t j = 0; j < bins.count; ++j) {
      const double w = depth_weights[i * bins.count + j];
      if (w == 0.0) continue;
      const Vec3 world = unproject_pixel(cam, u, v, bins.depth_of(j));
      const std::int64_t gx =
          static_cast<std::int64_t>(std::floor((world[0] - grid.range_min[0]) / grid.voxel_size[0]));
      const std::int64_t gy =
          static_cast<std::int64_t>(std::floor((world[1] - grid.range_min[1]) / grid.voxel_size[1]));
      if (gx < 0 || gy < 0 || gx >= dims[0] || gy >= dims[1]) continue;
      auto [it, inserted] = index_of.try_emplace(CellKey{gx, gy}, cells.size());
      if (inserted) {
        cells.push_back({gx, gy});
        feature_sum.emplace_back(c, 0.0);
        mass.push_back(0.0);
      }
      const std::size_t slot = it->second;
      for (std::size_t ch = 0; ch < c; ++ch) {
        feature_sum[slot][ch] += w * image_tokens.features[i * c + ch];
      }
      mass[slot] += w;
    }
  }

  TokenSequence out;
  out.features = Tensor({cells.size(), c});
  out.coords.resize(cells.size());
  out.modality.assign(cells.size(), Modality::Camera);
  for (std::size_t s = 0; s < cells.size(); ++s) {
    out.coords[s] = {static_cast<double>(cells[s].x), static_cast<double>(cells[s].y), 0.0};
    for (std::size_t ch = 0; ch < c; ++ch) out.features[s * c + ch] = feature_sum[s][ch] / mass[s];
  }
  return out;
}

}  // namespace sfkit
