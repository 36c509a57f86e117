#include "sfkit/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace sfkit {

namespace {

struct CellHash {
  std::size_t operator()(const Cell3& c) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int64_t v : c) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::size_t SparseVoxelSet::total_count() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

Vec3 SparseVoxelSet::global_centroid() const {
  Vec3 sum{0.0, 0.0, 0.0};
  double mass = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    const double w = static_cast<double>(counts[j]);
    for (int a = 0; a < 3; ++a) sum[a] += w * continuous_centroids[j][a];
    mass += w;
  }
  if (mass <= 0.0) throw InvariantError("voxel set has zero total count");
  return {sum[0] / mass, sum[1] / mass, sum[2] / mass};
}

SparseVoxelSet voxelize(const PointCloud& pc, const GridSpec& grid) {
  pc.validate();
  SparseVoxelSet vs;
  vs.stage = 0;
  vs.grid = grid;
  vs.effective_voxel_size = grid.voxel_size;

  std::unordered_map<Cell3, std::size_t, CellHash> index_of;
  std::vector<Vec3> coord_sums;
  std::vector<double> intensity_sums;
  vs.point_assignment.reserve(pc.size());

  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.points[i];
    if (!grid.contains(p)) continue;
    const Cell3 cell = grid.cell_of(p);
    auto [it, inserted] = index_of.try_emplace(cell, vs.discrete_coords.size());
    if (inserted) {
      vs.discrete_coords.push_back(cell);
      coord_sums.push_back({0.0, 0.0, 0.0});
      intensity_sums.push_back(0.0);
      vs.counts.push_back(0);
    }
    const std::size_t j = it->second;
    for (int a = 0; a < 3; ++a) coord_sums[j][a] += p[a];
    if (pc.has_intensity()) intensity_sums[j] += pc.intensity[i];
    vs.counts[j] += 1;
    vs.point_assignment.push_back(j);
  }

  if (vs.discrete_coords.empty()) throw InputError("no points fall inside the grid range");

  const std::size_t m = vs.discrete_coords.size();
  vs.continuous_centroids.resize(m);
  vs.features = Tensor({m, 1});
  for (std::size_t j = 0; j < m; ++j) {
    const double n = static_cast<double>(vs.counts[j]);
    for (int a = 0; a < 3; ++a) vs.continuous_centroids[j][a] = coord_sums[j][a] / n;
    vs.features[j] = pc.has_intensity() ? intensity_sums[j] / n : 0.0;
  }
  return vs;
}

Tensor scatter_mean(const Tensor& values, const std::vector<std::size_t>& assignment,
                    std::size_t groups) {
  if (values.rank() != 2) throw InputError("scatter_mean expects values[K,D]");
  const std::size_t k = values.extent(0), d = values.extent(1);
  if (assignment.size() != k) throw InputError("scatter_mean: assignment length mismatch");
  Tensor out({groups, d});
  std::vector<std::size_t> counts(groups, 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t g = assignment[i];
    if (g >= groups) throw InputError("scatter_mean: group index out of range");
    for (std::size_t c = 0; c < d; ++c) out[g * d + c] += values[i * d + c];
    counts[g] += 1;
  }
  for (std::size_t g = 0; g < groups; ++g) {
    if (counts[g] == 0) throw InputError("scatter_mean: empty group " + std::to_string(g));
    for (std::size_t c = 0; c < d; ++c) out[g * d + c] /= static_cast<double>(counts[g]);
  }
  return out;
}

SparseVoxelSet downsample_voxels(const SparseVoxelSet& vs, const std::array<int, 3>& factor,
                                 CentroidMode mode, bool count_weighted) {
  if (vs.size() == 0) throw InputError("downsample_voxels: empty voxel set");
  for (int a = 0; a < 3; ++a) {
    if (factor[a] < 1) throw InputError("downsample factor components must be >= 1");
  }
  const std::size_t children = vs.size();
  const std::size_t feat_dim = vs.features.extent(1);

  SparseVoxelSet out;
  out.stage = vs.stage + 1;
  out.grid = vs.grid;
  for (int a = 0; a < 3; ++a) {
    out.effective_voxel_size[a] = vs.effective_voxel_size[a] * factor[a];
  }

  std::unordered_map<Cell3, std::size_t, CellHash> index_of;
  out.point_assignment.resize(children);
  std::vector<Vec3> centroid_acc;
  std::vector<double> weight_acc;
  std::vector<std::vector<double>> feature_acc;

  for (std::size_t j = 0; j < children; ++j) {
    Cell3 merged;
    for (int a = 0; a < 3; ++a) merged[a] = floor_div(vs.discrete_coords[j][a], factor[a]);
    auto [it, inserted] = index_of.try_emplace(merged, out.discrete_coords.size());
    if (inserted) {
      out.discrete_coords.push_back(merged);
      out.counts.push_back(0);
      centroid_acc.push_back({0.0, 0.0, 0.0});
      weight_acc.push_back(0.0);
      feature_acc.emplace_back(feat_dim, 0.0);
    }
    const std::size_t g = it->second;
    out.point_assignment[j] = g;
    const double w_centroid = count_weighted ? static_cast<double>(vs.counts[j]) : 1.0;
    const double w_feature = static_cast<double>(vs.counts[j]);
    for (int a = 0; a < 3; ++a) centroid_acc[g][a] += w_centroid * vs.continuous_centroids[j][a];
    weight_acc[g] += w_centroid;
    for (std::size_t c = 0; c < feat_dim; ++c) {
      feature_acc[g][c] += w_feature * vs.features[j * feat_dim + c];
    }
    out.counts[g] += vs.counts[j];
  }

  const std::size_t m = out.discrete_coords.size();
  out.continuous_centroids.resize(m);
  out.features = Tensor({m, feat_dim});
  for (std::size_t g = 0; g < m; ++g) {
    if (mode == CentroidMode::Continuous) {
      for (int a = 0; a < 3; ++a) out.continuous_centroids[g][a] = centroid_acc[g][a] / weight_acc[g];
    } else {
      for (int a = 0; a < 3; ++a) {
        out.continuous_centroids[g][a] =
            vs.grid.range_min[a] +
            (static_cast<double>(out.discrete_coords[g][a]) + 0.5) * out.effective_voxel_size[a];
      }
    }
    const double total = static_cast<double>(out.counts[g]);
    for (std::size_t c = 0; c < feat_dim; ++c) out.features[g * feat_dim + c] = feature_acc[g][c] / total;
  }
  return out;
}

Tensor feature_norm_saliency(const SparseVoxelSet& vs) {
  const std::size_t m = vs.size();
  const std::size_t d = vs.features.extent(1);
  Tensor s({m});
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double v = vs.features[j * d + c];
      acc += v * v;
    }
    s[j] = std::sqrt(acc);
  }
  return s;
}

SparseVoxelSet generate_salient_voxels(const SparseVoxelSet& vs, std::size_t k, int m,
                                       const Tensor& saliency) {
  if (k > vs.size()) throw InputError("generate_salient_voxels: k exceeds voxel count");
  if (m < 1) throw InputError("generate_salient_voxels: m must be >= 1");
  if (saliency.size() != vs.size()) {
    throw InputError("generate_salient_voxels: saliency length mismatch");
  }

  // top-k by saliency, ties to the lower storage index
  std::vector<std::size_t> order(vs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return saliency[a] > saliency[b];
  });
  order.resize(k);
  // candidate conflicts resolve to the lower proposer index
  std::sort(order.begin(), order.end());

  std::unordered_set<Cell3, CellHash> existing_projected;
  for (const Cell3& c : vs.discrete_coords) {
    existing_projected.insert({c[0], c[1], floor_div(c[2], m)});
  }

  SparseVoxelSet out;
  out.stage = vs.stage;
  out.grid = vs.grid;
  out.effective_voxel_size = vs.effective_voxel_size;
  const std::size_t feat_dim = vs.features.extent(1);
  std::vector<std::vector<double>> kept_features;

  std::unordered_set<Cell3, CellHash> kept_exact;
  static constexpr int kOffsets[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  for (std::size_t proposer : order) {
    const Cell3& base = vs.discrete_coords[proposer];
    for (const auto& off : kOffsets) {
      const Cell3 cand{base[0] + off[0], base[1] + off[1], base[2]};
      const Cell3 projected{cand[0], cand[1], floor_div(cand[2], m)};
      if (existing_projected.count(projected)) continue;
      if (!kept_exact.insert(cand).second) continue;
      out.discrete_coords.push_back(cand);
      Vec3 centroid = vs.continuous_centroids[proposer];
      centroid[0] += off[0] * vs.effective_voxel_size[0];
      centroid[1] += off[1] * vs.effective_voxel_size[1];
      out.continuous_centroids.push_back(centroid);
      out.counts.push_back(vs.counts[proposer]);
      kept_features.emplace_back(feat_dim);
      for (std::size_t c = 0; c < feat_dim; ++c) {
        kept_features.back()[c] = vs.features[proposer * feat_dim + c];
      }
    }
  }

  out.features = Tensor({out.discrete_coords.size(), feat_dim});
  for (std::size_t j = 0; j < kept_features.size(); ++j) {
    for (std::size_t c = 0; c < feat_dim; ++c) out.features[j * feat_dim + c] = kept_features[j][c];
  }
  return out;
}

}  // namespace sfkit
