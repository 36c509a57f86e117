#pragma once

#include <cstdint>
#include <vector>

#include "sfkit/grid.hpp"
#include "sfkit/point_cloud.hpp"
#include "sfkit/tensor.hpp"

namespace sfkit {

/// Occupied voxels of one pyramid stage. Centroids are kept in continuous
/// space alongside the discrete grid indices so height survives merging.
struct SparseVoxelSet {
  int stage = 0;
  GridSpec grid;                 // stage-0 grid this set descends from
  Vec3 effective_voxel_size{};   // stage-0 size scaled by all merge factors
  std::vector<Cell3> discrete_coords;       // M x 3, unique within the set
  std::vector<Vec3> continuous_centroids;   // M x 3 meters
  Tensor features;                          // M x C
  std::vector<std::size_t> point_assignment;  // constituent -> voxel index
  std::vector<std::size_t> counts;            // M, underlying point counts

  std::size_t size() const { return discrete_coords.size(); }
  std::size_t total_count() const;
  /// Count-weighted mean of continuous centroids over the whole set.
  Vec3 global_centroid() const;
};

/// Assigns in-range points to voxels by floor division; the centroid of each
/// voxel is the arithmetic mean of its member points in continuous space.
/// Points outside the range are dropped; zero survivors is an error.
SparseVoxelSet voxelize(const PointCloud& pc, const GridSpec& grid);

/// out[m] = mean of rows of `values` with assignment == m. Every group in
/// [0, groups) must be non-empty.
Tensor scatter_mean(const Tensor& values, const std::vector<std::size_t>& assignment,
                    std::size_t groups);

enum class CentroidMode { Continuous, Discrete };

/// Merges voxels by integer division of discrete coordinates. Continuous
/// mode carries count-weighted centroids through the merge (or uniform
/// child means when count_weighted is false); discrete mode snaps each
/// merged centroid to the geometric center of its merged cell, which is the
/// baseline that quantizes height away.
SparseVoxelSet downsample_voxels(const SparseVoxelSet& vs, const std::array<int, 3>& factor,
                                 CentroidMode mode, bool count_weighted = true);

/// Expands the k most salient voxels into diagonal (x+-1, y+-1, z)
/// candidates, keeping only candidates whose (x, y, floor(z/m)) projection
/// collides with no existing voxel's projection. Exact-coordinate
/// duplicates among kept candidates go to the proposer with the lower
/// storage index. Returns the generated voxels only.
SparseVoxelSet generate_salient_voxels(const SparseVoxelSet& vs, std::size_t k, int m,
                                       const Tensor& saliency);

/// L2 norm per feature row, the stand-in saliency score.
Tensor feature_norm_saliency(const SparseVoxelSet& vs);

}  // namespace sfkit
