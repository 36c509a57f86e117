#pragma once

#include "sfkit/camera.hpp"
#include "sfkit/hybrid.hpp"

namespace sfkit {

/// Passes both modalities independently through the same block stack. The
/// parameter set is literally shared: both modalities read the same objects,
/// so mutating it changes both outputs. Each modality may quantize against
/// its own grid (config_lidar / config_camera). Throws on channel mismatch.
std::pair<TokenSequence, TokenSequence> modality_align(
    const TokenSequence& lidar, const TokenSequence& camera,
    const std::vector<HybridBlockParams>& shared_params, const HybridBlockConfig& config_lidar,
    const HybridBlockConfig& config_camera);

std::pair<TokenSequence, TokenSequence> modality_align(
    const TokenSequence& lidar, const TokenSequence& camera,
    const std::vector<HybridBlockParams>& shared_params, const HybridBlockConfig& config);

/// Scale-normalized distribution gap between two token sets: per-channel
/// |mean difference| + |std difference|, divided by the pooled feature RMS.
double modality_gap(const TokenSequence& a, const TokenSequence& b);

struct ImageFusionResult {
  TokenSequence lidar;    // surviving voxel tokens, coords (u, v, 0)
  TokenSequence camera;
  std::vector<std::size_t> surviving_voxels;  // rows of the input voxel set
};

/// Projects voxel tokens (continuous centroids in meters) onto the image
/// plane, merges them with the image tokens, runs the stack over the
/// image-plane curve order and splits the result back by modality. The
/// stack's grid must be the image-plane grid. Throws when no voxel
/// projection survives.
ImageFusionResult fuse_image_space(const TokenSequence& voxel_tokens,
                                   const TokenSequence& image_tokens, const CameraModel& cam,
                                   HybridStack& stack);

struct BevFusionResult {
  TokenSequence fused;                  // one token per retained cell
  std::vector<std::size_t> lidar_rows;  // rows of the merged input that survived
};

/// Concatenates LiDAR and lifted camera tokens in BEV, runs the stack, and
/// compresses: camera-only cells are dropped so the output cell set equals
/// the LiDAR cell set exactly (keep_camera_cells retains everything).
/// Throws when the LiDAR set is empty.
BevFusionResult fuse_bev_space(const TokenSequence& lidar_tokens,
                               const TokenSequence& camera_tokens, HybridStack& stack,
                               bool keep_camera_cells = false);

/// Gradient-support map: for each query token, the magnitude of the
/// gradient of its output feature norm with respect to every input token's
/// features; maps merged by elementwise maximum. The pipeline must have a
/// backward pass for everything it runs.
std::vector<double> erf_probe(FeaturePipeline& pipeline, const TokenSequence& tokens,
                              const std::vector<std::size_t>& query_indices);

}  // namespace sfkit
