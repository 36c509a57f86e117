#include "sfkit/fusion.hpp"

#include <cmath>

namespace sfkit {

std::pair<TokenSequence, TokenSequence> modality_align(
    const TokenSequence& lidar, const TokenSequence& camera,
    const std::vector<HybridBlockParams>& shared_params, const HybridBlockConfig& config_lidar,
    const HybridBlockConfig& config_camera) {
  lidar.validate();
  camera.validate();
  if (lidar.channels() != camera.channels()) {
    throw InputError("modality_align: channel counts differ across modalities");
  }
  if (shared_params.empty()) throw InputError("modality_align: needs at least one block");
  TokenSequence out_lidar = lidar;
  TokenSequence out_camera = camera;
  for (const auto& block : shared_params) {
    out_lidar = hybrid_block_forward(out_lidar, block, config_lidar);
    out_camera = hybrid_block_forward(out_camera, block, config_camera);
  }
  return {std::move(out_lidar), std::move(out_camera)};
}

std::pair<TokenSequence, TokenSequence> modality_align(
    const TokenSequence& lidar, const TokenSequence& camera,
    const std::vector<HybridBlockParams>& shared_params, const HybridBlockConfig& config) {
  return modality_align(lidar, camera, shared_params, config, config);
}

double modality_gap(const TokenSequence& a, const TokenSequence& b) {
  a.validate();
  b.validate();
  const std::size_t c = a.channels();
  if (c != b.channels()) throw InputError("modality_gap: channel mismatch");
  auto stats = [&](const TokenSequence& t, std::size_t ch) {
    double mean = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) mean += t.features[i * c + ch];
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = t.features[i * c + ch] - mean;
      var += d * d;
    }
    var /= static_cast<double>(t.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  double gap = 0.0;
  double pooled_sq = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto [ma, sa] = stats(a, ch);
    const auto [mb, sb] = stats(b, ch);
    gap += std::abs(ma - mb) + std::abs(sa - sb);
    pooled_sq += ma * ma + sa * sa + mb * mb + sb * sb;
  }
  const double scale = std::sqrt(pooled_sq / (2.0 * static_cast<double>(c)));
  return gap / (scale + 1e-12);
}

ImageFusionResult fuse_image_space(const TokenSequence& voxel_tokens,
                                   const TokenSequence& image_tokens, const CameraModel& cam,
                                   HybridStack& stack) {
  voxel_tokens.validate();
  image_tokens.validate();
  if (voxel_tokens.channels() != image_tokens.channels()) {
    throw InputError("fuse_image_space: channel mismatch");
  }
  const auto projections = project_to_image(voxel_tokens.coords, cam);
  if (projections.empty()) {
    throw InputError("fuse_image_space: no voxel projects into the camera view");
  }

  TokenSequence projected;
  projected.features = Tensor({projections.size(), voxel_tokens.channels()},
                              voxel_tokens.features.precision());
  projected.coords.resize(projections.size());
  projected.modality.assign(projections.size(), Modality::Lidar);
  ImageFusionResult result;
  result.surviving_voxels.reserve(projections.size());
  const std::size_t c = voxel_tokens.channels();
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const auto& p = projections[i];
    result.surviving_voxels.push_back(p.index);
    projected.coords[i] = {p.u, p.v, 0.0};
    for (std::size_t j = 0; j < c; ++j) {
      projected.features[i * c + j] = voxel_tokens.features[p.index * c + j];
    }
  }

  // image tokens first, projected voxels after; the image-plane curve order
  // interleaves them spatially
  TokenSequence merged = TokenSequence::concat(image_tokens, projected);
  TokenSequence fused = stack.forward(merged);

  const std::size_t n_img = image_tokens.size();
  result.camera.features = Tensor({n_img, c}, fused.features.precision());
  result.camera.coords.assign(fused.coords.begin(), fused.coords.begin() + n_img);
  result.camera.modality.assign(n_img, Modality::Camera);
  for (std::size_t i = 0; i < n_img * c; ++i) result.camera.features[i] = fused.features[i];

  const std::size_t n_vox = projections.size();
  result.lidar.features = Tensor({n_vox, c}, fused.features.precision());
  result.lidar.coords.assign(fused.coords.begin() + n_img, fused.coords.end());
  result.lidar.modality.assign(n_vox, Modality::Lidar);
  for (std::size_t i = 0; i < n_vox * c; ++i) {
    result.lidar.features[i] = fused.features[n_img * c + i];
  }
  return result;
}

BevFusionResult fuse_bev_space(const TokenSequence& lidar_tokens,
                               const TokenSequence& camera_tokens, HybridStack& stack,
                               bool keep_camera_cells) {
  lidar_tokens.validate();
  camera_tokens.validate();
  if (lidar_tokens.size() == 0) throw InputError("fuse_bev_space: empty LiDAR token set");
  if (camera_tokens.size() > 0 && lidar_tokens.channels() != camera_tokens.channels()) {
    throw InputError("fuse_bev_space: channel mismatch");
  }

  TokenSequence merged = camera_tokens.size() > 0
                             ? TokenSequence::concat(lidar_tokens, camera_tokens)
                             : lidar_tokens;
  TokenSequence fused = stack.forward(merged);

  BevFusionResult result;
  if (keep_camera_cells) {
    result.fused = std::move(fused);
    result.lidar_rows.resize(merged.size());
    for (std::size_t i = 0; i < result.lidar_rows.size(); ++i) result.lidar_rows[i] = i;
    return result;
  }
  const std::size_t n_lidar = lidar_tokens.size();
  const std::size_t c = lidar_tokens.channels();
  result.fused.features = Tensor({n_lidar, c}, fused.features.precision());
  result.fused.coords.assign(fused.coords.begin(), fused.coords.begin() + n_lidar);
  result.fused.modality.assign(n_lidar, Modality::Lidar);
  for (std::size_t i = 0; i < n_lidar * c; ++i) result.fused.features[i] = fused.features[i];
  result.lidar_rows.resize(n_lidar);
  for (std::size_t i = 0; i < n_lidar; ++i) result.lidar_rows[i] = i;
  return result;
}

std::vector<double> erf_probe(FeaturePipeline& pipeline, const TokenSequence& tokens,
                              const std::vector<std::size_t>& query_indices) {
  tokens.validate();
  const std::size_t n = tokens.size();
  const std::size_t c = tokens.channels();
  for (std::size_t q : query_indices) {
    if (q >= n) throw InputError("erf_probe: query index out of range");
  }
  TokenSequence out = pipeline.forward(tokens);
  std::vector<double> merged(n, 0.0);
  for (std::size_t q : query_indices) {
    double norm = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = out.features[q * c + j];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    Tensor upstream({n, c});
    if (norm > 0.0) {
      for (std::size_t j = 0; j < c; ++j) upstream[q * c + j] = out.features[q * c + j] / norm;
    }
    const Tensor grad = pipeline.backward(upstream);
    for (std::size_t i = 0; i < n; ++i) {
      double mag = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = grad[i * c + j];
        mag += v * v;
      }
      mag = std::sqrt(mag);
      if (mag > merged[i]) merged[i] = mag;
    }
  }
  return merged;
}

}  // namespace sfkit
