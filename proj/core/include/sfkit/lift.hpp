#pragma once

#include "sfkit/camera.hpp"
#include "sfkit/token.hpp"

namespace sfkit {

/// Uniform depth binning along each pixel ray: bin j sits at
/// d_min + (j + 0.5) * (d_max - d_min) / count.
struct DepthBins {
  double d_min = 1.0;
  double d_max = 50.0;
  std::size_t count = 8;

  double depth_of(std::size_t bin) const;
  void validate() const;
};

/// Simplified lift-splat: each image token (pixel coords (u,v,*)) is
/// distributed to the BEV cells hit by its depth-bin ray points, weighted by
/// its row of depth_weights [N x Dbin]; rows must sum to 1 +- 1e-6. Per-cell
/// features are weight-normalized sums; cells with zero mass are omitted.
/// Output coords are BEV cell indices (x, y, 0), modality Camera.
TokenSequence lift_to_bev(const TokenSequence& image_tokens, const Tensor& depth_weights,
                          const DepthBins& bins, const CameraModel& cam, const GridSpec& grid);

}  // namespace sfkit
