#pragma once

#include <string>
#include <vector>

#include "sfkit/grid.hpp"

namespace sfkit {

/// Pinhole camera: intrinsics in pixels plus a rigid world->camera
/// transform. Camera frame is X right, Y down, Z forward.
struct CameraModel {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  double rotation[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major world->camera
  Vec3 translation{0.0, 0.0, 0.0};

  /// Throws InputError unless fx,fy > 0 and the rotation is orthonormal
  /// with determinant +1 to 1e-9.
  void validate() const;

  Vec3 world_to_camera(const Vec3& p) const;
  Vec3 camera_to_world(const Vec3& p) const;
};

struct PixelProjection {
  std::size_t index;  // row of the input the projection came from
  double u;
  double v;
  double depth;
};

/// Projects world points; entries behind the camera (depth <= 0) or outside
/// [0,W)x[0,H) are omitted rather than reported as errors.
std::vector<PixelProjection> project_to_image(const std::vector<Vec3>& centroids,
                                              const CameraModel& cam);

/// Inverse of the projection: pixel (u,v) at camera depth back to world.
Vec3 unproject_pixel(const CameraModel& cam, double u, double v, double depth);

/// Plain-text key-value file: fx, fy, cx, cy, W, H and a 12-entry row-major
/// [R|t] line under the key "extrinsic".
void save_camera(const std::string& path, const CameraModel& cam);
CameraModel load_camera(const std::string& path);

}  // namespace sfkit
