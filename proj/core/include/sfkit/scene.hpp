#pragma once

#include <cstdint>
#include <vector>

#include "sfkit/camera.hpp"
#include "sfkit/point_cloud.hpp"

namespace sfkit {

struct ObjectBox {
  Vec3 center{};
  Vec3 half_extent{};
};

/// Synthetic scene recipe: seeded boxes on a ground plane, surface-sampled
/// points, and a camera rig for ground-truth pixel masks.
struct SceneSpec {
  std::uint64_t seed = 1;
  std::size_t num_objects = 3;
  Vec3 object_extent{1.6, 1.6, 1.6};  // full box extents, meters
  /// When non-empty, object i uses extent pool[i % pool.size()] instead.
  std::vector<Vec3> object_extent_pool;
  double density = 60.0;              // surface points per square meter
  double ground_density = 4.0;        // ground-plane points per square meter
  /// Place objects inside the first camera's horizontal frustum wedge, so
  /// every object contributes mask pixels and projected voxels.
  bool place_in_camera_wedge = false;
  std::vector<CameraModel> cameras;
  GridSpec grid;
  double noise_sigma = 0.0;

  void validate() const;
  /// Small desk-scale scene: 24 m x 24 m grid at [0.3, 0.3, 0.25] voxel
  /// resolution, one forward-looking camera.
  static SceneSpec default_spec(std::uint64_t seed);
  /// Scene tuned for the camera-alignment eval: frustum-placed objects
  /// mixing wide boxes with thin posts whose silhouettes are narrow
  /// relative to quantization shifts.
  static SceneSpec alignment_spec(std::uint64_t seed);
};

struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // row-major, 1 = object surface visible

  bool at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u] != 0; }
};

struct Scene {
  PointCloud cloud;
  std::vector<ObjectBox> boxes;
  std::vector<PixelMask> masks;    // one per camera
  std::vector<int> point_object;   // -1 = ground, otherwise box index
};

/// Deterministic for a given seed. Points are sampled on box surfaces and
/// the ground plane; masks come from exact projection of dense surface
/// samples.
Scene synth_scene(const SceneSpec& spec);

/// True when the box with the given index contains the point.
bool box_contains(const ObjectBox& box, const Vec3& p);

}  // namespace sfkit
