#include "sfkit/scene.hpp"

#include <algorithm>
#include <cmath>

#include "sfkit/rng.hpp"

namespace sfkit {

void SceneSpec::validate() const {
  if (!(density > 0.0)) throw InputError("scene density must be positive");
  if (cameras.empty()) throw InputError("scene needs at least one camera");
  for (const auto& cam : cameras) cam.validate();
  std::vector<Vec3> pool = object_extent_pool;
  if (pool.empty()) pool.push_back(object_extent);
  for (const auto& extent : pool) {
    for (int a = 0; a < 3; ++a) {
      if (!(extent[a] > 0.0)) throw InputError("object extent must be positive");
      if (extent[a] >= grid.range_max[a] - grid.range_min[a]) {
        throw InputError("objects do not fit inside the grid range");
      }
    }
  }
}

SceneSpec SceneSpec::default_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.grid = GridSpec({-12.0, -12.0, -2.0}, {12.0, 12.0, 2.0}, {0.3, 0.3, 0.25});
  CameraModel cam;
  cam.fx = cam.fy = 200.0;
  cam.cx = 128.0;
  cam.cy = 64.0;
  cam.width = 256;
  cam.height = 128;
  // at (-11, 0, 0.4), looking along +x, up = +z
  const double rot[9] = {0, -1, 0, 0, 0, -1, 1, 0, 0};
  std::copy(rot, rot + 9, cam.rotation);
  const Vec3 pos{-11.0, 0.0, 0.4};
  for (int r = 0; r < 3; ++r) {
    cam.translation[r] = -(cam.rotation[r * 3] * pos[0] + cam.rotation[r * 3 + 1] * pos[1] +
                           cam.rotation[r * 3 + 2] * pos[2]);
  }
  spec.cameras.push_back(cam);
  return spec;
}

SceneSpec SceneSpec::alignment_spec(std::uint64_t seed) {
  SceneSpec spec = default_spec(seed);
  spec.seed = seed;
  spec.place_in_camera_wedge = true;
  spec.object_extent_pool = {
      {0.3, 0.3, 1.8},  // thin post
      {1.6, 1.6, 1.6},  // car-sized box
      {0.3, 0.3, 1.8},
      {1.2, 0.6, 1.2},
      {0.3, 0.3, 1.8},
  };
  spec.density = 110.0;
  return spec;
}

bool box_contains(const ObjectBox& box, const Vec3& p) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(p[a] - box.center[a]) > box.half_extent[a]) return false;
  }
  return true;
}

namespace {

// one point uniform on the surface of an axis-aligned box
Vec3 sample_box_surface(const ObjectBox& box, Rng& rng) {
  const Vec3& h = box.half_extent;
  const double area_x = h[1] * h[2];  // faces normal to x (relative weights)
  const double area_y = h[0] * h[2];
  const double area_z = h[0] * h[1];
  const double total = 2.0 * (area_x + area_y + area_z);
  double pick = rng.uniform(0.0, total);
  int axis = 0;
  if (pick < 2.0 * area_x) {
    axis = 0;
  } else if (pick < 2.0 * (area_x + area_y)) {
    axis = 1;
    pick -= 2.0 * area_x;
  } else {
    axis = 2;
    pick -= 2.0 * (area_x + area_y);
  }
  const double side = (rng.next_u64() & 1) ? 1.0 : -1.0;
  Vec3 p = box.center;
  p[axis] += side * h[axis];
  const int u_axis = (axis + 1) % 3;
  const int v_axis = (axis + 2) % 3;
  p[u_axis] += rng.uniform(-h[u_axis], h[u_axis]);
  p[v_axis] += rng.uniform(-h[v_axis], h[v_axis]);
  return p;
}

double box_surface_area(const ObjectBox& box) {
  const Vec3 e{2.0 * box.half_extent[0], 2.0 * box.half_extent[1], 2.0 * box.half_extent[2]};
  return 2.0 * (e[0] * e[1] + e[1] * e[2] + e[0] * e[2]);
}

// rasterize one box into the camera mask by projecting a fine surface grid
void rasterize_box(const ObjectBox& box, const CameraModel& cam, PixelMask& mask) {
  const double step = 0.02;  // meters between surface samples
  for (int axis = 0; axis < 3; ++axis) {
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    const int nu = std::max(2, static_cast<int>(2.0 * box.half_extent[u_axis] / step) + 1);
    const int nv = std::max(2, static_cast<int>(2.0 * box.half_extent[v_axis] / step) + 1);
    for (int side = -1; side <= 1; side += 2) {
      for (int iu = 0; iu < nu; ++iu) {
        for (int iv = 0; iv < nv; ++iv) {
          Vec3 p = box.center;
          p[axis] += side * box.half_extent[axis];
          p[u_axis] += -box.half_extent[u_axis] +
                       2.0 * box.half_extent[u_axis] * iu / static_cast<double>(nu - 1);
          p[v_axis] += -box.half_extent[v_axis] +
                       2.0 * box.half_extent[v_axis] * iv / static_cast<double>(nv - 1);
          const Vec3 c = cam.world_to_camera(p);
          if (c[2] <= 0.0) continue;
          const int u = static_cast<int>(std::floor(cam.fx * c[0] / c[2] + cam.cx));
          const int v = static_cast<int>(std::floor(cam.fy * c[1] / c[2] + cam.cy));
          if (u < 0 || v < 0 || u >= mask.width || v >= mask.height) continue;
          mask.mask[static_cast<std::size_t>(v) * mask.width + u] = 1;
        }
      }
    }
  }
}

}  // namespace

Scene synth_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;

  std::vector<Vec3> pool = spec.object_extent_pool;
  if (pool.empty()) pool.push_back(spec.object_extent);
  const double ground_z = spec.grid.range_min[2] + 0.05;
  Rng place_rng = rng.fork(1);
  for (std::size_t i = 0; i < spec.num_objects; ++i) {
    ObjectBox box;
    const Vec3& extent = pool[i % pool.size()];
    box.half_extent = {extent[0] / 2.0, extent[1] / 2.0, extent[2] / 2.0};
    if (spec.place_in_camera_wedge) {
      // sample along the first camera's forward axis, inside its image
      const CameraModel& cam = spec.cameras.front();
      const Vec3 cam_pos = cam.camera_to_world({0.0, 0.0, 0.0});
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double range = place_rng.uniform(5.0, 18.0);
        const double half_angle = std::atan(0.5 * cam.width / cam.fx) * 0.8;
        const double angle = place_rng.uniform(-half_angle, half_angle);
        const Vec3 fwd = cam.camera_to_world({0.0, 0.0, 1.0});
        const Vec3 right = cam.camera_to_world({1.0, 0.0, 0.0});
        Vec3 dir{fwd[0] - cam_pos[0], fwd[1] - cam_pos[1], fwd[2] - cam_pos[2]};
        Vec3 lat{right[0] - cam_pos[0], right[1] - cam_pos[1], right[2] - cam_pos[2]};
        const double cos_a = std::cos(angle), sin_a = std::sin(angle);
        bool inside = true;
        for (int a = 0; a < 2; ++a) {
          box.center[a] = cam_pos[a] + range * (cos_a * dir[a] + sin_a * lat[a]);
          const double lo = spec.grid.range_min[a] + box.half_extent[a] + 0.4;
          const double hi = spec.grid.range_max[a] - box.half_extent[a] - 0.4;
          if (box.center[a] < lo || box.center[a] > hi) inside = false;
        }
        if (inside) break;
      }
      for (int a = 0; a < 2; ++a) {
        const double lo = spec.grid.range_min[a] + box.half_extent[a] + 0.4;
        const double hi = spec.grid.range_max[a] - box.half_extent[a] - 0.4;
        box.center[a] = std::clamp(box.center[a], lo, hi);
      }
    } else {
      // anywhere inside the grid, clear of the boundary
      for (int a = 0; a < 2; ++a) {
        const double lo = spec.grid.range_min[a] + box.half_extent[a] + 0.5;
        const double hi = spec.grid.range_max[a] - box.half_extent[a] - 0.5;
        box.center[a] = place_rng.uniform(lo, hi);
      }
    }
    box.center[2] = ground_z + box.half_extent[2];
    scene.boxes.push_back(box);
  }

  Rng point_rng = rng.fork(2);
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(spec.density * box_surface_area(scene.boxes[b])));
    for (std::size_t i = 0; i < count; ++i) {
      scene.cloud.points.push_back(sample_box_surface(scene.boxes[b], point_rng));
      scene.point_object.push_back(static_cast<int>(b));
    }
  }
  if (spec.ground_density > 0.0) {
    const double area = (spec.grid.range_max[0] - spec.grid.range_min[0]) *
                        (spec.grid.range_max[1] - spec.grid.range_min[1]);
    const std::size_t count = static_cast<std::size_t>(std::ceil(spec.ground_density * area));
    for (std::size_t i = 0; i < count; ++i) {
      scene.cloud.points.push_back({point_rng.uniform(spec.grid.range_min[0], spec.grid.range_max[0]),
                                    point_rng.uniform(spec.grid.range_min[1], spec.grid.range_max[1]),
                                    ground_z});
      scene.point_object.push_back(-1);
    }
  }
  if (scene.cloud.points.empty()) throw InputError("scene spec produced no points");

  if (spec.noise_sigma > 0.0) {
    Rng noise_rng = rng.fork(3);
    for (auto& p : scene.cloud.points) {
      for (int a = 0; a < 3; ++a) p[a] += noise_rng.normal(0.0, spec.noise_sigma);
    }
  }

  // intensity: simple height channel, deterministic
  scene.cloud.intensity.resize(scene.cloud.points.size());
  for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
    scene.cloud.intensity[i] = scene.cloud.points[i][2] - spec.grid.range_min[2];
  }

  for (const auto& cam : spec.cameras) {
    PixelMask mask;
    mask.width = cam.width;
    mask.height = cam.height;
    mask.mask.assign(static_cast<std::size_t>(cam.width) * cam.height, 0);
    for (const auto& box : scene.boxes) rasterize_box(box, cam, mask);
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

}  // namespace sfkit
