#include "sfkit/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sfkit {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width < 1 || height < 1) throw InputError("camera image extent must be at least 1x1");
  // R R^T = I and det(R) = +1, both to 1e-9
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += rotation[r * 3 + k] * rotation[c * 3 + k];
      const double want = (r == c) ? 1.0 : 0.0;
      if (std::abs(dot - want) > 1e-9) throw InputError("camera rotation is not orthonormal");
    }
  }
  const double det =
      rotation[0] * (rotation[4] * rotation[8] - rotation[5] * rotation[7]) -
      rotation[1] * (rotation[3] * rotation[8] - rotation[5] * rotation[6]) +
      rotation[2] * (rotation[3] * rotation[7] - rotation[4] * rotation[6]);
  if (std::abs(det - 1.0) > 1e-9) throw InputError("camera rotation determinant is not +1");
}

Vec3 CameraModel::world_to_camera(const Vec3& p) const {
  Vec3 out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = rotation[r * 3] * p[0] + rotation[r * 3 + 1] * p[1] + rotation[r * 3 + 2] * p[2] +
             translation[r];
  }
  return out;
}

Vec3 CameraModel::camera_to_world(const Vec3& p) const {
  // inverse rigid transform: R^T (p - t)
  const Vec3 d{p[0] - translation[0], p[1] - translation[1], p[2] - translation[2]};
  Vec3 out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = rotation[r] * d[0] + rotation[3 + r] * d[1] + rotation[6 + r] * d[2];
  }
  return out;
}

std::vector<PixelProjection> project_to_image(const std::vector<Vec3>& centroids,
                                              const CameraModel& cam) {
  std::vector<PixelProjection> out;
  out.reserve(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const Vec3 c = cam.world_to_camera(centroids[i]);
    if (c[2] <= 0.0) continue;
    const double u = cam.fx * c[0] / c[2] + cam.cx;
    const double v = cam.fy * c[1] / c[2] + cam.cy;
    if (u < 0.0 || u >= cam.width || v < 0.0 || v >= cam.height) continue;
    out.push_back({i, u, v, c[2]});
  }
  return out;
}

Vec3 unproject_pixel(const CameraModel& cam, double u, double v, double depth) {
  const Vec3 p_cam{(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth};
  return cam.camera_to_world(p_cam);
}

void save_camera(const std::string& path, const CameraModel& cam) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << "fx " << cam.fx << "\n";
  os << "fy " << cam.fy << "\n";
  os << "cx " << cam.cx << "\n";
  os << "cy " << cam.cy << "\n";
  os << "W " << cam.width << "\n";
  os << "H " << cam.height << "\n";
  os << "extrinsic";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << " " << cam.rotation[r * 3 + c];
    os << " " << cam.translation[r];
  }
  os << "\n";
}

CameraModel load_camera(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open '" + path + "' for reading");
  CameraModel cam;
  bool have_extrinsic = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "fx") ls >> cam.fx;
    else if (key == "fy") ls >> cam.fy;
    else if (key == "cx") ls >> cam.cx;
    else if (key == "cy") ls >> cam.cy;
    else if (key == "W") ls >> cam.width;
    else if (key == "H") ls >> cam.height;
    else if (key == "extrinsic") {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) ls >> cam.rotation[r * 3 + c];
        ls >> cam.translation[r];
      }
      have_extrinsic = true;
    } else {
      throw InputError("unknown camera key '" + key + "' in " + path);
    }
    if (!ls) throw InputError("malformed camera line: " + line);
  }
  if (!have_extrinsic) throw InputError("camera file missing extrinsic line");
  cam.validate();
  return cam;
}

}  // namespace sfkit
