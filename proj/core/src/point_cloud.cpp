#include "sfkit/point_cloud.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace sfkit {

void PointCloud::validate() const {
  if (points.empty()) throw InputError("point cloud is empty");
  if (!intensity.empty() && intensity.size() != points.size()) {
    throw InputError("intensity length does not match point count");
  }
  for (const auto& p : points) {
    for (double v : p) {
      if (!std::isfinite(v)) throw InputError("non-finite point coordinate");
    }
  }
}

namespace {

void write_f32_le(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

float read_f32_le(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_point_cloud(const std::string& path, const PointCloud& pc) {
  pc.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os.write("SFPC", 4);
  const std::uint64_t n = pc.size();
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((n >> (8 * i)) & 0xff));
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int a = 0; a < 3; ++a) write_f32_le(os, static_cast<float>(pc.points[i][a]));
    if (pc.has_intensity()) write_f32_le(os, static_cast<float>(pc.intensity[i]));
  }
}

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "' for reading");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SFPC", 4) != 0) throw InputError("bad point cloud magic");
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) {
    const int b = is.get();
    if (b < 0) throw InputError("truncated point cloud header");
    n |= static_cast<std::uint64_t>(b) << (8 * i);
  }
  is.seekg(0, std::ios::end);
  const std::int64_t payload = static_cast<std::int64_t>(is.tellg()) - 12;
  is.seekg(12, std::ios::beg);
  if (n == 0) throw InputError("point cloud file holds zero points");
  int stride = 0;
  if (payload == static_cast<std::int64_t>(n) * 12) stride = 3;
  else if (payload == static_cast<std::int64_t>(n) * 16) stride = 4;
  else throw InputError("point cloud payload size matches neither 3 nor 4 floats per point");
  PointCloud pc;
  pc.points.resize(n);
  if (stride == 4) pc.intensity.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) pc.points[i][a] = static_cast<double>(read_f32_le(is));
    if (stride == 4) pc.intensity[i] = static_cast<double>(read_f32_le(is));
  }
  if (!is) throw InputError("truncated point cloud payload");
  pc.validate();
  return pc;
}

}  // namespace sfkit
