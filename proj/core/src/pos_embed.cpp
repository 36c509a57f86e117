#include "sfkit/pos_embed.hpp"

#include <cmath>

namespace sfkit {

std::vector<Vec3> normalize_coords(const std::vector<Vec3>& coords, const Vec3& lo,
                                   const Vec3& hi) {
  std::vector<Vec3> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double span = hi[a] - lo[a];
      double u = span > 0.0 ? (coords[i][a] - lo[a]) / span : 0.0;
      if (u < 0.0) u = 0.0;
      if (u > 1.0) u = 1.0;
      out[i][a] = u;
    }
  }
  return out;
}

Tensor pos_embedding(const std::vector<Vec3>& unit_coords, std::size_t channels,
                     int frequencies) {
  if (frequencies < 1) throw InputError("pos_embedding: frequencies must be >= 1");
  constexpr double kPi = 3.14159265358979323846;
  const std::size_t n = unit_coords.size();
  Tensor out({n, channels});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    for (int k = 0; k < frequencies && j < channels; ++k) {
      const double f = std::ldexp(kPi, k);  // 2^k * pi
      for (int a = 0; a < 3 && j < channels; ++a) {
        const double phase = f * unit_coords[i][a];
        out[i * channels + j] = std::sin(phase);
        if (++j >= channels) break;
        out[i * channels + j] = std::cos(phase);
        ++j;
      }
    }
    // remaining channels stay zero
  }
  out.check_finite("pos_embedding");
  return out;
}

}  // namespace sfkit
