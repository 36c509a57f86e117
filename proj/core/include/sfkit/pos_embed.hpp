#pragma once

#include <vector>

#include "sfkit/grid.hpp"
#include "sfkit/tensor.hpp"

namespace sfkit {

/// Coordinates mapped into [0,1]^3 by the given range; degenerate axes
/// (hi == lo) map to 0.
std::vector<Vec3> normalize_coords(const std::vector<Vec3>& coords, const Vec3& lo,
                                   const Vec3& hi);

/// Deterministic sinusoidal embedding of unit-cube coordinates. Frequency k
/// contributes one (sin, cos) pair per axis at f_k = 2^k * pi, axes
/// interleaved: (sin x, cos x, sin y, cos y, sin z, cos z) per frequency,
/// truncated to `channels` or zero-padded when 6*frequencies < channels.
Tensor pos_embedding(const std::vector<Vec3>& unit_coords, std::size_t channels,
                     int frequencies);

}  // namespace sfkit
