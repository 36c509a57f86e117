#include "sfkit/curves.hpp"

#include <cmath>

namespace sfkit {

namespace {

constexpr int kAxes = 3;

void check_order(int bits) {
  if (bits < 1 || bits > 21) {
    throw InputError("curve order must be in [1,21], got " + std::to_string(bits));
  }
}

void check_coords(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  const std::uint64_t side = std::uint64_t{1} << bits;
  if (x >= side || y >= side || z >= side) {
    throw InputError("coordinate (" + std::to_string(x) + "," + std::to_string(y) + "," +
                     std::to_string(z) + ") outside 2^" + std::to_string(bits) + " grid");
  }
}

void check_index(std::uint64_t index, int bits) {
  const std::uint64_t count = std::uint64_t{1} << (3 * bits);
  if (index >= count) {
    throw InputError("curve index " + std::to_string(index) + " out of range for order " +
                     std::to_string(bits));
  }
}

// Skilling's AxesToTranspose: in place, X[] becomes the transposed Hilbert
// index (bit k of X[i] is index bit 3k + (2-i)).
void axes_to_transpose(std::uint32_t X[kAxes], int bits) {
  std::uint32_t M = std::uint32_t{1} << (bits - 1), P, Q, t;
  for (Q = M; Q > 1; Q >>= 1) {
    P = Q - 1;
    for (int i = 0; i < kAxes; ++i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
  for (int i = 1; i < kAxes; ++i) X[i] ^= X[i - 1];
  t = 0;
  for (Q = M; Q > 1; Q >>= 1) {
    if (X[kAxes - 1] & Q) t ^= Q - 1;
  }
  for (int i = 0; i < kAxes; ++i) X[i] ^= t;
}

void transpose_to_axes(std::uint32_t X[kAxes], int bits) {
  std::uint32_t N = std::uint32_t{2} << (bits - 1), P, Q, t;
  t = X[kAxes - 1] >> 1;
  for (int i = kAxes - 1; i > 0; --i) X[i] ^= X[i - 1];
  X[0] ^= t;
  for (Q = 2; Q != N; Q <<= 1) {
    P = Q - 1;
    for (int i = kAxes - 1; i >= 0; --i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
}

std::uint64_t pack_transpose(const std::uint32_t X[kAxes], int bits) {
  std::uint64_t index = 0;
  for (int k = 0; k < bits; ++k) {
    for (int i = 0; i < kAxes; ++i) {
      const std::uint64_t bit = (X[i] >> k) & 1u;
      index |= bit << (3 * k + (2 - i));
    }
  }
  return index;
}

void unpack_transpose(std::uint64_t index, int bits, std::uint32_t X[kAxes]) {
  X[0] = X[1] = X[2] = 0;
  for (int k = 0; k < bits; ++k) {
    for (int i = 0; i < kAxes; ++i) {
      const std::uint32_t bit = static_cast<std::uint32_t>((index >> (3 * k + (2 - i))) & 1u);
      X[i] |= bit << k;
    }
  }
}

}  // namespace

const char* paradigm_name(CurveParadigm p) {
  switch (p) {
    case CurveParadigm::Hilbert: return "hilbert";
    case CurveParadigm::ZOrder: return "zorder";
    case CurveParadigm::Coordinate: return "coord";
  }
  return "?";
}

CurveParadigm paradigm_from_name(const std::string& name) {
  if (name == "hilbert") return CurveParadigm::Hilbert;
  if (name == "zorder") return CurveParadigm::ZOrder;
  if (name == "coord" || name == "coordinate") return CurveParadigm::Coordinate;
  throw InputError("unknown curve paradigm '" + name + "' (expected hilbert|zorder|coord)");
}

CurveOrder::CurveOrder(CurveParadigm p, int b) : paradigm(p), bits(b) { check_order(b); }

int bits_for_extent(std::uint64_t max_extent) {
  int b = 1;
  while ((std::uint64_t{1} << b) < max_extent) {
    ++b;
    if (b > 21) throw InputError("grid extent too large for 21-bit curve order");
  }
  return b;
}

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  check_order(bits);
  check_coords(x, y, z, bits);
  std::uint32_t X[kAxes] = {x, y, z};
  axes_to_transpose(X, bits);
  return pack_transpose(X, bits);
}

std::array<std::uint32_t, 3> hilbert_inverse(std::uint64_t index, int bits) {
  check_order(bits);
  check_index(index, bits);
  std::uint32_t X[kAxes];
  unpack_transpose(index, bits, X);
  transpose_to_axes(X, bits);
  return {X[0], X[1], X[2]};
}

std::uint64_t morton_index(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  check_order(bits);
  check_coords(x, y, z, bits);
  std::uint64_t index = 0;
  for (int k = 0; k < bits; ++k) {
    index |= ((std::uint64_t{x} >> k) & 1u) << (3 * k);
    index |= ((std::uint64_t{y} >> k) & 1u) << (3 * k + 1);
    index |= ((std::uint64_t{z} >> k) & 1u) << (3 * k + 2);
  }
  return index;
}

std::array<std::uint32_t, 3> morton_inverse(std::uint64_t index, int bits) {
  check_order(bits);
  check_index(index, bits);
  std::uint32_t x = 0, y = 0, z = 0;
  for (int k = 0; k < bits; ++k) {
    x |= static_cast<std::uint32_t>((index >> (3 * k)) & 1u) << k;
    y |= static_cast<std::uint32_t>((index >> (3 * k + 1)) & 1u) << k;
    z |= static_cast<std::uint32_t>((index >> (3 * k + 2)) & 1u) << k;
  }
  return {x, y, z};
}

std::uint64_t coordinate_index(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  check_order(bits);
  check_coords(x, y, z, bits);
  return ((std::uint64_t{x} << bits) | std::uint64_t{y}) << bits | std::uint64_t{z};
}

std::array<std::uint32_t, 3> coordinate_inverse(std::uint64_t index, int bits) {
  check_order(bits);
  check_index(index, bits);
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  return {static_cast<std::uint32_t>((index >> (2 * bits)) & mask),
          static_cast<std::uint32_t>((index >> bits) & mask),
          static_cast<std::uint32_t>(index & mask)};
}

std::uint64_t curve_index(const CurveOrder& order, std::uint32_t x, std::uint32_t y,
                          std::uint32_t z) {
  switch (order.paradigm) {
    case CurveParadigm::Hilbert: return hilbert_index(x, y, z, order.bits);
    case CurveParadigm::ZOrder: return morton_index(x, y, z, order.bits);
    case CurveParadigm::Coordinate: return coordinate_index(x, y, z, order.bits);
  }
  throw InputError("bad paradigm");
}

std::array<std::uint32_t, 3> curve_inverse(const CurveOrder& order, std::uint64_t index) {
  switch (order.paradigm) {
    case CurveParadigm::Hilbert: return hilbert_inverse(index, order.bits);
    case CurveParadigm::ZOrder: return morton_inverse(index, order.bits);
    case CurveParadigm::Coordinate: return coordinate_inverse(index, order.bits);
  }
  throw InputError("bad paradigm");
}

double mean_adjacent_index_distance(const CurveOrder& order) {
  const std::uint32_t side = std::uint32_t{1} << order.bits;
  double sum = 0.0;
  std::uint64_t pairs = 0;
  for (std::uint32_t x = 0; x < side; ++x) {
    for (std::uint32_t y = 0; y < side; ++y) {
      for (std::uint32_t z = 0; z < side; ++z) {
        const std::uint64_t here = curve_index(order, x, y, z);
        if (x + 1 < side) {
          const std::uint64_t there = curve_index(order, x + 1, y, z);
          sum += std::abs(static_cast<double>(here) - static_cast<double>(there));
          ++pairs;
        }
        if (y + 1 < side) {
          const std::uint64_t there = curve_index(order, x, y + 1, z);
          sum += std::abs(static_cast<double>(here) - static_cast<double>(there));
          ++pairs;
        }
        if (z + 1 < side) {
          const std::uint64_t there = curve_index(order, x, y, z + 1);
          sum += std::abs(static_cast<double>(here) - static_cast<double>(there));
          ++pairs;
        }
      }
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

double mean_curve_step_distance(const CurveOrder& order) {
  const std::uint64_t count = std::uint64_t{1} << (3 * order.bits);
  double sum = 0.0;
  auto prev = curve_inverse(order, 0);
  for (std::uint64_t i = 1; i < count; ++i) {
    const auto cur = curve_inverse(order, i);
    for (int a = 0; a < 3; ++a) {
      sum += std::abs(static_cast<double>(cur[a]) - static_cast<double>(prev[a]));
    }
    prev = cur;
  }
  return count < 2 ? 0.0 : sum / static_cast<double>(count - 1);
}

}  // namespace sfkit
