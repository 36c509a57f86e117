#pragma once

#include <cstdint>
#include <vector>

#include "sfkit/grid.hpp"
#include "sfkit/tensor.hpp"

namespace sfkit {

enum class Modality : std::uint8_t { Lidar = 0, Camera = 1 };

/// Ordered set of feature vectors with spatial coordinates (meters or grid
/// cells, depending on the stage) and a modality tag per token.
struct TokenSequence {
  Tensor features;                 // N x C
  std::vector<Vec3> coords;        // N
  std::vector<Modality> modality;  // N

  std::size_t size() const { return coords.size(); }
  std::size_t channels() const { return features.rank() == 2 ? features.extent(1) : 0; }

  void validate() const;

  /// Tokens of one modality, preserving relative order.
  TokenSequence filter(Modality keep) const;

  static TokenSequence concat(const TokenSequence& a, const TokenSequence& b);
};

/// gathered[r] = source[perm[r]]
std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);
Tensor gather_rows(const Tensor& features, const std::vector<std::size_t>& perm);

}  // namespace sfkit
