#pragma once

#include <cstdint>
#include <vector>

#include "sfkit/curves.hpp"
#include "sfkit/grid.hpp"
#include "sfkit/token.hpp"

namespace sfkit {

/// Quantizes continuous coordinates to curve cells:
/// floor((c - range_min) / voxel_size), clamped to the grid dims.
std::vector<Cell3> quantize_to_cells(const std::vector<Vec3>& coords, const GridSpec& grid);

/// Smallest curve order whose cube covers the grid.
int curve_bits_for_grid(const GridSpec& grid);

struct SortResult {
  std::vector<std::size_t> perm;      // sorted[r] = original[perm[r]]
  std::vector<std::uint64_t> index;   // curve index per original token
  std::vector<Cell3> cells;           // quantized cell per original token
};

/// Stable sort of cells by curve index; equal indices keep input order.
/// Cells must lie inside the curve cube.
SortResult sort_cells(const std::vector<Cell3>& cells, const CurveOrder& order);

/// Quantize-then-sort for token sequences carrying continuous coordinates.
SortResult sort_tokens(const TokenSequence& tokens, const CurveOrder& order,
                       const GridSpec& grid);

/// Block partition of the x-y plane into w x w regions:
///   r = floor(x/w) * row_stride + floor(y/w),  row_stride = ceil(Y_extent/w)
/// with in-region positions (x mod w, y mod w).
struct RegionAssignment {
  int window = 1;
  std::size_t row_stride = 1;
  std::vector<std::size_t> region;                      // r_i per token
  std::vector<std::array<std::int64_t, 2>> in_region;   // (x', y') per token
};

RegionAssignment region_partition(const std::vector<Cell3>& cells, int window,
                                  std::int64_t y_extent);

}  // namespace sfkit
