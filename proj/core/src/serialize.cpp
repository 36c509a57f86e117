#include "sfkit/serialize.hpp"

#include <algorithm>
#include <cmath>

namespace sfkit {

std::vector<Cell3> quantize_to_cells(const std::vector<Vec3>& coords, const GridSpec& grid) {
  const auto dims = grid.dims();
  std::vector<Cell3> cells(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      std::int64_t c = static_cast<std::int64_t>(
          std::floor((coords[i][a] - grid.range_min[a]) / grid.voxel_size[a]));
      c = std::clamp<std::int64_t>(c, 0, dims[a] - 1);
      cells[i][a] = c;
    }
  }
  return cells;
}

int curve_bits_for_grid(const GridSpec& grid) {
  const auto dims = grid.dims();
  const std::int64_t max_extent = std::max({dims[0], dims[1], dims[2]});
  return bits_for_extent(static_cast<std::uint64_t>(max_extent));
}

SortResult sort_cells(const std::vector<Cell3>& cells, const CurveOrder& order) {
  const std::int64_t side = std::int64_t{1} << order.bits;
  SortResult out;
  out.cells = cells;
  out.index.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell3& c = cells[i];
    if (c[0] < 0 || c[1] < 0 || c[2] < 0 || c[0] >= side || c[1] >= side || c[2] >= side) {
      throw InputError("cell outside curve grid after quantization");
    }
    out.index[i] = curve_index(order, static_cast<std::uint32_t>(c[0]),
                               static_cast<std::uint32_t>(c[1]),
                               static_cast<std::uint32_t>(c[2]));
  }
  out.perm.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) out.perm[i] = i;
  std::stable_sort(out.perm.begin(), out.perm.end(),
                   [&](std::size_t a, std::size_t b) { return out.index[a] < out.index[b]; });
  return out;
}

SortResult sort_tokens(const TokenSequence& tokens, const CurveOrder& order,
                       const GridSpec& grid) {
  tokens.validate();
  return sort_cells(quantize_to_cells(tokens.coords, grid), order);
}

RegionAssignment region_partition(const std::vector<Cell3>& cells, int window,
                                  std::int64_t y_extent) {
  if (window < 1) throw InputError("region window must be >= 1");
  if (y_extent < 1) throw InputError("region y extent must be >= 1");
  RegionAssignment out;
  out.window = window;
  out.row_stride = static_cast<std::size_t>((y_extent + window - 1) / window);
  out.region.resize(cells.size());
  out.in_region.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::int64_t x = cells[i][0], y = cells[i][1];
    if (x < 0 || y < 0) throw InputError("region_partition: negative coordinates");
    out.region[i] = static_cast<std::size_t>(x / window) * out.row_stride +
                    static_cast<std::size_t>(y / window);
    out.in_region[i] = {x % window, y % window};
  }
  return out;
}

}  // namespace sfkit
