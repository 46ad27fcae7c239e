#include "mecvr/tiling.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <string>

namespace mecvr {

TileGrid::TileGrid(int n_rows, int n_cols, int fov_rows, int fov_cols, int delta_h,
                   int delta_v, std::uint64_t total_bits)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      fov_rows_(fov_rows),
      fov_cols_(fov_cols),
      delta_h_(delta_h),
      delta_v_(delta_v),
      total_bits_(total_bits) {
  if (n_rows < 1 || n_cols < 1 || fov_rows < 1 || fov_cols < 1)
    throw std::invalid_argument("TileGrid: dimensions must be positive");
  if (fov_rows > n_rows || fov_cols > n_cols)
    throw std::invalid_argument("TileGrid: FoV larger than the grid");
  if (delta_h < 1 || delta_v < 1)
    throw std::invalid_argument("TileGrid: strides must be >= 1");
  if ((n_cols - fov_cols) % delta_h != 0)
    throw std::invalid_argument("TileGrid: (n_cols - fov_cols) not divisible by delta_h");
  if ((n_rows - fov_rows) % delta_v != 0)
    throw std::invalid_argument("TileGrid: (n_rows - fov_rows) not divisible by delta_v");
  if (total_bits == 0 || total_bits % static_cast<std::uint64_t>(n_rows * n_cols) != 0)
    throw std::invalid_argument("TileGrid: total_bits must be a positive multiple of the tile count");
}

int TileGrid::viewpoint_count() const {
  return ((n_cols_ - fov_cols_) / delta_h_ + 1) * ((n_rows_ - fov_rows_) / delta_v_ + 1);
}

void TileGrid::check_viewpoint(int k) const {
  if (k < 1 || k > viewpoint_count())
    throw std::domain_error("viewpoint index " + std::to_string(k) + " outside [1, " +
                            std::to_string(viewpoint_count()) + "]");
}

std::pair<int, int> TileGrid::anchor(int k) const {
  check_viewpoint(k);
  const int per_row = (n_cols_ - fov_cols_) / delta_h_ + 1;
  const int idx = k - 1;
  return {(idx / per_row) * delta_v_, (idx % per_row) * delta_h_};
}

TileSet TileGrid::fov_tiles(int k) const {
  const auto [row0, col0] = anchor(k);
  TileSet tiles;
  tiles.reserve(static_cast<std::size_t>(fov_size()));
  for (int r = row0; r < row0 + fov_rows_; ++r)
    for (int c = col0; c < col0 + fov_cols_; ++c) tiles.push_back(r * n_cols_ + c + 1);
  return tiles;  // row-major traversal is already sorted
}

TileSet TileGrid::overlap(int k1, int k2) const {
  const TileSet a = fov_tiles(k1);
  const TileSet b = fov_tiles(k2);
  TileSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

TileGrid default_grid() { return TileGrid(5, 7, 2, 2, 1, 1, 5'250'000'000ULL); }

bool contains(const TileSet& set, TileId id) {
  return std::binary_search(set.begin(), set.end(), id);
}

}  // namespace mecvr
