#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mecvr {

/// Tile id in [1, N], numbered row-major over the 2D tile plane.
using TileId = int;
/// Sorted, duplicate-free set of tile ids.
using TileSet = std::vector<TileId>;

/// Geometry of the unfolded 2D video: the tile grid, the FoV rectangle
/// and the stride between adjacent viewpoints.
///
/// Viewpoints are numbered 1..K row-major over their anchor (the FoV's
/// top-left tile). Construction rejects grids whose strides do not tile
/// evenly or whose total size is not an exact multiple of the tile count.
class TileGrid {
public:
  TileGrid(int n_rows, int n_cols, int fov_rows, int fov_cols, int delta_h,
           int delta_v, std::uint64_t total_bits);

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  int fov_rows() const { return fov_rows_; }
  int fov_cols() const { return fov_cols_; }
  int delta_h() const { return delta_h_; }
  int delta_v() const { return delta_v_; }
  std::uint64_t total_bits() const { return total_bits_; }

  int tile_count() const { return n_rows_ * n_cols_; }
  int fov_size() const { return fov_rows_ * fov_cols_; }
  std::uint64_t tile_bits() const { return total_bits_ / tile_count(); }

  int viewpoint_count() const;
  /// (row, col) of the FoV's top-left tile, both 0-based.
  std::pair<int, int> anchor(int k) const;
  TileSet fov_tiles(int k) const;
  TileSet overlap(int k1, int k2) const;

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

private:
  void check_viewpoint(int k) const;

  int n_rows_;
  int n_cols_;
  int fov_rows_;
  int fov_cols_;
  int delta_h_;
  int delta_v_;
  std::uint64_t total_bits_;
};

/// 7 x 5 tiles, 2 x 2 FoV, unit strides, Q = 5.25 Gbit (K = 24, tau = 150 Mbit).
TileGrid default_grid();

inline int viewpoint_count(const TileGrid& grid) { return grid.viewpoint_count(); }
inline TileSet fov_tiles(const TileGrid& grid, int k) { return grid.fov_tiles(k); }
inline TileSet overlap(const TileGrid& grid, int k1, int k2) { return grid.overlap(k1, k2); }

bool contains(const TileSet& set, TileId id);

}  // namespace mecvr
