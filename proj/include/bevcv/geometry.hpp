#pragma once

#include <span>
#include <vector>

#include "bevcv/tensor.hpp"

namespace bevcv {

// Pinhole intrinsics of the (resized) perspective image.
struct CameraIntrinsics {
  double focal_px = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int image_w = 0;
  int image_h = 0;

  void validate() const;
  // Half the horizontal field of view covered by pixel centres 0..W-1 when
  // the principal point is centred.
  double half_fov() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// Metric birds-eye-view grid in front of the camera. Row r samples forward
// depth z = z_min + r * resolution; column c samples lateral offset
// x = (c - cells_x / 2) * resolution (positive to the right).
struct BevGridSpec {
  int cells_x = 100;
  int cells_z = 100;
  double resolution_m = 0.5;
  double z_min_m = 1.0;
  int channels = 64;

  void validate() const;
  double z_max_m() const { return z_min_m + cells_z * resolution_m; }
  double x_of(int col) const { return (col - cells_x / 2.0) * resolution_m; }
  double z_of(int row) const { return z_min_m + row * resolution_m; }

  bool operator==(const BevGridSpec&) const = default;
};

// Rows [row_begin, row_end) of the BEV grid, i.e. depths [z_lo, z_hi).
struct DepthInterval {
  int row_begin = 0;
  int row_end = 0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  // Depth at which one feature column of this level spans one BEV cell,
  // focal * resolution / stride. Informational only.
  double matched_depth_m = 0.0;

  int rows() const { return row_end - row_begin; }
};

// One interval per pyramid level. Level 0 is the coarsest and covers the
// farthest depths; each finer level covers a band half as deep, except that
// the two finest levels share the nearest unit band and the coarsest absorbs
// whatever rows the halving leaves over.
struct DepthPartition {
  std::vector<DepthInterval> levels;

  // Level owning a grid row, or -1 if outside the grid.
  int level_of_row(int row) const;
};

struct LevelDims {
  std::size_t height = 0;
  std::size_t width = 0;

  bool operator==(const LevelDims&) const = default;
};

struct ResampleEntry {
  int level = -1;
  double column = 0.0;     // fractional column in the level's feature map
  double depth_bin = 0.0;  // fractional bin in the level's depth band
  bool valid = false;

  bool operator==(const ResampleEntry&) const = default;
};

// Per-BEV-cell source coordinates, row-major over (row, col).
struct ResampleMap {
  BevGridSpec grid;
  std::vector<LevelDims> pyramid_dims;
  std::vector<int> depth_bins;  // D_i per level
  std::vector<ResampleEntry> entries;

  const ResampleEntry& at(int row, int col) const {
    return entries[static_cast<std::size_t>(row) * grid.cells_x + col];
  }
};

// atan((u - cx) / focal).
double column_to_azimuth(const CameraIntrinsics& intr, double u);

// Stride (in input pixels) of pyramid level `level` of an n-level pyramid
// whose finest level has stride 4: 2^(n - level + 1).
int pyramid_stride(int n_levels, int level);

DepthPartition build_depth_partition(const CameraIntrinsics& intr,
                                     const BevGridSpec& grid, int n_levels);

// A cell (x, z) is valid iff its row belongs to a level, z > 0, and its ray
// projects inside the image (u = cx + f x / z within [0, image_w - 1]), i.e.
// its azimuth lies between those of the first and last pixel columns. The
// level column is u rescaled to the level width; the depth bin is the row
// offset inside the level's band.
ResampleMap build_resample_map(const CameraIntrinsics& intr,
                               const BevGridSpec& grid,
                               const DepthPartition& part,
                               std::span<const LevelDims> pyramid_dims);

// Expected shape of the vertical-collapse weights of one level:
// (grid.channels, depth_bins, in_channels, level_height).
Dims collapse_dims(const ResampleMap& map, std::size_t level,
                   std::size_t in_channels);

// Multi-scale dense transform: each level's image columns are collapsed
// vertically into depth-binned BEV channels by the level's collapse weights,
// then every valid BEV cell samples its level bilinearly in
// (depth bin, column) space. Output is (channels, cells_z, cells_x); invalid
// cells are exactly zero.
Tensor msd_transform(const FeaturePyramid& pyramid, const ResampleMap& map,
                     std::span<const Tensor> collapse);

}  // namespace bevcv
