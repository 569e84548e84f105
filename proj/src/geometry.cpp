#include "bevcv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bevcv/error.hpp"

namespace bevcv {

void CameraIntrinsics::validate() const {
  if (!(focal_px > 0.0)) throw ValidationError("focal_px", "must be > 0");
  if (image_w < 1) throw ValidationError("image_w", "must be >= 1");
  if (image_h < 1) throw ValidationError("image_h", "must be >= 1");
  if (!(cx >= 0.0 && cx < image_w)) {
    throw ValidationError("cx", "must lie in [0, image_w)");
  }
  if (!(cy >= 0.0 && cy < image_h)) {
    throw ValidationError("cy", "must lie in [0, image_h)");
  }
}

double CameraIntrinsics::half_fov() const {
  return std::atan((image_w - 1) / (2.0 * focal_px));
}

void BevGridSpec::validate() const {
  if (cells_x < 1) throw ValidationError("cells_x", "must be >= 1");
  if (cells_z < 1) throw ValidationError("cells_z", "must be >= 1");
  if (!(resolution_m > 0.0)) {
    throw ValidationError("resolution_m", "must be > 0");
  }
  if (!(z_min_m >= 0.0)) throw ValidationError("z_min_m", "must be >= 0");
  if (channels < 1) throw ValidationError("channels", "must be >= 1");
}

int DepthPartition::level_of_row(int row) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (row >= levels[i].row_begin && row < levels[i].row_end) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

double column_to_azimuth(const CameraIntrinsics& intr, double u) {
  return std::atan((u - intr.cx) / intr.focal_px);
}

int pyramid_stride(int n_levels, int level) {
  return 1 << (n_levels - level + 1);
}

DepthPartition build_depth_partition(const CameraIntrinsics& intr,
                                     const BevGridSpec& grid, int n_levels) {
  intr.validate();
  grid.validate();
  if (n_levels < 1 || n_levels > 16) {
    throw InvalidPartition("level count must lie in 1..16, got " +
                           std::to_string(n_levels));
  }
  const int unit = grid.cells_z >> (n_levels - 1);
  if (unit < 1) {
    throw InvalidPartition(std::to_string(grid.cells_z) +
                           " depth rows cannot be split across " +
                           std::to_string(n_levels) + " levels");
  }

  // Near-to-far band widths: unit, unit, 2unit, 4unit, ... with the
  // farthest (coarsest) band taking the remainder.
  std::vector<int> rows(n_levels);
  int used = 0;
  for (int i = n_levels - 1; i >= 1; --i) {
    const int k = n_levels - 1 - i;  // 0 for the finest level
    rows[i] = k == 0 ? unit : unit << (k - 1);
    used += rows[i];
  }
  rows[0] = grid.cells_z - used;

  DepthPartition part;
  part.levels.resize(n_levels);
  int row = 0;
  for (int i = n_levels - 1; i >= 0; --i) {
    DepthInterval& iv = part.levels[i];
    iv.row_begin = row;
    iv.row_end = row + rows[i];
    iv.z_lo = grid.z_of(iv.row_begin);
    iv.z_hi = grid.z_of(iv.row_end);
    iv.matched_depth_m =
        intr.focal_px * grid.resolution_m / pyramid_stride(n_levels, i);
    row = iv.row_end;
  }
  return part;
}

ResampleMap build_resample_map(const CameraIntrinsics& intr,
                               const BevGridSpec& grid,
                               const DepthPartition& part,
                               std::span<const LevelDims> pyramid_dims) {
  intr.validate();
  grid.validate();
  const std::size_t n = part.levels.size();
  if (pyramid_dims.size() != n) {
    throw ShapeMismatch("resample map: " + std::to_string(pyramid_dims.size()) +
                        " pyramid levels for a " + std::to_string(n) +
                        "-level depth partition");
  }
  for (const auto& d : pyramid_dims) {
    if (d.height == 0 || d.width == 0) {
      throw ShapeMismatch("resample map: empty pyramid level");
    }
  }
  if (n == 0 || part.levels.front().row_end != grid.cells_z ||
      part.levels.back().row_begin != 0) {
    throw ShapeMismatch("resample map: partition does not cover the grid");
  }

  ResampleMap map;
  map.grid = grid;
  map.pyramid_dims.assign(pyramid_dims.begin(), pyramid_dims.end());
  for (const auto& iv : part.levels) map.depth_bins.push_back(iv.rows());
  map.entries.resize(static_cast<std::size_t>(grid.cells_x) * grid.cells_z);

  // Pinhole projection: the ray through (x, z) meets the image at column
  // u = cx + f x / z. A cell is inside the frustum iff u lands on the pixel
  // centres 0 .. image_w - 1; level columns rescale that range linearly.
  const double last_u = intr.image_w - 1.0;
  for (int row = 0; row < grid.cells_z; ++row) {
    const int level = part.level_of_row(row);
    const double z = grid.z_of(row);
    if (level < 0 || z <= 0.0) continue;
    const DepthInterval& iv = part.levels[level];
    const double width = static_cast<double>(pyramid_dims[level].width);
    const double scale = last_u > 0.0 ? (width - 1.0) / last_u : 0.0;
    const double depth_bin = (z - iv.z_lo) / grid.resolution_m;
    for (int col = 0; col < grid.cells_x; ++col) {
      const double u = intr.cx + intr.focal_px * grid.x_of(col) / z;
      if (!(u >= 0.0 && u <= last_u)) continue;
      ResampleEntry& e =
          map.entries[static_cast<std::size_t>(row) * grid.cells_x + col];
      e.level = level;
      e.column = std::clamp(u * scale, 0.0, width - 1.0);
      e.depth_bin = std::clamp(depth_bin, 0.0, iv.rows() - 1.0);
      e.valid = true;
    }
  }
  return map;
}

Dims collapse_dims(const ResampleMap& map, std::size_t level,
                   std::size_t in_channels) {
  return {static_cast<std::size_t>(map.grid.channels),
          static_cast<std::size_t>(map.depth_bins.at(level)), in_channels,
          map.pyramid_dims.at(level).height};
}

Tensor msd_transform(const FeaturePyramid& pyramid, const ResampleMap& map,
                     std::span<const Tensor> collapse) {
  const std::size_t n = map.pyramid_dims.size();
  if (pyramid.levels.size() != n || collapse.size() != n) {
    throw ShapeMismatch("msd: " + std::to_string(pyramid.levels.size()) +
                        " pyramid levels and " +
                        std::to_string(collapse.size()) +
                        " collapse tensors for a " + std::to_string(n) +
                        "-level map");
  }
  const std::size_t C = map.grid.channels;

  // polar[i] is (C, D_i, W_i): depth-binned BEV features along each column.
  std::vector<std::vector<double>> polar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& f = pyramid.levels[i];
    expect_rank(f, 3, "msd pyramid level " + std::to_string(i));
    const std::size_t Cin = f.dim(0), H = f.dim(1), W = f.dim(2);
    if (H != map.pyramid_dims[i].height || W != map.pyramid_dims[i].width) {
      throw ShapeMismatch("msd: pyramid level " + std::to_string(i) + " is " +
                          dims_to_string(f.dims()) + " but the map expects " +
                          std::to_string(map.pyramid_dims[i].height) + "x" +
                          std::to_string(map.pyramid_dims[i].width));
    }
    expect_dims(collapse[i], collapse_dims(map, i, Cin),
                "msd collapse weights, level " + std::to_string(i));
    const std::size_t D = map.depth_bins[i];
    const std::size_t K = Cin * H;
    // Columns as contiguous vectors: cols[w * K + (c*H + h)].
    std::vector<double> cols(W * K);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < W; ++w) cols[w * K + k] = f[k * W + w];
    }
    auto& p = polar[i];
    p.assign(C * D * W, 0.0);
    const float* kd = collapse[i].data();
    for (std::size_t cd = 0; cd < C * D; ++cd) {
      const float* krow = kd + cd * K;
      for (std::size_t w = 0; w < W; ++w) {
        const double* col = cols.data() + w * K;
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += krow[k] * col[k];
        p[cd * W + w] = acc;
      }
    }
  }

  const int X = map.grid.cells_x, Z = map.grid.cells_z;
  Tensor out({C, static_cast<std::size_t>(Z), static_cast<std::size_t>(X)});
  for (int row = 0; row < Z; ++row) {
    for (int col = 0; col < X; ++col) {
      const ResampleEntry& e = map.at(row, col);
      if (!e.valid) continue;
      const std::size_t D = map.depth_bins[e.level];
      const std::size_t W = map.pyramid_dims[e.level].width;
      const auto d0 = static_cast<std::size_t>(std::floor(e.depth_bin));
      const auto u0 = static_cast<std::size_t>(std::floor(e.column));
      const std::size_t d1 = std::min(d0 + 1, D - 1);
      const std::size_t u1 = std::min(u0 + 1, W - 1);
      const double td = e.depth_bin - d0, tu = e.column - u0;
      const auto& p = polar[e.level];
      for (std::size_t c = 0; c < C; ++c) {
        const double* base = p.data() + c * D * W;
        const double v = (1 - td) * ((1 - tu) * base[d0 * W + u0] +
                                     tu * base[d0 * W + u1]) +
                         td * ((1 - tu) * base[d1 * W + u0] +
                               tu * base[d1 * W + u1]);
        out.at(c, row, col) = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace bevcv
