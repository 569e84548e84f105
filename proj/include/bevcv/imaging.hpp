#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bevcv {

// Row-major interleaved 8-bit raster.
struct ImageRaster {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  ImageRaster() = default;
  ImageRaster(int w, int h, int c = 3);
  ImageRaster(int w, int h, int c, std::vector<std::uint8_t> bytes);

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const ImageRaster&) const = default;
};

// Horizontal field of view and heading of a panorama crop, in degrees.
// Yaw 0 looks at the panorama's centre column; positive yaw turns the view
// towards increasing column index (clockwise when the panorama runs
// west-to-east). Any finite yaw is accepted and reduced modulo 360.
struct CropSpec {
  double fov_deg = 70.0;
  double yaw_deg = 0.0;

  void validate() const;
  bool operator==(const CropSpec&) const = default;
};

// Decodes an 8-bit PNG (gray, RGB, RGBA or palette; alpha is dropped) or a
// binary PPM (P6, maxval 255) into an RGB raster.
ImageRaster load_image(const std::filesystem::path& path);
ImageRaster decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ppm(const ImageRaster& img);
void write_ppm(const std::filesystem::path& path, const ImageRaster& img);

// Width of a crop of a `pano_width`-wide panorama: round(W * fov / 360),
// never less than one column.
int crop_width(int pano_width, double fov_deg);

// Column-exact crop of a 360 degree panorama centred on the crop's yaw.
// The window wraps around the panorama seam.
ImageRaster fov_crop(const ImageRaster& pano, const CropSpec& crop);

// Bilinear resize with half-pixel-centred sampling and edge clamping.
ImageRaster resize_bilinear(const ImageRaster& img, int out_w, int out_h);

}  // namespace bevcv
