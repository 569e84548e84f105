#pragma once

#include <span>
#include <string>
#include <vector>

#include "bevcv/imaging.hpp"
#include "bevcv/tensor.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

// Channel widths and strides of the forward graphs. Defaults give the
// reference shapes: five pyramid levels, a (64,100,100) BEV grid compressed
// to (512,7,7), and a (2048,7,7) aerial latent for 224x224 inputs.
struct NetConfig {
  int input_size = 224;
  int backbone_channels = 32;
  int pyramid_levels = 5;
  int fpn_channels = 64;
  std::vector<int> psi_channels{128, 256, 512};
  std::vector<int> psi_strides{4, 2, 2};
  std::vector<int> unet_channels{16, 24, 32, 64, 128, 2048};  // e_0 .. e_n
  std::vector<int> unet_decoder_channels{64, 32, 16, 16, 8};  // deconv outs
  int embedding_dim = 512;

  int unet_depth() const { return static_cast<int>(unet_channels.size()) - 1; }
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

inline constexpr float kLeakySlope = 0.01f;

// (3, H, W) tensor with samples scaled to [0, 1].
Tensor image_to_tensor(const ImageRaster& img);

// conv (pad k/2) + bias from `<prefix>.weight` / `<prefix>.bias`.
Tensor conv_layer(const Tensor& x, const LayerWeights& w,
                  const std::string& prefix, int stride);

// Fixed conv stack standing in for a ResNet: a stride-2 stem plus 2x2 max
// pool (stride 4), then stride-2 stages. Returns the level outputs ordered
// coarse to fine; for a 224x224 input the extents are 4,7,14,28,56.
std::vector<Tensor> toy_backbone_forward(const Tensor& img,
                                         const LayerWeights& w);

// Top-down pyramid merge. f_0 = lateral_0(R_0); f_i = fuse_i(lateral_i(R_i)
// (+) up(f_{i-1})), where (+) is channel concatenation, up is nearest 2x
// upsampling cropped to the lateral extent, and fuse_i is a 1x1 conv.
FeaturePyramid fpn_merge(std::span<const Tensor> backbone_coarse_to_fine,
                         const LayerWeights& w);

// Conv-BatchNorm-LeakyReLU stages with the given strides.
Tensor psi_compress(const Tensor& bev, const LayerWeights& w,
                    std::span<const int> strides);

// Encoder maps e_0 .. e_depth; e_0 keeps the input resolution and every
// later stage halves it.
std::vector<Tensor> unet_encode(const Tensor& img, const LayerWeights& w,
                                int depth);

struct UnetOutput {
  std::vector<Tensor> encoder;
  Tensor decoded;
};

// Full encoder/decoder: d_0 = e_n, d_i = e_{n-i} (+) deconv_i(d_{i-1}).
// The decoded map d_n is back at input resolution.
UnetOutput unet_forward(const Tensor& img, const LayerWeights& w, int depth);

}  // namespace bevcv
