#include "bevcv/net.hpp"

#include "bevcv/error.hpp"
#include "bevcv/layers.hpp"

namespace bevcv {

void NetConfig::validate() const {
  if (input_size < 8) throw ValidationError("input_size", "must be >= 8");
  if (backbone_channels < 1) {
    throw ValidationError("backbone_channels", "must be >= 1");
  }
  if (pyramid_levels < 1 || pyramid_levels > 8) {
    throw ValidationError("pyramid_levels", "must lie in 1..8");
  }
  if (fpn_channels < 1) throw ValidationError("fpn_channels", "must be >= 1");
  if (psi_channels.empty() || psi_channels.size() != psi_strides.size()) {
    throw ValidationError("psi_strides", "needs one stride per psi stage");
  }
  for (int v : psi_channels) {
    if (v < 1) throw ValidationError("psi_channels", "must be >= 1");
  }
  for (int v : psi_strides) {
    if (v < 1) throw ValidationError("psi_strides", "must be >= 1");
  }
  if (unet_channels.size() < 2) {
    throw ValidationError("unet_channels", "needs at least two stages");
  }
  for (int v : unet_channels) {
    if (v < 1) throw ValidationError("unet_channels", "must be >= 1");
  }
  if (static_cast<int>(unet_decoder_channels.size()) != unet_depth()) {
    throw ValidationError("unet_decoder_channels",
                          "needs one entry per encoder downsampling stage");
  }
  for (int v : unet_decoder_channels) {
    if (v < 1) throw ValidationError("unet_decoder_channels", "must be >= 1");
  }
  if (input_size % (1 << unet_depth()) != 0) {
    throw ValidationError("input_size",
                          "must be divisible by 2^(unet depth)");
  }
  if (embedding_dim < 1) throw ValidationError("embedding_dim", "must be >= 1");
}

Tensor image_to_tensor(const ImageRaster& img) {
  if (img.channels != 3) throw ShapeMismatch("expected an RGB raster");
  const std::size_t H = img.height, W = img.width;
  Tensor t({3, H, W});
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        t.at(c, y, x) = img.data[(y * W + x) * 3 + c] / 255.0f;
      }
    }
  }
  return t;
}

Tensor conv_layer(const Tensor& x, const LayerWeights& w,
                  const std::string& prefix, int stride) {
  const Tensor& k = w.get(prefix + ".weight");
  expect_rank(k, 4, prefix + ".weight");
  std::span<const float> bias;
  if (w.contains(prefix + ".bias")) {
    bias = w.get(prefix + ".bias", {k.dim(0)}).values();
  }
  return conv2d(x, k, bias, stride, static_cast<int>(k.dim(2) / 2));
}

std::vector<Tensor> toy_backbone_forward(const Tensor& img,
                                         const LayerWeights& w) {
  expect_rank(img, 3, "backbone input");
  if (img.dim(0) != 3) throw ShapeMismatch("backbone input must have 3 channels");
  std::vector<Tensor> fine_to_coarse;
  Tensor x = leaky_relu(conv_layer(img, w, "backbone.stem", 2), kLeakySlope);
  x = maxpool2d(x, 2, 2);
  fine_to_coarse.push_back(x);
  for (int s = 1; w.contains("backbone.stage" + std::to_string(s) + ".weight");
       ++s) {
    x = leaky_relu(conv_layer(x, w, "backbone.stage" + std::to_string(s), 2),
                   kLeakySlope);
    fine_to_coarse.push_back(x);
  }
  return {fine_to_coarse.rbegin(), fine_to_coarse.rend()};
}

FeaturePyramid fpn_merge(std::span<const Tensor> backbone_coarse_to_fine,
                         const LayerWeights& w) {
  if (backbone_coarse_to_fine.empty()) {
    throw ShapeMismatch("fpn_merge: no backbone outputs");
  }
  FeaturePyramid pyr;
  for (std::size_t i = 0; i < backbone_coarse_to_fine.size(); ++i) {
    const Tensor& r = backbone_coarse_to_fine[i];
    const std::string idx = std::to_string(i);
    Tensor lateral = conv_layer(r, w, "fpn.lateral" + idx, 1);
    if (i == 0) {
      pyr.levels.push_back(std::move(lateral));
      continue;
    }
    const Tensor& prev = pyr.levels.back();
    const std::size_t h = lateral.dim(1), wd = lateral.dim(2);
    if (prev.dim(1) != (h + 1) / 2 || prev.dim(2) != (wd + 1) / 2) {
      throw ShapeMismatch("fpn_merge: level " + idx + " extent " +
                          dims_to_string(lateral.dims()) +
                          " is not double the coarser level " +
                          dims_to_string(prev.dims()));
    }
    Tensor up = crop_spatial(upsample2x_nearest(prev), h, wd);
    pyr.levels.push_back(
        conv_layer(concat_channels(lateral, up), w, "fpn.fuse" + idx, 1));
  }
  return pyr;
}

Tensor psi_compress(const Tensor& bev, const LayerWeights& w,
                    std::span<const int> strides) {
  expect_rank(bev, 3, "psi input");
  Tensor x = bev;
  for (std::size_t s = 0; s < strides.size(); ++s) {
    const std::string p = "psi.stage" + std::to_string(s);
    x = conv_layer(x, w, p, strides[s]);
    const Dims c{x.dim(0)};
    x = batchnorm_apply(x, w.get(p + ".bn.scale", c).values(),
                        w.get(p + ".bn.shift", c).values(),
                        w.get(p + ".bn.mean", c).values(),
                        w.get(p + ".bn.var", c).values());
    x = leaky_relu(x, kLeakySlope);
  }
  return x;
}

std::vector<Tensor> unet_encode(const Tensor& img, const LayerWeights& w,
                                int depth) {
  expect_rank(img, 3, "unet input");
  if (depth < 0 || img.dim(1) != img.dim(2) ||
      img.dim(1) % (std::size_t{1} << depth) != 0) {
    throw ShapeMismatch("unet input " + dims_to_string(img.dims()) +
                        " must be square with extent divisible by 2^" +
                        std::to_string(depth));
  }
  std::vector<Tensor> enc;
  enc.push_back(leaky_relu(conv_layer(img, w, "unet.enc0", 1), kLeakySlope));
  for (int k = 1; k <= depth; ++k) {
    enc.push_back(leaky_relu(
        conv_layer(enc.back(), w, "unet.enc" + std::to_string(k), 2),
        kLeakySlope));
  }
  return enc;
}

UnetOutput unet_forward(const Tensor& img, const LayerWeights& w, int depth) {
  UnetOutput out;
  out.encoder = unet_encode(img, w, depth);
  Tensor d = out.encoder.back();
  for (int i = 1; i <= depth; ++i) {
    const Tensor& k = w.get("unet.dec" + std::to_string(i) + ".weight");
    Tensor up = transposed_conv2d(d, k, 2);
    d = concat_channels(out.encoder[depth - i], up);
  }
  out.decoded = std::move(d);
  return out;
}

}  // namespace bevcv
