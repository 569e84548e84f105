#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevcv/geometry.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/net.hpp"
#include "bevcv/projection.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

inline constexpr int kBackboneKernel = 3;
inline constexpr int kPsiKernel = 3;
inline constexpr int kUnetKernel = 3;

// Everything needed to bind a weight set to the forward graphs.
struct ModelSpec {
  NetConfig net;
  CameraIntrinsics intrinsics;
  BevGridSpec grid;

  void validate() const;
};

// Pyramid extents (coarse to fine) the toy backbone produces for the
// configured square input.
std::vector<LevelDims> backbone_level_dims(const NetConfig& net);

// Seeded weights for every frozen layer (backbone, FPN, MSD collapse, psi,
// U-Net) plus freshly initialised projection heads. Convolutions use
// He-normal kernels and zero biases; batch norms start as the identity.
LayerWeights init_model_weights(const ModelSpec& spec, std::uint64_t seed);

// Shapes of the intermediate tensors of one forward pass.
struct ShapeTrace {
  std::vector<Dims> pyramid;
  Dims bev;
  Dims psi;
  std::vector<Dims> unet_encoder;
  Dims unet_decoded;
  std::size_t pov_embedding = 0;
  std::size_t aerial_embedding = 0;
};

// Bound forward pipeline. Construction validates the spec and checks that
// every tensor the graphs read has the expected shape.
class Pipeline {
 public:
  Pipeline(ModelSpec spec, LayerWeights weights);

  const ModelSpec& spec() const { return spec_; }
  const LayerWeights& weights() const { return weights_; }
  const ResampleMap& resample_map() const { return map_; }

  // Perspective image (already cropped) -> (512, 7, 7) psi features.
  Tensor pov_features(const ImageRaster& pov, Tensor* bev_out = nullptr) const;
  // Aerial image -> final encoder map e_n.
  Tensor aerial_features(const ImageRaster& aerial) const;

  // Panorama -> crop(crop) -> resize -> features -> unit embedding.
  Embedding embed_pov(const ImageRaster& panorama, const CropSpec& crop) const;
  Embedding embed_aerial(const ImageRaster& aerial) const;

  // Runs both branches once, including the U-Net decoder, and records shapes.
  ShapeTrace trace(const ImageRaster& panorama, const CropSpec& crop,
                   const ImageRaster& aerial) const;

 private:
  ImageRaster to_input(const ImageRaster& img) const;

  ModelSpec spec_;
  LayerWeights weights_;
  ResampleMap map_;
  std::vector<Tensor> collapse_;
};

}  // namespace bevcv
