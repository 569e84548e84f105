#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bevcv/eval.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/index.hpp"
#include "bevcv/tensor.hpp"
#include "bevcv/trainer.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

// A toy world with the structure contrastive heads can learn: every scene is
// a smooth 360-degree panorama (a few low-frequency harmonics per colour
// channel), observed by the POV branch as a limited-FOV crop at the heading
// and by the aerial branch through the heading-aligned view. Both branches
// see the shared latent view descriptor through their own fixed random
// mixing into wide feature maps, plus small noise.
struct SyntheticSpec {
  int pano_width = 360;
  int pano_height = 4;
  int harmonics = 3;
  double fov_deg = 70.0;
  int descriptor_columns = 14;  // crop resized to this many columns
  int pov_channels = 512;
  int aer_channels = 2048;
  int spatial = 7;
  double feature_noise = 0.02;  // per-channel, relative to unit-scale features
  double spatial_noise = 0.01;  // per-element
  std::uint64_t world_seed = 1;

  int latent_dim() const { return 3 * descriptor_columns; }
};

struct SyntheticScene {
  std::uint64_t id = 0;
  double yaw_deg = 0.0;
  Eigen::MatrixXd coeffs;  // 3 x (1 + 2 * harmonics)
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticSpec spec);

  const SyntheticSpec& spec() const { return spec_; }

  // `n` scenes with ids first_id.. and random headings.
  std::vector<SyntheticScene> make_scenes(std::size_t n, std::uint64_t seed,
                                          std::uint64_t first_id = 0) const;

  // The panorama as stored: canonical content rotated so that the scene's
  // forward direction lies at azimuth yaw_deg.
  ImageRaster panorama(const SyntheticScene& s) const;

  // Descriptor of the crop of `pano` centred at `yaw_deg`, values in [-1, 1].
  Eigen::VectorXd view_descriptor(const ImageRaster& pano, double yaw_deg) const;

  // POV features (pov_channels, spatial, spatial) seen when heading
  // yaw + offset. Noise depends only on the scene id.
  Tensor pov_feature(const SyntheticScene& s, double yaw_offset_deg = 0.0) const;
  // Aerial features (aer_channels, spatial, spatial) from the aligned view.
  Tensor aerial_feature(const SyntheticScene& s) const;

  std::vector<FeaturePair> pairs(const std::vector<SyntheticScene>& scenes) const;

 private:
  Tensor lift(const Eigen::VectorXd& latent, const Eigen::MatrixXd& mixing,
              std::uint64_t noise_seed) const;

  SyntheticSpec spec_;
  Eigen::MatrixXd pov_mixing_;  // pov_channels x latent_dim
  Eigen::MatrixXd aer_mixing_;  // aer_channels x latent_dim
};

// Retrieval setup over synthetic scenes: aerial embeddings form the gallery,
// POV embeddings (optionally re-headed) are the queries.
struct SyntheticRetrieval {
  EmbeddingIndex gallery;
  std::vector<std::uint64_t> truth;
  QueryEmbedder embed_query;  // borrows world, scenes and weights
};

SyntheticRetrieval synthetic_retrieval(const SyntheticWorld& world,
                                       const std::vector<SyntheticScene>& scenes,
                                       const LayerWeights& weights);

}  // namespace bevcv
