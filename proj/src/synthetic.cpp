#include "bevcv/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "bevcv/error.hpp"
#include "bevcv/projection.hpp"
#include "bevcv/random.hpp"

namespace bevcv {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a combined word.
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e5a9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double sd,
                         Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * rng.normal();
  }
  return m;
}

}  // namespace

SyntheticWorld::SyntheticWorld(SyntheticSpec spec) : spec_(spec) {
  if (spec_.pano_width < 2 || spec_.pano_height < 1 || spec_.harmonics < 1 ||
      spec_.descriptor_columns < 1 || spec_.pov_channels < 1 ||
      spec_.aer_channels < 1 || spec_.spatial < 1) {
    throw InvalidArgument("synthetic spec extents must be positive");
  }
  Rng rng(spec_.world_seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(spec_.latent_dim()));
  pov_mixing_ = gaussian(spec_.pov_channels, spec_.latent_dim(), sd, rng);
  aer_mixing_ = gaussian(spec_.aer_channels, spec_.latent_dim(), sd, rng);
}

std::vector<SyntheticScene> SyntheticWorld::make_scenes(
    std::size_t n, std::uint64_t seed, std::uint64_t first_id) const {
  Rng rng(mix_seed(spec_.world_seed, seed));
  std::vector<SyntheticScene> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.id = first_id + i;
    s.yaw_deg = rng.uniform(0.0, 360.0);
    s.coeffs.resize(3, 1 + 2 * spec_.harmonics);
    for (int c = 0; c < 3; ++c) {
      s.coeffs(c, 0) = 0.5 * rng.normal();
      for (int k = 1; k <= spec_.harmonics; ++k) {
        s.coeffs(c, 2 * k - 1) = rng.normal() / k;
        s.coeffs(c, 2 * k) = rng.normal() / k;
      }
    }
  }
  return out;
}

ImageRaster SyntheticWorld::panorama(const SyntheticScene& s) const {
  const int W = spec_.pano_width, H = spec_.pano_height;
  std::vector<std::uint8_t> data(static_cast<std::size_t>(W) * H * 3);
  for (int x = 0; x < W; ++x) {
    // Column x sits at azimuth (x - centre) / W * 360 (centre = azimuth 0);
    // canonical azimuth is relative to the heading.
    const double az = (x - W / 2) * 360.0 / W;
    const double theta = (az - s.yaw_deg) * std::numbers::pi / 180.0;
    for (int c = 0; c < 3; ++c) {
      double v = s.coeffs(c, 0);
      for (int k = 1; k <= spec_.harmonics; ++k) {
        v += s.coeffs(c, 2 * k - 1) * std::cos(k * theta) +
             s.coeffs(c, 2 * k) * std::sin(k * theta);
      }
      const double px = std::nearbyint(127.5 + 120.0 * std::tanh(v / 2.0));
      for (int y = 0; y < H; ++y) {
        data[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
            static_cast<std::uint8_t>(px);
      }
    }
  }
  return ImageRaster(W, H, 3, std::move(data));
}

Eigen::VectorXd SyntheticWorld::view_descriptor(const ImageRaster& pano,
                                                double yaw_deg) const {
  const ImageRaster crop = fov_crop(pano, {spec_.fov_deg, yaw_deg});
  const ImageRaster small = resize_bilinear(crop, spec_.descriptor_columns, 1);
  Eigen::VectorXd d(spec_.latent_dim());
  for (int i = 0; i < spec_.latent_dim(); ++i) {
    d[i] = (small.data[i] - 127.5) / 127.5;
  }
  return d;
}

Tensor SyntheticWorld::lift(const Eigen::VectorXd& latent,
                            const Eigen::MatrixXd& mixing,
                            std::uint64_t noise_seed) const {
  Rng rng(noise_seed);
  const Eigen::VectorXd v = mixing * latent;
  const auto C = static_cast<std::size_t>(v.size());
  const auto S = static_cast<std::size_t>(spec_.spatial);
  Tensor t({C, S, S});
  for (std::size_t c = 0; c < C; ++c) {
    const double base = v[c] + spec_.feature_noise * rng.normal();
    for (std::size_t k = 0; k < S * S; ++k) {
      t[c * S * S + k] =
          static_cast<float>(base + spec_.spatial_noise * rng.normal());
    }
  }
  return t;
}

Tensor SyntheticWorld::pov_feature(const SyntheticScene& s,
                                   double yaw_offset_deg) const {
  const Eigen::VectorXd d =
      view_descriptor(panorama(s), s.yaw_deg + yaw_offset_deg);
  return lift(d, pov_mixing_, mix_seed(s.id, 0x706f76));
}

Tensor SyntheticWorld::aerial_feature(const SyntheticScene& s) const {
  SyntheticScene aligned = s;
  aligned.yaw_deg = 0.0;
  return lift(view_descriptor(panorama(aligned), 0.0), aer_mixing_,
              mix_seed(s.id, 0x616572));
}

std::vector<FeaturePair> SyntheticWorld::pairs(
    const std::vector<SyntheticScene>& scenes) const {
  std::vector<FeaturePair> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({pov_feature(s), aerial_feature(s)});
  return out;
}

SyntheticRetrieval synthetic_retrieval(const SyntheticWorld& world,
                                       const std::vector<SyntheticScene>& scenes,
                                       const LayerWeights& weights) {
  EmbeddingSet gallery;
  gallery.dim = HeadParams::from_weights(weights, Branch::kAerial).dim();
  SyntheticRetrieval r;
  for (const auto& s : scenes) {
    gallery.append(
        s.id,
        projection_forward(world.aerial_feature(s), weights, Branch::kAerial).values);
    r.truth.push_back(s.id);
  }
  r.gallery = EmbeddingIndex::build(std::move(gallery));
  r.embed_query = [&world, &scenes, &weights](std::size_t i, double off) {
    return projection_forward(world.pov_feature(scenes.at(i), off), weights,
                              Branch::kPov)
        .values;
  };
  return r;
}

}  // namespace bevcv
