#include "bevcv/model.hpp"

#include <cmath>

#include "bevcv/error.hpp"
#include "bevcv/random.hpp"

namespace bevcv {

void ModelSpec::validate() const {
  net.validate();
  intrinsics.validate();
  grid.validate();
  if (intrinsics.image_w != net.input_size ||
      intrinsics.image_h != net.input_size) {
    throw ValidationError("intrinsics.image_w",
                          "intrinsics must describe the resized " +
                              std::to_string(net.input_size) + "x" +
                              std::to_string(net.input_size) + " input");
  }
  if (net.psi_channels.back() != net.embedding_dim) {
    throw ValidationError("psi_channels",
                          "last psi stage must output embedding_dim channels");
  }
}

std::vector<LevelDims> backbone_level_dims(const NetConfig& net) {
  const auto conv_out = [](std::size_t in, int stride) {
    return (in + 2 * (kBackboneKernel / 2) - kBackboneKernel) / stride + 1;
  };
  std::size_t e = conv_out(static_cast<std::size_t>(net.input_size), 2) / 2;
  std::vector<LevelDims> fine_to_coarse{{e, e}};
  for (int s = 1; s < net.pyramid_levels; ++s) {
    e = conv_out(e, 2);
    fine_to_coarse.push_back({e, e});
  }
  return {fine_to_coarse.rbegin(), fine_to_coarse.rend()};
}

namespace {

Tensor he_normal(Dims dims, std::size_t fan_in, double gain, Rng& rng) {
  Tensor t(std::move(dims));
  const double sd = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<float>(sd * rng.normal());
  return t;
}

void add_conv(LayerWeights& w, const std::string& prefix, std::size_t cin,
              std::size_t cout, std::size_t k, Rng& rng, bool bias = true) {
  w.insert(prefix + ".weight", he_normal({cout, cin, k, k}, cin * k * k, 1.0, rng));
  if (bias) w.insert(prefix + ".bias", Tensor({cout}));
}

}  // namespace

LayerWeights init_model_weights(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const NetConfig& net = spec.net;
  Rng rng(seed);
  LayerWeights w;
  const auto bc = static_cast<std::size_t>(net.backbone_channels);
  const auto fc = static_cast<std::size_t>(net.fpn_channels);

  add_conv(w, "backbone.stem", 3, bc, kBackboneKernel, rng);
  for (int s = 1; s < net.pyramid_levels; ++s) {
    add_conv(w, "backbone.stage" + std::to_string(s), bc, bc, kBackboneKernel,
             rng);
  }
  for (int i = 0; i < net.pyramid_levels; ++i) {
    add_conv(w, "fpn.lateral" + std::to_string(i), bc, fc, 1, rng);
    if (i > 0) add_conv(w, "fpn.fuse" + std::to_string(i), 2 * fc, fc, 1, rng);
  }

  const auto dims = backbone_level_dims(net);
  const auto part =
      build_depth_partition(spec.intrinsics, spec.grid, net.pyramid_levels);
  const auto map = build_resample_map(spec.intrinsics, spec.grid, part, dims);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const Dims cd = collapse_dims(map, i, fc);
    // Unit-gain linear map from the Cin*H column to each output.
    w.insert("msd.collapse" + std::to_string(i),
             he_normal(cd, cd[2] * cd[3], std::sqrt(0.5), rng));
  }

  std::size_t c = static_cast<std::size_t>(spec.grid.channels);
  for (std::size_t s = 0; s < net.psi_channels.size(); ++s) {
    const std::string p = "psi.stage" + std::to_string(s);
    const auto cout = static_cast<std::size_t>(net.psi_channels[s]);
    add_conv(w, p, c, cout, kPsiKernel, rng);
    w.insert(p + ".bn.scale", Tensor({cout}, 1.0f));
    w.insert(p + ".bn.shift", Tensor({cout}));
    w.insert(p + ".bn.mean", Tensor({cout}));
    w.insert(p + ".bn.var", Tensor({cout}, 1.0f));
    c = cout;
  }

  std::size_t ac = 3;
  for (int k = 0; k <= net.unet_depth(); ++k) {
    const auto cout = static_cast<std::size_t>(net.unet_channels[k]);
    add_conv(w, "unet.enc" + std::to_string(k), ac, cout, kUnetKernel, rng);
    ac = cout;
  }
  std::size_t dc = ac;
  for (int i = 1; i <= net.unet_depth(); ++i) {
    const auto cout = static_cast<std::size_t>(net.unet_decoder_channels[i - 1]);
    w.insert("unet.dec" + std::to_string(i) + ".weight",
             he_normal({dc, cout, 2, 2}, dc, 1.0, rng));
    dc = static_cast<std::size_t>(net.unet_channels[net.unet_depth() - i]) + cout;
  }

  const auto dim = static_cast<std::size_t>(net.embedding_dim);
  HeadParams::init(Branch::kPov, c, dim, rng).store(w);
  HeadParams::init(Branch::kAerial, ac, dim, rng).store(w);
  return w;
}

Pipeline::Pipeline(ModelSpec spec, LayerWeights weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  spec_.validate();
  const NetConfig& net = spec_.net;
  const auto dims = backbone_level_dims(net);
  const auto part =
      build_depth_partition(spec_.intrinsics, spec_.grid, net.pyramid_levels);
  map_ = build_resample_map(spec_.intrinsics, spec_.grid, part, dims);
  const auto fc = static_cast<std::size_t>(net.fpn_channels);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    collapse_.push_back(weights_.get("msd.collapse" + std::to_string(i),
                                     collapse_dims(map_, i, fc)));
  }
  // Heads are checked eagerly; conv shapes are checked as the graphs run.
  (void)HeadParams::from_weights(weights_, Branch::kPov);
  (void)HeadParams::from_weights(weights_, Branch::kAerial);
}

ImageRaster Pipeline::to_input(const ImageRaster& img) const {
  return resize_bilinear(img, spec_.net.input_size, spec_.net.input_size);
}

Tensor Pipeline::pov_features(const ImageRaster& pov, Tensor* bev_out) const {
  const auto levels = toy_backbone_forward(image_to_tensor(to_input(pov)), weights_);
  if (static_cast<int>(levels.size()) != spec_.net.pyramid_levels) {
    throw ShapeMismatch("backbone produced " + std::to_string(levels.size()) +
                        " levels, expected " +
                        std::to_string(spec_.net.pyramid_levels));
  }
  const FeaturePyramid pyr = fpn_merge(levels, weights_);
  Tensor bev = msd_transform(pyr, map_, collapse_);
  Tensor psi = psi_compress(bev, weights_, spec_.net.psi_strides);
  if (bev_out) *bev_out = std::move(bev);
  return psi;
}

Tensor Pipeline::aerial_features(const ImageRaster& aerial) const {
  auto enc = unet_encode(image_to_tensor(to_input(aerial)), weights_,
                         spec_.net.unet_depth());
  return std::move(enc.back());
}

Embedding Pipeline::embed_pov(const ImageRaster& panorama,
                              const CropSpec& crop) const {
  return projection_forward(pov_features(fov_crop(panorama, crop)), weights_,
                            Branch::kPov);
}

Embedding Pipeline::embed_aerial(const ImageRaster& aerial) const {
  return projection_forward(aerial_features(aerial), weights_, Branch::kAerial);
}

ShapeTrace Pipeline::trace(const ImageRaster& panorama, const CropSpec& crop,
                           const ImageRaster& aerial) const {
  ShapeTrace t;
  const ImageRaster pov = to_input(fov_crop(panorama, crop));
  const auto levels = toy_backbone_forward(image_to_tensor(pov), weights_);
  const FeaturePyramid pyr = fpn_merge(levels, weights_);
  for (const auto& l : pyr.levels) t.pyramid.push_back(l.dims());
  const Tensor bev = msd_transform(pyr, map_, collapse_);
  t.bev = bev.dims();
  const Tensor psi = psi_compress(bev, weights_, spec_.net.psi_strides);
  t.psi = psi.dims();
  t.pov_embedding = projection_forward(psi, weights_, Branch::kPov).values.size();

  const auto unet = unet_forward(image_to_tensor(to_input(aerial)), weights_,
                                 spec_.net.unet_depth());
  for (const auto& e : unet.encoder) t.unet_encoder.push_back(e.dims());
  t.unet_decoded = unet.decoded.dims();
  t.aerial_embedding =
      projection_forward(unet.encoder.back(), weights_, Branch::kAerial)
          .values.size();
  return t;
}

}  // namespace bevcv
