#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "bevcv/geometry.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/loss.hpp"
#include "bevcv/model.hpp"
#include "bevcv/net.hpp"
#include "bevcv/trainer.hpp"

namespace bevcv {

struct RunConfig {
  CameraIntrinsics intrinsics;
  BevGridSpec grid;
  CropSpec crop;
  LossConfig loss;
  TrainerConfig trainer;
  NetConfig net;
  std::uint64_t seed = 0;

  ModelSpec model_spec() const { return {net, intrinsics, grid}; }
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Intrinsics of a square input_size image whose horizontal field of view is
// `fov_deg`: principal point on the centre pixel ((w - 1) / 2) and
// focal = (w / 2) / tan(fov / 2).
CameraIntrinsics default_intrinsics(int input_size, double fov_deg);

RunConfig default_config();

// Missing keys take their defaults (intrinsics default to the crop FOV and
// input size). Throws ParseError for malformed JSON or wrongly typed values
// and ValidationError naming the offending field for unknown keys and
// out-of-range values.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

// Full effective configuration; parse_config(config_to_json(c)) == c.
std::string config_to_json(const RunConfig& cfg, int indent = 2);

}  // namespace bevcv
