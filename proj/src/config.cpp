#include "bevcv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "bevcv/error.hpp"

namespace bevcv {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

CameraIntrinsics default_intrinsics(int input_size, double fov_deg) {
  CameraIntrinsics c;
  c.image_w = c.image_h = input_size;
  c.cx = c.cy = (input_size - 1) / 2.0;
  c.focal_px = (input_size / 2.0) /
               std::tan(fov_deg * std::numbers::pi / 360.0);
  return c;
}

RunConfig default_config() {
  RunConfig c;
  c.intrinsics = default_intrinsics(c.net.input_size, c.crop.fov_deg);
  return c;
}

void RunConfig::validate() const {
  crop.validate();
  loss.validate();
  trainer.validate();
  model_spec().validate();
}

namespace {

// Reads the members of one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ParseError("'" + (path_.empty() ? "<root>" : path_) +
                       "' must be a JSON object");
    }
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) {
        throw ValidationError(qualified(key), "unknown configuration key");
      }
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
      out = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "an integer");
      const auto wide = v.get<std::int64_t>();
      if (wide < INT32_MIN || wide > INT32_MAX) {
        throw ValidationError(key, "out of range");
      }
      out = static_cast<T>(wide);
    } else {
      if (!v.is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& e : v) {
        if (!e.is_number_integer()) fail(key, "an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  const json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  [[noreturn]] void fail(const std::string& key, const char* expected) {
    throw ParseError("'" + qualified(key) + "' must be " + expected);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

const char* variant_name(NtXentVariant v) {
  return v == NtXentVariant::kNegativesOnly ? "negatives_only" : "standard";
}
const char* loss_kind_name(LossKind k) {
  return k == LossKind::kNtXent ? "ntxent" : "triplet";
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // Byte offset to line number for the message.
    const std::size_t upto = std::min<std::size_t>(e.byte, json_text.size());
    const std::size_t line =
        1 + std::count(json_text.begin(), json_text.begin() + upto, '\n');
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }

  RunConfig c;
  {
    Section s(root, "");
    s.read("seed", c.seed);
    if (s.has("crop")) {
      Section t(s.child("crop"), "crop");
      t.read("fov_deg", c.crop.fov_deg);
      t.read("yaw_deg", c.crop.yaw_deg);
    }
    if (s.has("net")) {
      Section t(s.child("net"), "net");
      t.read("input_size", c.net.input_size);
      t.read("backbone_channels", c.net.backbone_channels);
      t.read("pyramid_levels", c.net.pyramid_levels);
      t.read("fpn_channels", c.net.fpn_channels);
      t.read("psi_channels", c.net.psi_channels);
      t.read("psi_strides", c.net.psi_strides);
      t.read("unet_channels", c.net.unet_channels);
      t.read("unet_decoder_channels", c.net.unet_decoder_channels);
      t.read("embedding_dim", c.net.embedding_dim);
    }
    c.intrinsics = default_intrinsics(c.net.input_size, c.crop.fov_deg);
    if (s.has("intrinsics")) {
      Section t(s.child("intrinsics"), "intrinsics");
      t.read("image_w", c.intrinsics.image_w);
      t.read("image_h", c.intrinsics.image_h);
      c.intrinsics.cx = (c.intrinsics.image_w - 1) / 2.0;
      c.intrinsics.cy = (c.intrinsics.image_h - 1) / 2.0;
      c.intrinsics.focal_px =
          (c.intrinsics.image_w / 2.0) /
          std::tan(c.crop.fov_deg * std::numbers::pi / 360.0);
      t.read("focal_px", c.intrinsics.focal_px);
      t.read("cx", c.intrinsics.cx);
      t.read("cy", c.intrinsics.cy);
    }
    if (s.has("grid")) {
      Section t(s.child("grid"), "grid");
      t.read("cells_x", c.grid.cells_x);
      t.read("cells_z", c.grid.cells_z);
      t.read("resolution_m", c.grid.resolution_m);
      t.read("z_min_m", c.grid.z_min_m);
      t.read("channels", c.grid.channels);
    }
    if (s.has("loss")) {
      Section t(s.child("loss"), "loss");
      t.read("temperature", c.loss.temperature);
      t.read("margin", c.loss.margin);
      t.read("symmetric", c.loss.symmetric);
      std::string variant = variant_name(c.loss.variant);
      t.read("variant", variant);
      if (variant == "negatives_only") {
        c.loss.variant = NtXentVariant::kNegativesOnly;
      } else if (variant == "standard") {
        c.loss.variant = NtXentVariant::kStandard;
      } else {
        throw ValidationError("variant",
                              "expected 'negatives_only' or 'standard', got '" +
                                  variant + "'");
      }
    }
    if (s.has("trainer")) {
      Section t(s.child("trainer"), "trainer");
      t.read("epochs", c.trainer.epochs);
      t.read("batch_size", c.trainer.batch_size);
      t.read("learning_rate", c.trainer.learning_rate);
      t.read("beta1", c.trainer.beta1);
      t.read("beta2", c.trainer.beta2);
      t.read("adam_eps", c.trainer.adam_eps);
      t.read("plateau_factor", c.trainer.plateau_factor);
      t.read("plateau_patience", c.trainer.plateau_patience);
      t.read("plateau_threshold", c.trainer.plateau_threshold);
      t.read("bn_momentum", c.trainer.bn_momentum);
      std::string kind = loss_kind_name(c.trainer.loss);
      t.read("loss", kind);
      if (kind == "ntxent") {
        c.trainer.loss = LossKind::kNtXent;
      } else if (kind == "triplet") {
        c.trainer.loss = LossKind::kTriplet;
      } else {
        throw ValidationError("loss", "expected 'ntxent' or 'triplet', got '" +
                                          kind + "'");
      }
    }
  }
  c.trainer.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c, int indent) {
  ojson j;
  j["seed"] = c.seed;
  j["intrinsics"] = {{"focal_px", c.intrinsics.focal_px},
                     {"cx", c.intrinsics.cx},
                     {"cy", c.intrinsics.cy},
                     {"image_w", c.intrinsics.image_w},
                     {"image_h", c.intrinsics.image_h}};
  j["grid"] = {{"cells_x", c.grid.cells_x},
               {"cells_z", c.grid.cells_z},
               {"resolution_m", c.grid.resolution_m},
               {"z_min_m", c.grid.z_min_m},
               {"channels", c.grid.channels}};
  j["crop"] = {{"fov_deg", c.crop.fov_deg}, {"yaw_deg", c.crop.yaw_deg}};
  j["loss"] = {{"temperature", c.loss.temperature},
               {"variant", variant_name(c.loss.variant)},
               {"margin", c.loss.margin},
               {"symmetric", c.loss.symmetric}};
  j["trainer"] = {{"loss", loss_kind_name(c.trainer.loss)},
                  {"epochs", c.trainer.epochs},
                  {"batch_size", c.trainer.batch_size},
                  {"learning_rate", c.trainer.learning_rate},
                  {"beta1", c.trainer.beta1},
                  {"beta2", c.trainer.beta2},
                  {"adam_eps", c.trainer.adam_eps},
                  {"plateau_factor", c.trainer.plateau_factor},
                  {"plateau_patience", c.trainer.plateau_patience},
                  {"plateau_threshold", c.trainer.plateau_threshold},
                  {"bn_momentum", c.trainer.bn_momentum}};
  j["net"] = {{"input_size", c.net.input_size},
              {"backbone_channels", c.net.backbone_channels},
              {"pyramid_levels", c.net.pyramid_levels},
              {"fpn_channels", c.net.fpn_channels},
              {"psi_channels", c.net.psi_channels},
              {"psi_strides", c.net.psi_strides},
              {"unet_channels", c.net.unet_channels},
              {"unet_decoder_channels", c.net.unet_decoder_channels},
              {"embedding_dim", c.net.embedding_dim}};
  return j.dump(indent);
}

}  // namespace bevcv
