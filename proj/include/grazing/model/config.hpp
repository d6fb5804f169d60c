#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/preprocess.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/numerics/layers.hpp"

namespace grazing {

enum class ClassifierMode { last_four, only_last };
enum class InputMode { masked, no_poly, poly_extra_channel };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const char* to_string(ClassifierMode m) { return m == ClassifierMode::last_four ? "last_four" : "only_last"; }

inline const char* to_string(InputMode m) {
  switch (m) {
    case InputMode::masked: return "masked";
    case InputMode::no_poly: return "no_poly";
    case InputMode::poly_extra_channel: return "poly_extra_channel";
  }
  return "?";
}

inline ClassifierMode classifier_mode_from(std::string_view s) {
  if (s == "last_four") return ClassifierMode::last_four;
  if (s == "only_last") return ClassifierMode::only_last;
  throw ConfigError("unknown classifier mode '" + std::string(s) + "'");
}

inline InputMode input_mode_from(std::string_view s) {
  if (s == "masked") return InputMode::masked;
  if (s == "no_poly") return InputMode::no_poly;
  if (s == "poly_extra_channel") return InputMode::poly_extra_channel;
  throw ConfigError("unknown input mode '" + std::string(s) + "'");
}

inline MaskPolicy mask_policy(InputMode m) {
  switch (m) {
    case InputMode::masked: return MaskPolicy::zero_outside;
    case InputMode::no_poly: return MaskPolicy::keep_all;
    case InputMode::poly_extra_channel: return MaskPolicy::append_mask_channel;
  }
  return MaskPolicy::zero_outside;
}

struct ModelConfig {
  std::string ablation = "main";
  std::size_t input_channels = kBandCount;
  std::size_t conv_filters = 8;
  std::size_t conv_kernel = 7;
  std::size_t pool_window = 3;
  std::size_t pool_stride = 3;
  std::size_t lstm_hidden = 16;
  std::size_t vote_window = 4;
  ClassifierMode classifier_mode = ClassifierMode::last_four;
  InputMode input_mode = InputMode::masked;
  std::vector<std::size_t> band_subset = all_bands();
  std::size_t chip_height = 45;
  std::size_t chip_width = 45;

  /// Flattened per-frame feature length fed to the recurrent layer.
  std::size_t feature_size() const {
    return pooled_extent(chip_height, pool_stride) * pooled_extent(chip_width, pool_stride) * conv_filters;
  }

  void validate() const {
    if (vote_window < 1) throw ConfigError("vote_window must be at least 1");
    if (conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
    if (conv_filters == 0 || lstm_hidden == 0 || pool_window == 0 || pool_stride == 0)
      throw ConfigError("layer sizes must be positive");
    if (chip_height == 0 || chip_width == 0) throw ConfigError("chip size must be positive");
    const std::size_t extra = input_mode == InputMode::poly_extra_channel ? 1 : 0;
    if (band_subset.size() + extra != input_channels)
      throw ConfigError("band_subset has " + std::to_string(band_subset.size()) + " bands but input_channels is " +
                        std::to_string(input_channels));
    for (auto b : band_subset)
      if (b >= kBandCount) throw ConfigError("band index " + std::to_string(b) + " out of range");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"main",   "only_last",     "no_poly",     "poly_input",
                                              "no_rgb", "no_rgb_no_veg", "only_rgb_veg"};
  return names;
}

/// Bands B02-B04 (RGB) are indices 1-3; red edge B05-B07 are 4-6; B10 (cirrus) is 10.
/// The band-dropping variants also drop B10, giving 9 and 6 input channels.
inline constexpr std::size_t kCirrusBand = 10;

inline ModelConfig configure_ablation(std::string_view name) {
  ModelConfig c;
  c.ablation = std::string(name);
  auto keep = [&](auto pred) {
    c.band_subset.clear();
    for (std::size_t b = 0; b < kBandCount; ++b)
      if (pred(b)) c.band_subset.push_back(b);
    c.input_channels = c.band_subset.size();
  };
  if (name == "main") {
  } else if (name == "only_last") {
    c.classifier_mode = ClassifierMode::only_last;
  } else if (name == "no_poly") {
    c.input_mode = InputMode::no_poly;
  } else if (name == "poly_input") {
    c.input_mode = InputMode::poly_extra_channel;
    c.input_channels = kBandCount + 1;
  } else if (name == "no_rgb") {
    keep([](std::size_t b) { return (b < 1 || b > 3) && b != kCirrusBand; });
  } else if (name == "no_rgb_no_veg") {
    keep([](std::size_t b) { return (b < 1 || b > 6) && b != kCirrusBand; });
  } else if (name == "only_rgb_veg") {
    keep([](std::size_t b) { return b >= 1 && b <= 6; });
  } else {
    throw ConfigError("unknown ablation '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"ablation", c.ablation},
          {"input_channels", c.input_channels},
          {"conv_filters", c.conv_filters},
          {"conv_kernel", c.conv_kernel},
          {"pool_window", c.pool_window},
          {"pool_stride", c.pool_stride},
          {"lstm_hidden", c.lstm_hidden},
          {"vote_window", c.vote_window},
          {"classifier_mode", to_string(c.classifier_mode)},
          {"input_mode", to_string(c.input_mode)},
          {"band_subset", c.band_subset},
          {"chip_height", c.chip_height},
          {"chip_width", c.chip_width}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.ablation = j.at("ablation").get<std::string>();
    c.input_channels = j.at("input_channels").get<std::size_t>();
    c.conv_filters = j.at("conv_filters").get<std::size_t>();
    c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    c.pool_window = j.at("pool_window").get<std::size_t>();
    c.pool_stride = j.at("pool_stride").get<std::size_t>();
    c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    c.vote_window = j.at("vote_window").get<std::size_t>();
    c.classifier_mode = classifier_mode_from(j.at("classifier_mode").get<std::string>());
    c.input_mode = input_mode_from(j.at("input_mode").get<std::string>());
    c.band_subset = j.at("band_subset").get<std::vector<std::size_t>>();
    c.chip_height = j.at("chip_height").get<std::size_t>();
    c.chip_width = j.at("chip_width").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("model config: ") + ex.what());
  }
  c.validate();
  return c;
}

}  // namespace grazing
