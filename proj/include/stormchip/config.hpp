#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stormchip/datapipe.hpp"
#include "stormchip/train.hpp"

namespace stormchip {

enum class ModelKind { cnn, lr, vgg16 };
std::string_view to_string(ModelKind kind);

// Everything a pipeline run can be configured with. Text form is one
// `key=value` per line, '#' comments allowed; see RunConfig::keys().
struct RunConfig {
  TrainConfig train;
  SplitSpec split;
  QualityThresholds quality;
  std::size_t window_px = 128;
  std::size_t input_size = 150;  // chips are resized to input_size x input_size
  ModelKind model = ModelKind::cnn;
  double leaky_alpha = 0.1;

  RunConfig();

  // Throws ConfigError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  void apply_text(std::string_view text, std::string_view origin = "config");
  void apply_file(const std::filesystem::path& path);
  void validate() const;

  // Fully resolved configuration in the same key=value form, keys sorted.
  std::string to_text() const;

  static const std::vector<std::string>& keys();
};

}  // namespace stormchip
