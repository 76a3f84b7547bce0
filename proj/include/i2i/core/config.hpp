#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace i2i {

enum class EncoderKind { hiera_style, multiscale_cnn, single_scale_vit };

std::string to_string(EncoderKind kind);
/// Accepts the canonical names and the CLI short forms hiera, cnn and vit.
EncoderKind parse_encoder_kind(std::string_view name);

struct ExperimentConfig {
  std::size_t image_size = 256;
  double learning_rate = 2e-5;
  std::size_t batch_size = 2;
  std::size_t epochs = 20;
  double lambda_img = 50.0;
  double lambda_gan = 1.0;
  EncoderKind encoder_kind = EncoderKind::hiera_style;
  /// Window side in tokens for decoder blocks, coarsest block first.
  std::array<std::size_t, 3> window_schedule = {8, 4, 4};
  std::uint64_t seed = 0;
  std::size_t heads = 2;
  std::array<std::size_t, 4> stage_channels = {32, 64, 128, 256};

  bool operator==(const ExperimentConfig& other) const = default;
};

/// Every spatial extent the encoders and decoder use must divide by this.
inline constexpr std::size_t kTotalStride = 32;

/// Spatial side of the map each decoder block works at, coarsest block first
/// (strides 16, 8 and 4).
std::array<std::size_t, 3> decoder_block_extents(std::size_t image_size);

/// A window wider than its feature map covers the whole map.
inline std::size_t effective_window(std::size_t window, std::size_t extent) {
  return window < extent ? window : extent;
}

/// Returns one human-readable message per violated invariant; empty when usable.
std::vector<std::string> validate_config(const ExperimentConfig& config);

/// Parses the flat `key = value` format. Lines starting with '#' are comments.
/// List values are comma separated. Throws ConfigError on unknown keys or
/// malformed values; does not run validate_config.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& config);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace i2i
