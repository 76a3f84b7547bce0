#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "i2i/autograd/tape.hpp"
#include "i2i/core/config.hpp"
#include "i2i/core/feature_pyramid.hpp"
#include "i2i/core/image.hpp"
#include "i2i/core/parameter_set.hpp"

namespace i2i {

/// Architecture of a multiscale image encoder.
///
/// hiera_style: 7x7/stride-4 patch embedding, then four stages of pre-norm
///   transformer blocks (attention + GELU MLP). Stages 1-2 use mask-unit
///   (windowed) attention, stages 3-4 global attention; stage transitions
///   project channels and 2x2 max-pool.
/// multiscale_cnn: two stride-2 convolutions, then four stages of residual
///   3x3 conv blocks with stride-2 transitions; no attention anywhere.
/// single_scale_vit: 16x16/stride-16 patch embedding and a stack of global
///   transformer blocks; the single stride-16 map is bilinearly resampled to
///   strides 4/8/16/32 with a per-level linear projection.
struct EncoderSpec {
  EncoderKind kind = EncoderKind::hiera_style;
  std::array<std::size_t, 4> stage_depths = {1, 2, 4, 2};
  std::array<std::size_t, 4> stage_channels = {32, 64, 128, 256};
  std::size_t heads = 2;
  /// Mask-unit window side (in tokens) per hiera stage; 0 means global attention.
  std::array<std::size_t, 4> stage_windows = {8, 4, 0, 0};
  bool frozen = true;

  /// 4 for hiera_style and multiscale_cnn, 16 for single_scale_vit.
  std::size_t stem_stride() const { return kind == EncoderKind::single_scale_vit ? 16 : 4; }

  bool operator==(const EncoderSpec&) const = default;
};

EncoderSpec make_encoder_spec(const ExperimentConfig& config);
nlohmann::json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

/// Replicates a one-channel image to three channels; three-channel images pass
/// through unchanged; any other channel count is a ShapeError.
ImageTensor adapt_channels(const ImageTensor& image);

/// Runs the encoder on a one- or three-channel image whose sides divide by 32.
FeaturePyramid encode(const ImageTensor& image, const EncoderSpec& spec, const ParameterSet& params);
/// Differentiable form; image is a three-channel (h, w, 3) node.
std::array<ag::Var, 4> encode(ag::Tape& tape, ag::Var image, const EncoderSpec& spec, ag::ParamBinder& bind);

/// Deterministic fan-in scaled initialization; every entry is named
/// "encoder.*" and flagged trainable = !spec.frozen.
ParameterSet init_random(const EncoderSpec& spec, std::uint64_t seed);

/// Name -> shape of every parameter the EncoderSpec requires.
std::map<std::string, Shape> encoder_parameter_shapes(const EncoderSpec& spec);

/// Writes an encoder checkpoint (arrays "encoder.*" plus the EncoderSpec as metadata).
void save_encoder(const std::filesystem::path& path, const EncoderSpec& spec, const ParameterSet& params);

/// Loads and validates an encoder checkpoint against spec. Throws IoError for
/// unreadable files and ShapeError listing every missing, unexpected or
/// wrong-shaped array. Entries are flagged frozen when spec.frozen.
ParameterSet load_pretrained(const std::filesystem::path& path, const EncoderSpec& spec);

/// Name-by-name comparison of params against the EncoderSpec; empty when compatible.
std::vector<std::string> encoder_mismatches(const ParameterSet& params, const EncoderSpec& spec);

}  // namespace i2i
