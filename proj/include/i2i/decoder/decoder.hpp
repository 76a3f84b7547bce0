#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "i2i/attention/mask_unit_attention.hpp"
#include "i2i/autograd/tape.hpp"
#include "i2i/core/config.hpp"
#include "i2i/core/feature_pyramid.hpp"
#include "i2i/core/image.hpp"
#include "i2i/core/parameter_set.hpp"
#include "i2i/encoders/encoder.hpp"

namespace i2i {

/// Three coarse-to-fine fusion blocks followed by a 1-channel sigmoid head.
///
/// Block 1 fuses pyramid levels 4 and 3, block 2 fuses block 1 with level 2,
/// block 3 fuses block 2 with level 1. The stride-4 result is bilinearly
/// upsampled x4, reduced to one channel by a 3x3 convolution and squashed by
/// a sigmoid. Parameters live under "decoder.*".
struct DecoderSpec {
  std::array<std::size_t, 4> stage_channels = {32, 64, 128, 256};
  std::size_t heads = 2;
  /// Window side per block, coarsest first; clamped to the map extent.
  std::array<std::size_t, 3> window_schedule = {8, 4, 4};

  bool operator==(const DecoderSpec&) const = default;
};

DecoderSpec make_decoder_spec(const ExperimentConfig& config);

struct FusionBlockParams {
  /// Projection of the upsampled coarse map to the fine width: (c_coarse, c_fine).
  Tensor up_weight, up_bias;
  /// Fusion of [projected coarse, fine]: (2 c_fine, c_fine).
  Tensor fuse_weight, fuse_bias;
  AttentionParams attention;
  WindowShape window;
};

/// Nearest x2 upsample of coarse, project to fine's width, concatenate with
/// fine, fuse linearly, then residual mask-unit attention. Throws ShapeError
/// unless coarse is exactly half of fine in both spatial dimensions.
Tensor fuse_block(const Tensor& coarse, const Tensor& fine, const FusionBlockParams& params);

/// Extracts block b (0-based, coarsest first) for a map of the given extent.
FusionBlockParams fusion_block_params(const ParameterSet& params, const DecoderSpec& spec, std::size_t block,
                                      std::size_t fine_h, std::size_t fine_w);

ParameterSet init_decoder(const DecoderSpec& spec, std::uint64_t seed);

/// Output has the input's spatial size times 4 of level 1, one channel, values in (0, 1).
ImageTensor decode(const FeaturePyramid& pyramid, const DecoderSpec& spec, const ParameterSet& params);

/// Differentiable forms.
ag::Var fuse_block(ag::Tape& tape, ag::Var coarse, ag::Var fine, ag::ParamBinder& bind, const DecoderSpec& spec,
                   std::size_t block);
ag::Var decode(ag::Tape& tape, const std::array<ag::Var, 4>& levels, const DecoderSpec& spec, ag::ParamBinder& bind);

/// Encoder and decoder architecture of the full generator.
struct GeneratorSpec {
  EncoderSpec encoder;
  DecoderSpec decoder;
};

GeneratorSpec make_generator_spec(const ExperimentConfig& config);

/// Frozen random encoder ("encoder.*") plus trainable decoder ("decoder.*").
ParameterSet init_generator(const GeneratorSpec& spec, std::uint64_t seed);

/// decode(encode(adapt_channels(source))) with one combined parameter set.
ImageTensor translate(const ImageTensor& source, const GeneratorSpec& spec, const ParameterSet& params);

}  // namespace i2i
