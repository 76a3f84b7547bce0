#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "i2i/autograd/tape.hpp"
#include "i2i/core/image.hpp"
#include "i2i/core/parameter_set.hpp"
#include "i2i/encoders/encoder.hpp"

namespace i2i {

enum class DiscriminatorBackbone { small_cnn, pretrained_encoder };

/// Realness critic: backbone, global average pool, linear head to one logit.
///
/// small_cnn: four 3x3 stride-2 convolutions with leaky ReLU on the grayscale
/// image. pretrained_encoder: an encoder (any EncoderSpec kind) on the
/// channel-replicated image, pooled from its coarsest pyramid level.
/// Parameter names: "disc.backbone.*" and "disc.head.{weight,bias}".
struct DiscriminatorSpec {
  DiscriminatorBackbone backbone = DiscriminatorBackbone::small_cnn;
  bool frozen_backbone = true;
  std::array<std::size_t, 4> cnn_channels = {16, 32, 64, 128};
  EncoderSpec encoder;

  /// Spatial sides of the input must divide by this.
  std::size_t stride() const { return backbone == DiscriminatorBackbone::small_cnn ? 16 : kTotalStride; }
};

/// Head is always trainable; the backbone (either kind) is frozen iff
/// frozen_backbone.
/// When encoder_checkpoint is given the backbone is loaded from it, otherwise
/// it is initialized from seed.
ParameterSet build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& encoder_checkpoint = std::nullopt);

/// Realness logit; sigmoid(logit) plays the role of D(image).
double discriminate(const ImageTensor& image, const DiscriminatorSpec& spec, const ParameterSet& params);

/// Differentiable form on a (h, w, 1) image node; returns a one-element node.
ag::Var discriminate(ag::Tape& tape, ag::Var image, const DiscriminatorSpec& spec, const ParameterSet& params);

}  // namespace i2i
