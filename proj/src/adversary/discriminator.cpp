#include "i2i/adversary/discriminator.hpp"

#include <cmath>
#include <string>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/init.hpp"

namespace i2i {
namespace {

const std::string kBackbone = "disc.backbone.";
constexpr double kLeakySlope = 0.2;

std::size_t pooled_width(const DiscriminatorSpec& spec) {
  return spec.backbone == DiscriminatorBackbone::small_cnn ? spec.cnn_channels[3] : spec.encoder.stage_channels[3];
}

void check_input(const Tensor& image, const DiscriminatorSpec& spec) {
  if (image.rank() != 3 || image.dim(2) != 1) {
    throw ShapeError("discriminator expects a (h, w, 1) image, got " + shape_to_string(image.shape()));
  }
  const auto s = spec.stride();
  if (image.dim(0) == 0 || image.dim(1) == 0 || image.dim(0) % s || image.dim(1) % s) {
    throw ShapeError("discriminator input sides must be divisible by " + std::to_string(s) + ", got " +
                     shape_to_string(image.shape()));
  }
}

}  // namespace

ParameterSet build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& encoder_checkpoint) {
  Rng rng(seed);
  ParameterSet ps;
  if (spec.backbone == DiscriminatorBackbone::small_cnn) {
    if (encoder_checkpoint) throw ConfigError("a small_cnn discriminator has no pretrained backbone to load");
    std::size_t in = 1;
    for (std::size_t s = 0; s < 4; ++s) {
      const auto name = kBackbone + "conv" + std::to_string(s + 1);
      const std::size_t out = spec.cnn_channels[s];
      ps.add(name + ".weight", fan_in_normal({3, 3, in, out}, 9 * in, rng, std::sqrt(2.0)), !spec.frozen_backbone);
      ps.add(name + ".bias", Tensor({out}), !spec.frozen_backbone);
      in = out;
    }
  } else {
    EncoderSpec enc = spec.encoder;
    enc.frozen = spec.frozen_backbone;
    const ParameterSet backbone =
        encoder_checkpoint ? load_pretrained(*encoder_checkpoint, enc) : init_random(enc, mix_seed(seed, 7));
    for (const auto& [name, p] : backbone) ps.add(kBackbone + name, p.value, !spec.frozen_backbone);
  }
  const std::size_t width = pooled_width(spec);
  ps.add("disc.head.weight", fan_in_normal({width, 1}, width, rng), true);
  ps.add("disc.head.bias", Tensor({1}), true);
  return ps;
}

ag::Var discriminate(ag::Tape& tape, ag::Var image, const DiscriminatorSpec& spec, const ParameterSet& params) {
  check_input(tape.value(image), spec);
  ag::ParamBinder bind(tape, params);
  ag::Var features;
  if (spec.backbone == DiscriminatorBackbone::small_cnn) {
    auto x = image;
    for (std::size_t s = 0; s < 4; ++s) {
      const auto name = kBackbone + "conv" + std::to_string(s + 1);
      x = ag::leaky_relu(tape, ag::conv2d(tape, x, bind(name + ".weight"), bind(name + ".bias"), 2, 1), kLeakySlope);
    }
    features = x;
  } else {
    // Replicate the gray channel to three with a fixed (1, 3) linear map so
    // the gradient still flows back to the image.
    auto rgb = ag::linear(tape, image, tape.constant(Tensor({1, 3}, 1.0)));
    ag::ParamBinder backbone(tape, params, kBackbone);
    features = encode(tape, rgb, spec.encoder, backbone)[3];
  }
  auto pooled = ag::global_avg_pool(tape, features);
  return ag::linear(tape, pooled, bind("disc.head.weight"), bind("disc.head.bias"));
}

double discriminate(const ImageTensor& image, const DiscriminatorSpec& spec, const ParameterSet& params) {
  ag::Tape tape(false);
  return tape.value(discriminate(tape, tape.constant(image.tensor()), spec, params))[0];
}

}  // namespace i2i
