#include "i2i/decoder/decoder.hpp"

#include <string>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/init.hpp"

namespace i2i {
namespace {

std::string block_name(std::size_t b) { return "decoder.block" + std::to_string(b + 1); }

// Block b works at the width of pyramid level (3 - b), zero-based: 2, 1, 0.
std::size_t fine_channels(const DecoderSpec& spec, std::size_t b) { return spec.stage_channels[2 - b]; }
std::size_t coarse_channels(const DecoderSpec& spec, std::size_t b) { return spec.stage_channels[3 - b]; }

WindowShape block_window(const DecoderSpec& spec, std::size_t b, std::size_t h, std::size_t w) {
  return {effective_window(spec.window_schedule[b], h), effective_window(spec.window_schedule[b], w)};
}

void check_ratio(const Tensor& coarse, const Tensor& fine) {
  if (coarse.rank() != 3 || fine.rank() != 3 || 2 * coarse.dim(0) != fine.dim(0) || 2 * coarse.dim(1) != fine.dim(1)) {
    throw ShapeError("fusion needs a coarse map exactly half the fine map's size, got " +
                     shape_to_string(coarse.shape()) + " and " + shape_to_string(fine.shape()));
  }
}

ag::Var fuse(ag::Tape& t, ag::Var coarse, ag::Var fine, ag::Var up_w, ag::Var up_b, ag::Var fuse_w, ag::Var fuse_b,
             const AttentionVars& attn, WindowShape window) {
  check_ratio(t.value(coarse), t.value(fine));
  auto up = ag::linear(t, ag::upsample_nearest(t, coarse, 2), up_w, up_b);
  auto fused = ag::linear(t, ag::concat_channels(t, up, fine), fuse_w, fuse_b);
  return mask_unit_attention(t, fused, attn, window);
}

}  // namespace

DecoderSpec make_decoder_spec(const ExperimentConfig& config) {
  return DecoderSpec{config.stage_channels, config.heads, config.window_schedule};
}

Tensor fuse_block(const Tensor& coarse, const Tensor& fine, const FusionBlockParams& p) {
  check_ratio(coarse, fine);
  ag::Tape t(false);
  auto attn = bind_attention(t, p.attention, false);
  auto out = fuse(t, t.constant(coarse), t.constant(fine), t.constant(p.up_weight), t.constant(p.up_bias),
                  t.constant(p.fuse_weight), t.constant(p.fuse_bias), attn, p.window);
  return t.value(out);
}

FusionBlockParams fusion_block_params(const ParameterSet& params, const DecoderSpec& spec, std::size_t block,
                                      std::size_t fine_h, std::size_t fine_w) {
  const auto name = block_name(block);
  return FusionBlockParams{params.at(name + ".up.weight").value,
                           params.at(name + ".up.bias").value,
                           params.at(name + ".fuse.weight").value,
                           params.at(name + ".fuse.bias").value,
                           attention_params_from(params, name + ".attn", spec.heads),
                           block_window(spec, block, fine_h, fine_w)};
}

ParameterSet init_decoder(const DecoderSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet ps;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto name = block_name(b);
    const std::size_t cc = coarse_channels(spec, b), cf = fine_channels(spec, b);
    if (cf == 0 || spec.heads == 0 || cf % spec.heads != 0) {
      throw ConfigError("decoder block width " + std::to_string(cf) + " must be a positive multiple of heads");
    }
    ps.add(name + ".up.weight", fan_in_normal({cc, cf}, cc, rng), true);
    ps.add(name + ".up.bias", Tensor({cf}), true);
    ps.add(name + ".fuse.weight", fan_in_normal({2 * cf, cf}, 2 * cf, rng), true);
    ps.add(name + ".fuse.bias", Tensor({cf}), true);
    init_attention_params(ps, name + ".attn", cf, rng, true);
  }
  const std::size_t c1 = spec.stage_channels[0];
  ps.add("decoder.head.weight", fan_in_normal({3, 3, c1, 1}, 9 * c1, rng), true);
  ps.add("decoder.head.bias", Tensor({1}), true);
  return ps;
}

ag::Var fuse_block(ag::Tape& tape, ag::Var coarse, ag::Var fine, ag::ParamBinder& bind, const DecoderSpec& spec,
                   std::size_t block) {
  const auto name = block_name(block);
  const auto& fv = tape.value(fine);
  if (fv.rank() != 3) throw ShapeError("fusion input must be (h, w, c)");
  return fuse(tape, coarse, fine, bind(name + ".up.weight"), bind(name + ".up.bias"), bind(name + ".fuse.weight"),
              bind(name + ".fuse.bias"), bind_attention(bind, name + ".attn", spec.heads),
              block_window(spec, block, fv.dim(0), fv.dim(1)));
}

ag::Var decode(ag::Tape& tape, const std::array<ag::Var, 4>& levels, const DecoderSpec& spec, ag::ParamBinder& bind) {
  auto x = fuse_block(tape, levels[3], levels[2], bind, spec, 0);
  x = fuse_block(tape, x, levels[1], bind, spec, 1);
  x = fuse_block(tape, x, levels[0], bind, spec, 2);
  const auto& xv = tape.value(x);
  x = ag::resize_bilinear(tape, x, 4 * xv.dim(0), 4 * xv.dim(1));
  x = ag::conv2d(tape, x, bind("decoder.head.weight"), bind("decoder.head.bias"), 1, 1);
  return ag::sigmoid(tape, x);
}

ImageTensor decode(const FeaturePyramid& pyramid, const DecoderSpec& spec, const ParameterSet& params) {
  ag::Tape tape(false);
  ag::ParamBinder bind(tape, params);
  std::array<ag::Var, 4> levels;
  for (std::size_t i = 0; i < 4; ++i) levels[i] = tape.constant(pyramid.level(i));
  return ImageTensor(tape.value(decode(tape, levels, spec, bind)));
}

GeneratorSpec make_generator_spec(const ExperimentConfig& config) {
  return GeneratorSpec{make_encoder_spec(config), make_decoder_spec(config)};
}

ParameterSet init_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  ParameterSet ps = init_random(spec.encoder, mix_seed(seed, 1));
  ps.merge(init_decoder(spec.decoder, mix_seed(seed, 2)));
  return ps;
}

ImageTensor translate(const ImageTensor& source, const GeneratorSpec& spec, const ParameterSet& params) {
  return decode(encode(adapt_channels(source), spec.encoder, params), spec.decoder, params);
}

}  // namespace i2i
