#include "i2i/encoders/encoder.hpp"

#include <cmath>
#include <sstream>

#include "i2i/attention/mask_unit_attention.hpp"
#include "i2i/autograd/ops.hpp"
#include "i2i/core/archive.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/init.hpp"

namespace i2i {
namespace {

const std::string kPrefix = "encoder.";

std::string stage_name(std::size_t s) { return kPrefix + "stage" + std::to_string(s + 1); }

void add_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool trainable,
                double gain = 1.0) {
  ps.add(name + ".weight", fan_in_normal({in, out}, in, rng, gain), trainable);
  ps.add(name + ".bias", Tensor({out}), trainable);
}

void add_conv(ParameterSet& ps, const std::string& name, std::size_t k, std::size_t in, std::size_t out, Rng& rng,
              bool trainable, double gain) {
  ps.add(name + ".weight", fan_in_normal({k, k, in, out}, k * k * in, rng, gain), trainable);
  ps.add(name + ".bias", Tensor({out}), trainable);
}

void add_layer_norm(ParameterSet& ps, const std::string& name, std::size_t dim, bool trainable) {
  ps.add(name + ".gamma", Tensor({dim}, 1.0), trainable);
  ps.add(name + ".beta", Tensor({dim}), trainable);
}

void add_transformer_block(ParameterSet& ps, const std::string& name, std::size_t dim, Rng& rng, bool trainable) {
  add_layer_norm(ps, name + ".ln1", dim, trainable);
  init_attention_params(ps, name + ".attn", dim, rng, trainable);
  add_layer_norm(ps, name + ".ln2", dim, trainable);
  add_linear(ps, name + ".mlp1", dim, 4 * dim, rng, trainable);
  add_linear(ps, name + ".mlp2", 4 * dim, dim, rng, trainable);
}

ag::Var lin(ag::Tape& t, ag::Var x, ag::ParamBinder& bind, const std::string& name) {
  return ag::linear(t, x, bind(name + ".weight"), bind(name + ".bias"));
}

ag::Var conv(ag::Tape& t, ag::Var x, ag::ParamBinder& bind, const std::string& name, std::size_t stride,
             std::size_t pad) {
  return ag::conv2d(t, x, bind(name + ".weight"), bind(name + ".bias"), stride, pad);
}

ag::Var norm(ag::Tape& t, ag::Var x, ag::ParamBinder& bind, const std::string& name) {
  return ag::layer_norm(t, x, bind(name + ".gamma"), bind(name + ".beta"));
}

// Pre-norm block: x + attn(LN(x)), then x + MLP(LN(x)). window side 0 = global.
ag::Var transformer_block(ag::Tape& t, ag::Var x, ag::ParamBinder& bind, const std::string& name, std::size_t heads,
                          std::size_t window_side) {
  const auto& xv = t.value(x);
  const WindowShape window = window_side == 0 ? WindowShape{xv.dim(0), xv.dim(1)}
                                              : WindowShape{effective_window(window_side, xv.dim(0)),
                                                            effective_window(window_side, xv.dim(1))};
  auto attn = bind_attention(bind, name + ".attn", heads);
  x = ag::add(t, x, attend_windows(t, norm(t, x, bind, name + ".ln1"), attn, window));
  auto hidden = ag::gelu(t, lin(t, norm(t, x, bind, name + ".ln2"), bind, name + ".mlp1"));
  return ag::add(t, x, lin(t, hidden, bind, name + ".mlp2"));
}

ag::Var add_position_code(ag::Tape& t, ag::Var x) {
  const auto& xv = t.value(x);
  return ag::add(t, x, t.constant(sinusoidal_position_code(xv.dim(0), xv.dim(1), xv.dim(2))));
}

std::size_t vit_dim(const EncoderSpec& spec) { return spec.stage_channels[3]; }

std::size_t total_depth(const EncoderSpec& spec) {
  std::size_t n = 0;
  for (auto d : spec.stage_depths) n += d;
  return n;
}

void check_spec(const EncoderSpec& spec) {
  for (std::size_t s = 0; s < 4; ++s) {
    if (spec.stage_channels[s] == 0) throw ConfigError("encoder stage channels must be positive");
    if (spec.heads == 0 || spec.stage_channels[s] % spec.heads != 0) {
      throw ConfigError("encoder heads (" + std::to_string(spec.heads) + ") must divide every stage width");
    }
  }
}

std::array<ag::Var, 4> encode_hiera(ag::Tape& t, ag::Var image, const EncoderSpec& spec, ag::ParamBinder& bind) {
  std::array<ag::Var, 4> levels;
  auto x = add_position_code(t, conv(t, image, bind, kPrefix + "patch_embed", 4, 3));
  for (std::size_t s = 0; s < 4; ++s) {
    const auto stage = stage_name(s);
    if (s > 0) {
      x = lin(t, norm(t, x, bind, stage + ".down.ln"), bind, stage + ".down.proj");
      x = ag::max_pool2(t, x);
    }
    for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) {
      x = transformer_block(t, x, bind, stage + ".block" + std::to_string(b), spec.heads, spec.stage_windows[s]);
    }
    levels[s] = x;
  }
  return levels;
}

std::array<ag::Var, 4> encode_cnn(ag::Tape& t, ag::Var image, const EncoderSpec& spec, ag::ParamBinder& bind) {
  std::array<ag::Var, 4> levels;
  auto x = ag::relu(t, conv(t, image, bind, kPrefix + "stem1", 2, 1));
  x = ag::relu(t, conv(t, x, bind, kPrefix + "stem2", 2, 1));
  for (std::size_t s = 0; s < 4; ++s) {
    const auto stage = stage_name(s);
    if (s > 0) x = ag::relu(t, conv(t, x, bind, stage + ".down", 2, 1));
    for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) {
      const auto block = stage + ".block" + std::to_string(b);
      auto h = ag::relu(t, conv(t, x, bind, block + ".conv1", 1, 1));
      x = ag::relu(t, ag::add(t, x, conv(t, h, bind, block + ".conv2", 1, 1)));
    }
    levels[s] = x;
  }
  return levels;
}

std::array<ag::Var, 4> encode_vit(ag::Tape& t, ag::Var image, const EncoderSpec& spec, ag::ParamBinder& bind) {
  const auto& iv = t.value(image);
  const std::size_t h = iv.dim(0), w = iv.dim(1);
  auto x = add_position_code(t, conv(t, image, bind, kPrefix + "patch_embed", 16, 0));
  for (std::size_t b = 0; b < total_depth(spec); ++b) {
    x = transformer_block(t, x, bind, kPrefix + "blocks.block" + std::to_string(b), spec.heads, 0);
  }
  std::array<ag::Var, 4> levels;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t stride = std::size_t{4} << s;
    auto resized = ag::resize_bilinear(t, x, h / stride, w / stride);
    levels[s] = lin(t, resized, bind, kPrefix + "neck" + std::to_string(s + 1));
  }
  return levels;
}

}  // namespace

EncoderSpec make_encoder_spec(const ExperimentConfig& config) {
  EncoderSpec spec;
  spec.kind = config.encoder_kind;
  spec.stage_channels = config.stage_channels;
  spec.heads = config.heads;
  return spec;
}

nlohmann::json to_json(const EncoderSpec& spec) {
  return {{"kind", to_string(spec.kind)},     {"stage_depths", spec.stage_depths},
          {"stage_channels", spec.stage_channels}, {"heads", spec.heads},
          {"stage_windows", spec.stage_windows},   {"frozen", spec.frozen}};
}

EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
  try {
    EncoderSpec spec;
    spec.kind = parse_encoder_kind(j.at("kind").get<std::string>());
    spec.stage_depths = j.at("stage_depths").get<std::array<std::size_t, 4>>();
    spec.stage_channels = j.at("stage_channels").get<std::array<std::size_t, 4>>();
    spec.heads = j.at("heads").get<std::size_t>();
    spec.stage_windows = j.at("stage_windows").get<std::array<std::size_t, 4>>();
    spec.frozen = j.at("frozen").get<bool>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed encoder spec: ") + e.what());
  }
}

ImageTensor adapt_channels(const ImageTensor& image) {
  if (image.channels() == 3) return image;
  if (image.channels() != 1) {
    throw ShapeError("adapt_channels expects 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  ImageTensor out(image.height(), image.width(), 3);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const double v = image.at(y, x);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  }
  return out;
}

std::array<ag::Var, 4> encode(ag::Tape& tape, ag::Var image, const EncoderSpec& spec, ag::ParamBinder& bind) {
  check_spec(spec);
  const auto& iv = tape.value(image);
  if (iv.rank() != 3 || iv.dim(2) != 3) {
    throw ShapeError("encoder input must be (h, w, 3), got " + shape_to_string(iv.shape()));
  }
  for (std::size_t axis = 0; axis < 2; ++axis) {
    if (iv.dim(axis) == 0 || iv.dim(axis) % kTotalStride != 0) {
      throw ShapeError(std::string("encoder input ") + (axis == 0 ? "height " : "width ") +
                       std::to_string(iv.dim(axis)) + " must be divisible by " + std::to_string(kTotalStride));
    }
  }
  switch (spec.kind) {
    case EncoderKind::hiera_style: return encode_hiera(tape, image, spec, bind);
    case EncoderKind::multiscale_cnn: return encode_cnn(tape, image, spec, bind);
    case EncoderKind::single_scale_vit: return encode_vit(tape, image, spec, bind);
  }
  throw ConfigError("unknown encoder kind");
}

FeaturePyramid encode(const ImageTensor& image, const EncoderSpec& spec, const ParameterSet& params) {
  const auto rgb = adapt_channels(image);
  ag::Tape tape(false);
  ag::ParamBinder bind(tape, params);
  const auto levels = encode(tape, tape.constant(rgb.tensor()), spec, bind);
  return FeaturePyramid({tape.value(levels[0]), tape.value(levels[1]), tape.value(levels[2]), tape.value(levels[3])});
}

ParameterSet init_random(const EncoderSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  Rng rng(seed);
  ParameterSet ps;
  const bool trainable = !spec.frozen;
  const auto& ch = spec.stage_channels;
  switch (spec.kind) {
    case EncoderKind::hiera_style:
      add_conv(ps, kPrefix + "patch_embed", 7, 3, ch[0], rng, trainable, 1.0);
      for (std::size_t s = 0; s < 4; ++s) {
        if (s > 0) {
          add_layer_norm(ps, stage_name(s) + ".down.ln", ch[s - 1], trainable);
          add_linear(ps, stage_name(s) + ".down.proj", ch[s - 1], ch[s], rng, trainable);
        }
        for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) {
          add_transformer_block(ps, stage_name(s) + ".block" + std::to_string(b), ch[s], rng, trainable);
        }
      }
      break;
    case EncoderKind::multiscale_cnn: {
      const double he = std::sqrt(2.0);
      add_conv(ps, kPrefix + "stem1", 3, 3, ch[0], rng, trainable, he);
      add_conv(ps, kPrefix + "stem2", 3, ch[0], ch[0], rng, trainable, he);
      for (std::size_t s = 0; s < 4; ++s) {
        if (s > 0) add_conv(ps, stage_name(s) + ".down", 3, ch[s - 1], ch[s], rng, trainable, he);
        for (std::size_t b = 0; b < spec.stage_depths[s]; ++b) {
          const auto block = stage_name(s) + ".block" + std::to_string(b);
          add_conv(ps, block + ".conv1", 3, ch[s], ch[s], rng, trainable, he);
          add_conv(ps, block + ".conv2", 3, ch[s], ch[s], rng, trainable, 0.5);
        }
      }
      break;
    }
    case EncoderKind::single_scale_vit: {
      const std::size_t d = vit_dim(spec);
      add_conv(ps, kPrefix + "patch_embed", 16, 3, d, rng, trainable, 1.0);
      for (std::size_t b = 0; b < total_depth(spec); ++b) {
        add_transformer_block(ps, kPrefix + "blocks.block" + std::to_string(b), d, rng, trainable);
      }
      for (std::size_t s = 0; s < 4; ++s) {
        add_linear(ps, kPrefix + "neck" + std::to_string(s + 1), d, ch[s], rng, trainable);
      }
      break;
    }
  }
  return ps;
}

std::map<std::string, Shape> encoder_parameter_shapes(const EncoderSpec& spec) {
  std::map<std::string, Shape> shapes;
  for (const auto& [name, p] : init_random(spec, 0)) shapes.emplace(name, p.value.shape());
  return shapes;
}

std::vector<std::string> encoder_mismatches(const ParameterSet& params, const EncoderSpec& spec) {
  std::vector<std::string> problems;
  const auto expected = encoder_parameter_shapes(spec);
  for (const auto& [name, shape] : expected) {
    if (!params.contains(name)) {
      problems.push_back("missing array '" + name + "' " + shape_to_string(shape));
    } else if (params.at(name).value.shape() != shape) {
      problems.push_back("array '" + name + "' has shape " + shape_to_string(params.at(name).value.shape()) +
                         ", expected " + shape_to_string(shape));
    }
  }
  for (const auto& [name, p] : params) {
    if (!expected.contains(name)) problems.push_back("unexpected array '" + name + "'");
  }
  return problems;
}

void save_encoder(const std::filesystem::path& path, const EncoderSpec& spec, const ParameterSet& params) {
  Archive archive;
  archive.metadata = {{"kind", "encoder"}, {"encoder_spec", to_json(spec)}};
  store_parameters(archive, params, "");
  write_archive(path, archive);
}

ParameterSet load_pretrained(const std::filesystem::path& path, const EncoderSpec& spec) {
  if (!std::filesystem::exists(path)) throw IoError("encoder checkpoint not found: " + path.string());
  const Archive archive = read_archive(path);
  if (archive.metadata.contains("encoder_spec")) {
    const auto declared = encoder_spec_from_json(archive.metadata.at("encoder_spec"));
    if (declared.kind != spec.kind) {
      throw ShapeError("checkpoint " + path.string() + " declares encoder kind " + to_string(declared.kind) +
                       ", expected " + to_string(spec.kind));
    }
  }
  ParameterSet params = load_parameters(archive, kPrefix);
  ParameterSet renamed;
  for (const auto& [name, p] : params) renamed.add(kPrefix + name, p.value, !spec.frozen);
  const auto problems = encoder_mismatches(renamed, spec);
  if (!problems.empty()) {
    std::ostringstream os;
    os << "encoder checkpoint " << path.string() << " does not match spec:";
    for (const auto& p : problems) os << "\n  " << p;
    throw ShapeError(os.str());
  }
  return renamed;
}

}  // namespace i2i
