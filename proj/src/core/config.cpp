#include "i2i/core/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is unreliable on older libstdc++; strtod is exact enough.
    std::string tmp(value);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
      throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + tmp + "' as a number");
    }
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                        "' as a non-negative integer");
    }
  }
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> parse_list(std::string_view key, std::string_view value) {
  std::array<std::size_t, N> out{};
  std::size_t i = 0;
  while (true) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (i >= N) break;
    out[i++] = parse_number<std::size_t>(key, item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (i != N || value.find(',') != std::string_view::npos) {
    throw ConfigError("config key '" + std::string(key) + "' expects exactly " + std::to_string(N) + " values");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <std::size_t N>
std::string format_list(const std::array<std::size_t, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::hiera_style: return "hiera_style";
    case EncoderKind::multiscale_cnn: return "multiscale_cnn";
    case EncoderKind::single_scale_vit: return "single_scale_vit";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "hiera_style" || name == "hiera") return EncoderKind::hiera_style;
  if (name == "multiscale_cnn" || name == "cnn") return EncoderKind::multiscale_cnn;
  if (name == "single_scale_vit" || name == "vit") return EncoderKind::single_scale_vit;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "'");
}

std::array<std::size_t, 3> decoder_block_extents(std::size_t image_size) {
  return {image_size / 16, image_size / 8, image_size / 4};
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> v;
  if (c.image_size == 0 || c.image_size % kTotalStride != 0) {
    v.push_back("image_size " + std::to_string(c.image_size) + " must be a positive multiple of " +
                std::to_string(kTotalStride));
  }
  if (!(c.learning_rate > 0.0)) v.push_back("learning_rate must be > 0");
  if (c.batch_size == 0) v.push_back("batch_size must be >= 1");
  if (c.epochs == 0) v.push_back("epochs must be >= 1");
  if (!(c.lambda_img > 0.0)) v.push_back("lambda_img must be > 0 (got " + format_double(c.lambda_img) + ")");
  if (!(c.lambda_gan >= 0.0)) v.push_back("lambda_gan must be >= 0 (got " + format_double(c.lambda_gan) + ")");
  if (c.heads == 0) v.push_back("heads must be >= 1");

  for (std::size_t i = 0; i < 4; ++i) {
    if (c.stage_channels[i] == 0) {
      v.push_back("stage_channels[" + std::to_string(i) + "] must be positive");
    } else if (c.heads > 0 && c.stage_channels[i] % c.heads != 0) {
      v.push_back("stage_channels[" + std::to_string(i) + "] = " + std::to_string(c.stage_channels[i]) +
                  " is not divisible by heads = " + std::to_string(c.heads));
    }
    if (i > 0 && c.stage_channels[i] < c.stage_channels[i - 1]) {
      v.push_back("stage_channels must be non-decreasing (stage " + std::to_string(i + 1) + ")");
    }
  }

  if (c.image_size > 0 && c.image_size % kTotalStride == 0) {
    const auto extents = decoder_block_extents(c.image_size);
    double prev_fraction = 2.0;
    for (std::size_t b = 0; b < 3; ++b) {
      const auto w = c.window_schedule[b];
      if (w == 0) {
        v.push_back("window_schedule[" + std::to_string(b) + "] must be positive");
        continue;
      }
      const auto ew = effective_window(w, extents[b]);
      if (extents[b] % ew != 0) {
        v.push_back("window_schedule[" + std::to_string(b) + "] = " + std::to_string(w) +
                    " violates divisibility: does not divide the " + std::to_string(extents[b]) +
                    "-wide feature map of decoder block " + std::to_string(b + 1));
      }
      const double fraction = static_cast<double>(ew) / static_cast<double>(extents[b]);
      if (fraction > prev_fraction) {
        v.push_back("window_schedule[" + std::to_string(b) + "] covers a larger fraction of its map than the "
                    "coarser block before it; coarser levels must use relatively larger windows");
      }
      prev_fraction = fraction;
    }
  }
  return v;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "image_size") c.image_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "lambda_img") c.lambda_img = parse_number<double>(key, value);
    else if (key == "lambda_gan") c.lambda_gan = parse_number<double>(key, value);
    else if (key == "encoder_kind") c.encoder_kind = parse_encoder_kind(value);
    else if (key == "window_schedule") c.window_schedule = parse_list<3>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "heads") c.heads = parse_number<std::size_t>(key, value);
    else if (key == "stage_channels") c.stage_channels = parse_list<4>(key, value);
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "image_size = " << c.image_size << '\n'
     << "learning_rate = " << format_double(c.learning_rate) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "epochs = " << c.epochs << '\n'
     << "lambda_img = " << format_double(c.lambda_img) << '\n'
     << "lambda_gan = " << format_double(c.lambda_gan) << '\n'
     << "encoder_kind = " << to_string(c.encoder_kind) << '\n'
     << "window_schedule = " << format_list(c.window_schedule) << '\n'
     << "seed = " << c.seed << '\n'
     << "heads = " << c.heads << '\n'
     << "stage_channels = " << format_list(c.stage_channels) << '\n';
  return os.str();
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write config file " + path.string());
  os << format_config(config);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"image_size", c.image_size},           {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},           {"epochs", c.epochs},
          {"lambda_img", c.lambda_img},           {"lambda_gan", c.lambda_gan},
          {"encoder_kind", to_string(c.encoder_kind)}, {"window_schedule", c.window_schedule},
          {"seed", c.seed},                       {"heads", c.heads},
          {"stage_channels", c.stage_channels}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.image_size = j.at("image_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lambda_img = j.at("lambda_img").get<double>();
    c.lambda_gan = j.at("lambda_gan").get<double>();
    c.encoder_kind = parse_encoder_kind(j.at("encoder_kind").get<std::string>());
    c.window_schedule = j.at("window_schedule").get<std::array<std::size_t, 3>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.stage_channels = j.at("stage_channels").get<std::array<std::size_t, 4>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config record: ") + e.what());
  }
}

}  // namespace i2i
