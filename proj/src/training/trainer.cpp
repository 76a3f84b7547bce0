#include "i2i/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/archive.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/rng.hpp"
#include "i2i/data/dataset_io.hpp"
#include "i2i/encoders/encoder.hpp"

namespace fs = std::filesystem;

namespace i2i {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kDiscriminatorStream = 3;

bool encoder_frozen(const ParameterSet& generator) {
  for (const auto& [name, p] : generator) {
    if (name.rfind("encoder.", 0) == 0 && p.trainable) return false;
  }
  return true;
}

std::string describe(const LossRecord& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "l_img=%g l_gan_g=%g l_gan_d=%g total_g=%g", r.l_img, r.l_gan_g, r.l_gan_d,
                r.total_g);
  return buf;
}

bool finite(const LossRecord& r) {
  return std::isfinite(r.l_img) && std::isfinite(r.l_gan_g) && std::isfinite(r.l_gan_d) && std::isfinite(r.total_g);
}

// Generator output for one sample, recorded on tape.
ag::Var generate(ag::Tape& tape, const PairedSlice& pair, const GeneratorSpec& spec, const ParameterSet& params,
                 ag::ParamBinder& bind, FeatureCache* cache) {
  std::array<ag::Var, 4> levels;
  if (cache) {
    const auto& pyramid = cache->get_or_compute(pair, spec, params);
    for (std::size_t i = 0; i < 4; ++i) levels[i] = tape.constant(pyramid.level(i));
  } else {
    levels = encode(tape, tape.constant(adapt_channels(pair.source).tensor()), spec.encoder, bind);
  }
  return decode(tape, levels, spec.decoder, bind);
}

void store_adam(Archive& ar, const AdamState& s, const std::string& prefix) {
  for (const auto& [name, t] : s.m) ar.arrays.add(prefix + ".m/" + name, t, false);
  for (const auto& [name, t] : s.v) ar.arrays.add(prefix + ".v/" + name, t, false);
}

AdamState load_adam(const Archive& ar, const std::string& prefix, std::uint64_t t) {
  AdamState s;
  s.t = t;
  for (const auto& [name, p] : load_parameters(ar, prefix + ".m/")) s.m.emplace(name, p.value);
  for (const auto& [name, p] : load_parameters(ar, prefix + ".v/")) s.v.emplace(name, p.value);
  return s;
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.i2i", epoch);
  return buf;
}

}  // namespace

ModelSpec make_model_spec(const ExperimentConfig& config) {
  ModelSpec spec;
  spec.generator = make_generator_spec(config);
  spec.discriminator.backbone = DiscriminatorBackbone::small_cnn;
  spec.discriminator.encoder = spec.generator.encoder;
  return spec;
}

nlohmann::json to_json(const ModelSpec& spec) {
  const auto& g = spec.generator;
  const auto& d = spec.discriminator;
  return {{"encoder", to_json(g.encoder)},
          {"decoder",
           {{"stage_channels", g.decoder.stage_channels},
            {"heads", g.decoder.heads},
            {"window_schedule", g.decoder.window_schedule}}},
          {"discriminator",
           {{"backbone", d.backbone == DiscriminatorBackbone::small_cnn ? "small_cnn" : "pretrained_encoder"},
            {"frozen_backbone", d.frozen_backbone},
            {"cnn_channels", d.cnn_channels},
            {"encoder", to_json(d.encoder)}}}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.generator.encoder = encoder_spec_from_json(j.at("encoder"));
    const auto& dec = j.at("decoder");
    spec.generator.decoder.stage_channels = dec.at("stage_channels").get<std::array<std::size_t, 4>>();
    spec.generator.decoder.heads = dec.at("heads").get<std::size_t>();
    spec.generator.decoder.window_schedule = dec.at("window_schedule").get<std::array<std::size_t, 3>>();
    const auto& d = j.at("discriminator");
    const auto backbone = d.at("backbone").get<std::string>();
    if (backbone == "small_cnn") {
      spec.discriminator.backbone = DiscriminatorBackbone::small_cnn;
    } else if (backbone == "pretrained_encoder") {
      spec.discriminator.backbone = DiscriminatorBackbone::pretrained_encoder;
    } else {
      throw ConfigError("unknown discriminator backbone '" + backbone + "'");
    }
    spec.discriminator.frozen_backbone = d.at("frozen_backbone").get<bool>();
    spec.discriminator.cnn_channels = d.at("cnn_channels").get<std::array<std::size_t, 4>>();
    spec.discriminator.encoder = encoder_spec_from_json(d.at("encoder"));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
}

TrainState init_train_state(const ExperimentConfig& config, const ModelSpec& spec,
                            const std::optional<fs::path>& encoder_checkpoint) {
  TrainState s;
  s.seed = config.seed;
  s.generator = init_generator(spec.generator, config.seed);
  if (encoder_checkpoint) {
    const ParameterSet pretrained = load_pretrained(*encoder_checkpoint, spec.generator.encoder);
    for (const auto& [name, p] : pretrained) {
      s.generator.assign(name, p.value);
      s.generator.at(name).trainable = p.trainable;
    }
  }
  s.discriminator = build_discriminator(spec.discriminator, mix_seed(config.seed, kDiscriminatorStream));
  s.generator_opt = init_adam(s.generator);
  s.discriminator_opt = init_adam(s.discriminator);
  return s;
}

const FeaturePyramid* FeatureCache::find(const PairedSlice& pair) const {
  const auto it = entries_.find({pair.subject_id, pair.slice_index});
  return it == entries_.end() ? nullptr : &it->second;
}

const FeaturePyramid& FeatureCache::get_or_compute(const PairedSlice& pair, const GeneratorSpec& spec,
                                                   const ParameterSet& params) {
  const std::pair<std::string, std::size_t> key{pair.subject_id, pair.slice_index};
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    it = entries_.emplace(key, encode(adapt_channels(pair.source), spec.encoder, params)).first;
  }
  return it->second;
}

LossRecord train_step(TrainState& state, const std::vector<const PairedSlice*>& batch, const ExperimentConfig& config,
                      const ModelSpec& spec, FeatureCache* cache) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  if (cache && !encoder_frozen(state.generator)) cache = nullptr;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const AdamConfig adam{config.learning_rate};

  // Generator forward, shared by both updates. The discriminator update reads
  // only the values; the generator update continues on this tape.
  ag::Tape g_tape;
  ag::ParamBinder g_bind(g_tape, state.generator);
  std::vector<ag::Var> fakes;
  for (const auto* pair : batch) fakes.push_back(generate(g_tape, *pair, spec.generator, state.generator, g_bind, cache));

  LossRecord rec;
  ParameterSet next_disc = state.discriminator;
  AdamState next_disc_opt = state.discriminator_opt;
  {
    ag::Tape d_tape;
    ag::Var total{};
    bool have_total = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto real = discriminate(d_tape, d_tape.constant(batch[i]->target.tensor()), spec.discriminator,
                                     state.discriminator);
      const auto fake = discriminate(d_tape, d_tape.constant(g_tape.value(fakes[i])), spec.discriminator,
                                     state.discriminator);
      auto term = ag::add(d_tape, discriminator_term(d_tape, real, true), discriminator_term(d_tape, fake, false));
      term = ag::scale(d_tape, term, inv_b);
      total = have_total ? ag::add(d_tape, total, term) : term;
      have_total = true;
    }
    rec.l_gan_d = d_tape.value(total)[0];
    if (!std::isfinite(rec.l_gan_d)) {
      throw NumericalError("non-finite discriminator loss at step " + std::to_string(state.step + 1) + ": " +
                           describe(rec));
    }
    d_tape.backward(total);
    adam_step(next_disc, next_disc_opt, d_tape.parameter_gradients(), adam);
  }

  ParameterSet frozen_disc = next_disc;
  frozen_disc.set_trainable("", false);
  ag::Var total{};
  double l_img = 0.0, l_gan = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto img = ag::l1_loss(g_tape, fakes[i], batch[i]->target.tensor());
    const auto logit = discriminate(g_tape, fakes[i], spec.discriminator, frozen_disc);
    const auto adv = generator_adversarial_term(g_tape, logit);
    l_img += inv_b * g_tape.value(img)[0];
    l_gan += inv_b * g_tape.value(adv)[0];
    auto term = ag::add(g_tape, ag::scale(g_tape, img, config.lambda_img), ag::scale(g_tape, adv, config.lambda_gan));
    term = ag::scale(g_tape, term, inv_b);
    total = i == 0 ? term : ag::add(g_tape, total, term);
  }
  rec.l_img = l_img;
  rec.l_gan_g = l_gan;
  rec.total_g = g_tape.value(total)[0];
  if (!finite(rec)) {
    throw NumericalError("non-finite generator loss at step " + std::to_string(state.step + 1) + ": " + describe(rec));
  }
  g_tape.backward(total);
  adam_step(state.generator, state.generator_opt, g_tape.parameter_gradients(), adam);
  state.discriminator = std::move(next_disc);
  state.discriminator_opt = std::move(next_disc_opt);
  state.step += 1;
  return rec;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed, kShuffleStream), epoch));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

TrainResult train(const ExperimentConfig& config, const ModelSpec& spec, const PairedDataset& dataset,
                  TrainState state, const TrainOptions& options) {
  if (dataset.train.empty()) throw DataError("training split is empty");
  const std::size_t last = options.stop_after_epoch ? std::min(options.stop_after_epoch, config.epochs) : config.epochs;
  if (options.out_dir) fs::create_directories(*options.out_dir);
  const std::string hash = dataset_hash(dataset);

  FeatureCache cache;
  TrainResult result;
  while (state.epoch < last) {
    const auto batches = epoch_batches(dataset.train.size(), config.batch_size, state.seed, state.epoch);
    double sum_img = 0.0;
    for (const auto& idx : batches) {
      std::vector<const PairedSlice*> batch;
      for (auto i : idx) batch.push_back(&dataset.train[i]);
      const LossRecord rec = train_step(state, batch, config, spec, &cache);
      state.history.push_back({state.step, state.epoch + 1, rec});
      sum_img += rec.l_img;
    }
    state.epoch += 1;
    if (options.out_dir) {
      const fs::path path = *options.out_dir / checkpoint_name(state.epoch);
      save_checkpoint(path, {config, spec, state, dataset.train_subjects, hash});
      write_loss_history(*options.out_dir / "loss_history.csv", state.history);
      result.final_checkpoint = path;
    }
    if (options.on_epoch) options.on_epoch(state.epoch, sum_img / static_cast<double>(batches.size()));
  }
  if (options.out_dir) {
    const fs::path path = *options.out_dir / "final.i2i";
    save_checkpoint(path, {config, spec, state, dataset.train_subjects, hash});
    write_loss_history(*options.out_dir / "loss_history.csv", state.history);
    result.final_checkpoint = path;
  }
  result.state = std::move(state);
  return result;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  Archive ar;
  const auto& s = ck.state;
  ar.metadata = {{"kind", "checkpoint"},
                 {"config", to_json(ck.config)},
                 {"model", to_json(ck.spec)},
                 {"epoch", s.epoch},
                 {"step", s.step},
                 {"seed", s.seed},
                 {"generator_adam_t", s.generator_opt.t},
                 {"discriminator_adam_t", s.discriminator_opt.t},
                 {"train_subjects", ck.train_subjects},
                 {"dataset_hash", ck.dataset_hash}};
  store_parameters(ar, s.generator, "generator/");
  store_parameters(ar, s.discriminator, "discriminator/");
  store_adam(ar, s.generator_opt, "opt.generator");
  store_adam(ar, s.discriminator_opt, "opt.discriminator");
  Tensor losses({s.history.size(), 4});
  Tensor steps({s.history.size(), 2});
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& h = s.history[i];
    losses.data()[4 * i + 0] = h.loss.l_img;
    losses.data()[4 * i + 1] = h.loss.l_gan_g;
    losses.data()[4 * i + 2] = h.loss.l_gan_d;
    losses.data()[4 * i + 3] = h.loss.total_g;
    steps.data()[2 * i + 0] = static_cast<double>(h.step);
    steps.data()[2 * i + 1] = static_cast<double>(h.epoch);
  }
  ar.arrays.add("history/losses", std::move(losses), false);
  ar.arrays.add("history/steps", std::move(steps), false);
  write_archive(path, ar);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const Archive ar = read_archive(path);
  const auto& m = ar.metadata;
  if (m.value("kind", "") != "checkpoint") throw IoError(path.string() + " is not a training checkpoint");
  try {
    Checkpoint ck;
    ck.config = config_from_json(m.at("config"));
    ck.spec = model_spec_from_json(m.at("model"));
    ck.train_subjects = m.at("train_subjects").get<std::vector<std::string>>();
    ck.dataset_hash = m.at("dataset_hash").get<std::string>();
    auto& s = ck.state;
    s.epoch = m.at("epoch").get<std::size_t>();
    s.step = m.at("step").get<std::size_t>();
    s.seed = m.at("seed").get<std::uint64_t>();
    s.generator = load_parameters(ar, "generator/");
    s.discriminator = load_parameters(ar, "discriminator/");
    s.generator_opt = load_adam(ar, "opt.generator", m.at("generator_adam_t").get<std::uint64_t>());
    s.discriminator_opt = load_adam(ar, "opt.discriminator", m.at("discriminator_adam_t").get<std::uint64_t>());
    const auto& losses = ar.arrays.at("history/losses").value;
    const auto& steps = ar.arrays.at("history/steps").value;
    const std::size_t n = losses.dim(0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* l = losses.data() + 4 * i;
      s.history.push_back({static_cast<std::size_t>(steps.data()[2 * i]),
                           static_cast<std::size_t>(steps.data()[2 * i + 1]),
                           {l[0], l[1], l[2], l[3]}});
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint metadata: " + e.what());
  } catch (const StructuralError& e) {
    throw IoError(path.string() + ": incomplete checkpoint: " + e.what());
  }
}

void write_loss_history(const fs::path& path, const std::vector<StepLog>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "step,epoch,l_img,l_gan_g,l_gan_d,total_g\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", h.step, h.epoch, h.loss.l_img,
                  h.loss.l_gan_g, h.loss.l_gan_d, h.loss.total_g);
    os << buf;
  }
}

}  // namespace i2i
