#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "i2i/adversary/discriminator.hpp"
#include "i2i/core/config.hpp"
#include "i2i/core/feature_pyramid.hpp"
#include "i2i/data/pipeline.hpp"
#include "i2i/decoder/decoder.hpp"
#include "i2i/losses/losses.hpp"
#include "i2i/training/adam.hpp"

namespace i2i {

struct ModelSpec {
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
};

/// Generator and small-CNN discriminator shaped by the config.
ModelSpec make_model_spec(const ExperimentConfig& config);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct StepLog {
  std::size_t step = 0;   // 1-based global step
  std::size_t epoch = 0;  // 1-based epoch the step belongs to
  LossRecord loss;
};

struct TrainState {
  ParameterSet generator;
  ParameterSet discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // completed steps
  /// Base seed; the shuffle of epoch e is derived from (seed, e), so seed and
  /// epoch together are the whole RNG state.
  std::uint64_t seed = 0;
  std::vector<StepLog> history;
};

/// Fresh parameters and zero optimizer moments for the config's seed.
/// With encoder_checkpoint the generator encoder comes from that file.
TrainState init_train_state(const ExperimentConfig& config, const ModelSpec& spec,
                            const std::optional<std::filesystem::path>& encoder_checkpoint = std::nullopt);

/// Encoder outputs keyed by (subject, slice); valid only while the encoder is frozen.
class FeatureCache {
 public:
  const FeaturePyramid* find(const PairedSlice& pair) const;
  const FeaturePyramid& get_or_compute(const PairedSlice& pair, const GeneratorSpec& spec, const ParameterSet& params);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::size_t>, FeaturePyramid> entries_;
};

/// One discriminator update on real targets vs. detached generator outputs,
/// then one generator update on lambda_img * L1 + lambda_gan * adversarial.
/// Both losses are batch means. Frozen parameters are never written.
/// Throws NumericalError when any loss component is not finite; state is
/// unchanged in that case. The cache is optional and used only when every
/// encoder parameter is frozen.
LossRecord train_step(TrainState& state, const std::vector<const PairedSlice*>& batch, const ExperimentConfig& config,
                      const ModelSpec& spec, FeatureCache* cache = nullptr);

/// Batches of epoch e (0-based): a permutation of [0, n) seeded by (seed, e),
/// cut into ceil(n / batch_size) consecutive runs.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch);

struct TrainOptions {
  /// Checkpoints (epoch_NNN.i2i, final.i2i) and loss_history.csv go here when set.
  std::optional<std::filesystem::path> out_dir;
  /// Stop after this many completed epochs (0 = config.epochs).
  std::size_t stop_after_epoch = 0;
  std::function<void(std::size_t epoch, double mean_l_img)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::optional<std::filesystem::path> final_checkpoint;
};

/// Runs epochs from state.epoch up to config.epochs (or stop_after_epoch).
/// Throws DataError on an empty training split.
TrainResult train(const ExperimentConfig& config, const ModelSpec& spec, const PairedDataset& dataset,
                  TrainState state, const TrainOptions& options = {});

struct Checkpoint {
  ExperimentConfig config;
  ModelSpec spec;
  TrainState state;
  std::vector<std::string> train_subjects;
  std::string dataset_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// "step,epoch,l_img,l_gan_g,l_gan_d,total_g" plus one row per step, values
/// printed with 17 significant digits.
void write_loss_history(const std::filesystem::path& path, const std::vector<StepLog>& history);

}  // namespace i2i
