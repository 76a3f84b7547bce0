#pragma once

#include <functional>
#include <string>
#include <vector>

#include "i2i/data/pipeline.hpp"
#include "i2i/metrics/metrics.hpp"
#include "i2i/training/trainer.hpp"

namespace i2i {

/// Maps a test pair to a predicted target image.
using Generator = std::function<ImageTensor(const PairedSlice&)>;

/// Returns the source image unchanged; the floor a translator must beat.
Generator identity_generator();
/// Returns the target image; scores psnr = inf, ssim = 1, nrmse = 0.
Generator oracle_generator();
/// Runs the checkpoint's generator on each source slice.
Generator checkpoint_generator(const Checkpoint& checkpoint);

/// Scores every pair and aggregates. Throws SplitViolation when a pair's
/// subject is in train_subjects.
MetricReport evaluate(const Generator& generator, const std::vector<PairedSlice>& test_pairs,
                      const std::vector<std::string>& train_subjects, const std::string& model,
                      const std::string& task);

/// Evaluates a checkpoint on the dataset's test split, checking the split
/// against the subjects the checkpoint was trained on.
MetricReport evaluate_checkpoint(const Checkpoint& checkpoint, const PairedDataset& dataset, const std::string& model);

}  // namespace i2i
