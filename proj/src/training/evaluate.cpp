#include "i2i/training/evaluate.hpp"

#include <set>

#include "i2i/core/errors.hpp"

namespace i2i {

Generator identity_generator() {
  return [](const PairedSlice& p) { return p.source; };
}

Generator oracle_generator() {
  return [](const PairedSlice& p) { return p.target; };
}

Generator checkpoint_generator(const Checkpoint& checkpoint) {
  return [spec = checkpoint.spec.generator, params = checkpoint.state.generator](const PairedSlice& p) {
    return translate(p.source, spec, params);
  };
}

MetricReport evaluate(const Generator& generator, const std::vector<PairedSlice>& test_pairs,
                      const std::vector<std::string>& train_subjects, const std::string& model,
                      const std::string& task) {
  const std::set<std::string> train(train_subjects.begin(), train_subjects.end());
  for (const auto& p : test_pairs) {
    if (train.count(p.subject_id)) {
      throw SplitViolation("evaluation set contains training subject " + p.subject_id);
    }
  }
  std::vector<ImageMetrics> per_image;
  per_image.reserve(test_pairs.size());
  for (const auto& p : test_pairs) per_image.push_back(measure(generator(p), p.target, p.subject_id, p.slice_index));
  return aggregate(model, task, std::move(per_image));
}

MetricReport evaluate_checkpoint(const Checkpoint& checkpoint, const PairedDataset& dataset, const std::string& model) {
  std::vector<std::string> train = checkpoint.train_subjects;
  train.insert(train.end(), dataset.train_subjects.begin(), dataset.train_subjects.end());
  return evaluate(checkpoint_generator(checkpoint), dataset.test, train, model, dataset.task.label());
}

}  // namespace i2i
