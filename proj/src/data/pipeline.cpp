#include "i2i/data/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "i2i/core/errors.hpp"
#include "i2i/core/rng.hpp"

namespace i2i {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::T1: return "T1";
    case Modality::T2: return "T2";
    case Modality::PD: return "PD";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (s == "T1") return Modality::T1;
  if (s == "T2") return Modality::T2;
  if (s == "PD") return Modality::PD;
  throw ConfigError("unknown modality '" + std::string(name) + "' (expected T1, T2 or PD)");
}

void validate_volume(const Volume& v) {
  const std::size_t n = v.dims[0] * v.dims[1] * v.dims[2];
  if (n == 0) throw DataError("volume " + v.subject_id + "/" + to_string(v.modality) + " is empty");
  if (v.voxels.size() != n) {
    throw DataError("volume " + v.subject_id + "/" + to_string(v.modality) + " has " +
                    std::to_string(v.voxels.size()) + " voxels but dims imply " + std::to_string(n));
  }
  for (double s : v.spacing) {
    if (!(s > 0.0)) throw DataError("volume " + v.subject_id + "/" + to_string(v.modality) + " has non-positive spacing");
  }
}

Volume normalize_volume(const Volume& volume, double clip_percentile) {
  validate_volume(volume);
  if (!(clip_percentile > 0.0 && clip_percentile <= 100.0)) {
    throw DataError("clip percentile must lie in (0, 100]");
  }
  std::vector<double> sorted = volume.voxels;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double top = sorted.back();
  if (!std::isfinite(lo) || !std::isfinite(top)) throw DataError("volume " + volume.subject_id + " has non-finite voxels");
  if (lo == top) throw DataError("volume " + volume.subject_id + "/" + to_string(volume.modality) + " is constant");

  const double rank = clip_percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(rank));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(below);
  double hi = sorted[below] + frac * (sorted[above] - sorted[below]);
  if (!(hi > lo)) hi = top;

  Volume out = volume;
  const double span = hi - lo;
  for (auto& x : out.voxels) x = (std::min(x, hi) - lo) / span;
  return out;
}

double foreground_fraction(const Volume& volume, std::size_t z) {
  const std::size_t plane = volume.dims[0] * volume.dims[1];
  const double* p = volume.voxels.data() + z * plane;
  std::size_t fg = 0;
  for (std::size_t i = 0; i < plane; ++i) fg += p[i] > kForegroundLevel ? 1 : 0;
  return static_cast<double>(fg) / static_cast<double>(plane);
}

ImageTensor axial_slice(const Volume& volume, std::size_t z) {
  if (z >= volume.dims[2]) throw ShapeError("slice index " + std::to_string(z) + " out of range");
  const std::size_t nx = volume.dims[0], ny = volume.dims[1];
  ImageTensor img(ny, nx, 1);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) img.at(y, x) = volume.at(x, y, z);
  }
  return img;
}

ImageTensor fit_to_square(const ImageTensor& image, std::size_t size) {
  const std::size_t h = image.height(), w = image.width(), c = image.channels();
  if (h == size && w == size) return image;
  ImageTensor out(size, size, c);
  // Offsets of the copied region in source and destination along each axis.
  auto span = [size](std::size_t extent) {
    if (extent >= size) return std::array<std::size_t, 3>{(extent - size) / 2, 0, size};
    return std::array<std::size_t, 3>{0, (size - extent) / 2, extent};
  };
  const auto [sy, dy, ny] = span(h);
  const auto [sx, dx, nx] = span(w);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) out.at(dy + y, dx + x, ch) = image.at(sy + y, sx + x, ch);
    }
  }
  return out;
}

std::vector<SliceImage> extract_slices(const Volume& volume, double fg_threshold, std::size_t image_size) {
  validate_volume(volume);
  std::vector<SliceImage> out;
  for (std::size_t z = 0; z < volume.dims[2]; ++z) {
    if (foreground_fraction(volume, z) <= fg_threshold) continue;
    ImageTensor img = axial_slice(volume, z);
    if (image_size > 0) img = fit_to_square(img, image_size);
    out.push_back({z, std::move(img)});
  }
  return out;
}

SubjectSplit split_subjects(std::vector<std::string> subject_ids, double train_fraction, std::uint64_t seed) {
  if (subject_ids.empty()) throw DataError("split_subjects: no subjects");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw DataError("split_subjects: train fraction outside [0, 1]");
  std::sort(subject_ids.begin(), subject_ids.end());
  if (std::adjacent_find(subject_ids.begin(), subject_ids.end()) != subject_ids.end()) {
    throw DataError("split_subjects: duplicate subject ids");
  }
  Rng rng(seed);
  rng.shuffle(subject_ids);
  // The epsilon keeps exact products such as 0.8 * 5 from flooring to 3.
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(subject_ids.size()) * train_fraction + 1e-9));
  SubjectSplit split;
  split.train.assign(subject_ids.begin(), subject_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(subject_ids.begin() + static_cast<std::ptrdiff_t>(n_train), subject_ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string Task::label() const { return to_string(source) + "→" + to_string(target); }

std::string Task::name() const {
  std::string s = to_string(source) + "-" + to_string(target);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

Task parse_task(std::string_view name) {
  for (const auto& t : all_tasks()) {
    std::string lower(name);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower == t.name()) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) + "' (expected t1-t2, t2-t1, t1-pd or pd-t1)");
}

std::vector<Task> all_tasks() {
  return {{Modality::T1, Modality::T2}, {Modality::T2, Modality::T1}, {Modality::T1, Modality::PD}, {Modality::PD, Modality::T1}};
}

PairingResult make_pairs(const std::vector<Volume>& sources, const std::vector<Volume>& targets,
                         const std::vector<std::string>& subjects, std::size_t image_size, double fg_threshold) {
  std::map<std::string, const Volume*, std::less<>> src, tgt;
  for (const auto& v : sources) src[v.subject_id] = &v;
  for (const auto& v : targets) tgt[v.subject_id] = &v;

  std::vector<std::string> ordered = subjects;
  std::sort(ordered.begin(), ordered.end());
  PairingResult result;
  for (const auto& id : ordered) {
    const auto s = src.find(id);
    const auto t = tgt.find(id);
    if (s == src.end() || t == tgt.end()) {
      result.warnings.push_back("subject " + id + ": missing " + (s == src.end() ? "source" : "target") +
                                " modality, skipped");
      continue;
    }
    const Volume& sv = *s->second;
    const Volume& tv = *t->second;
    if (sv.dims != tv.dims) {
      result.warnings.push_back("subject " + id + ": source and target dimensions differ, skipped");
      continue;
    }
    for (auto& slice : extract_slices(sv, fg_threshold, image_size)) {
      ImageTensor target = axial_slice(tv, slice.slice_index);
      if (image_size > 0) target = fit_to_square(target, image_size);
      result.pairs.push_back({id, slice.slice_index, std::move(slice.image), std::move(target), sv.modality, tv.modality});
    }
  }
  return result;
}

PairedDataset build_dataset(const std::vector<Volume>& volumes, const Task& task, const PipelineOptions& options) {
  std::vector<Volume> sources, targets;
  std::set<std::string> subjects;
  for (const auto& v : volumes) {
    subjects.insert(v.subject_id);
    if (v.modality == task.source) sources.push_back(normalize_volume(v, options.clip_percentile));
    if (v.modality == task.target) targets.push_back(normalize_volume(v, options.clip_percentile));
  }
  if (subjects.empty()) throw DataError("build_dataset: no volumes");
  const auto split = split_subjects({subjects.begin(), subjects.end()}, options.train_fraction, options.seed);

  PairedDataset ds;
  ds.task = task;
  ds.image_size = options.image_size;
  ds.train_subjects = split.train;
  ds.test_subjects = split.test;
  auto train = make_pairs(sources, targets, split.train, options.image_size, options.fg_threshold);
  auto test = make_pairs(sources, targets, split.test, options.image_size, options.fg_threshold);
  ds.train = std::move(train.pairs);
  ds.test = std::move(test.pairs);
  ds.warnings = std::move(train.warnings);
  ds.warnings.insert(ds.warnings.end(), test.warnings.begin(), test.warnings.end());
  return ds;
}

void check_split(const PairedDataset& dataset) {
  std::set<std::string> train(dataset.train_subjects.begin(), dataset.train_subjects.end());
  for (const auto& p : dataset.train) train.insert(p.subject_id);
  for (const auto& id : dataset.test_subjects) {
    if (train.count(id)) throw SplitViolation("subject " + id + " appears in both the training and test split");
  }
  for (const auto& p : dataset.test) {
    if (train.count(p.subject_id)) {
      throw SplitViolation("subject " + p.subject_id + " appears in both the training and test split");
    }
  }
}

}  // namespace i2i
