#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "i2i/core/image.hpp"
#include "i2i/data/volume.hpp"

namespace i2i {

/// Clips at the given upper percentile (linear interpolation between order
/// statistics) and min-max scales to [0, 1]. When the percentile equals the
/// minimum the maximum is used instead. Throws DataError on constant volumes.
Volume normalize_volume(const Volume& volume, double clip_percentile = 99.5);

/// Pixels brighter than this count as foreground.
inline constexpr double kForegroundLevel = 0.01;

struct SliceImage {
  std::size_t slice_index = 0;
  ImageTensor image;
};

/// Fraction of pixels in axial slice z that exceed kForegroundLevel.
double foreground_fraction(const Volume& volume, std::size_t z);

/// Axial slice z as an (ny, nx, 1) image: rows follow y, columns follow x.
ImageTensor axial_slice(const Volume& volume, std::size_t z);

/// Center crop and/or zero pad to size x size.
ImageTensor fit_to_square(const ImageTensor& image, std::size_t size);

/// Axial slices whose foreground fraction exceeds fg_threshold, in slice
/// order. With image_size > 0 each slice is fitted to that square.
std::vector<SliceImage> extract_slices(const Volume& volume, double fg_threshold = 0.05,
                                       std::size_t image_size = 0);

struct SubjectSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Sorts the ids, shuffles them with the seed and puts the first
/// floor(n * train_fraction) into train. Throws DataError on empty input,
/// duplicate ids or a fraction outside [0, 1].
SubjectSplit split_subjects(std::vector<std::string> subject_ids, double train_fraction, std::uint64_t seed);

struct Task {
  Modality source = Modality::T1;
  Modality target = Modality::T2;

  /// "T1→T2" style label used in reports.
  std::string label() const;
  /// "t1-t2" style name used on the command line.
  std::string name() const;
  bool operator==(const Task&) const = default;
};

/// Parses "t1-t2", "t2-t1", "t1-pd" or "pd-t1" (case-insensitive). Throws ConfigError otherwise.
Task parse_task(std::string_view name);
/// The four translation directions in report order.
std::vector<Task> all_tasks();

struct PairedSlice {
  std::string subject_id;
  std::size_t slice_index = 0;
  ImageTensor source;
  ImageTensor target;
  Modality source_modality = Modality::T1;
  Modality target_modality = Modality::T2;
};

struct PairingResult {
  std::vector<PairedSlice> pairs;
  std::vector<std::string> warnings;
};

/// Pairs normalized volumes of the listed subjects. A slice is paired when it
/// passes the foreground test in the source volume. Subjects lacking either
/// modality are skipped with one warning each. Output is sorted by subject,
/// then slice index.
PairingResult make_pairs(const std::vector<Volume>& sources, const std::vector<Volume>& targets,
                         const std::vector<std::string>& subjects, std::size_t image_size,
                         double fg_threshold = 0.05);

struct PairedDataset {
  Task task;
  std::size_t image_size = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<PairedSlice> train;
  std::vector<PairedSlice> test;
  std::vector<std::string> warnings;
};

struct PipelineOptions {
  std::size_t image_size = 256;
  double train_fraction = 0.8;
  double fg_threshold = 0.05;
  double clip_percentile = 99.5;
  std::uint64_t seed = 0;
};

/// normalize -> split by subject -> extract and pair, for one task. The split
/// covers every subject that has at least one volume.
PairedDataset build_dataset(const std::vector<Volume>& volumes, const Task& task, const PipelineOptions& options);

/// Throws SplitViolation when a subject appears in both splits of the dataset.
void check_split(const PairedDataset& dataset);

}  // namespace i2i
