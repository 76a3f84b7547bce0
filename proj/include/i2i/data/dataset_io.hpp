#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "i2i/data/pipeline.hpp"

namespace i2i {

/// Reads <dir>/<subject>/<T1|T2|PD>.nii[.gz]. Subjects are visited in name
/// order; a missing modality file is simply absent from the result (pairing
/// reports it). Throws IoError when dir is not a directory.
std::vector<Volume> load_volume_directory(const std::filesystem::path& dir);

/// Writes volumes in the layout load_volume_directory() reads, as .nii.gz.
void write_volume_directory(const std::filesystem::path& dir, const std::vector<Volume>& volumes);

/// Stores a prepared dataset as an archive: arrays "train/NNNNNN/source",
/// ".../target" (and likewise "test/...") plus metadata describing each pair.
void save_dataset(const std::filesystem::path& path, const PairedDataset& dataset);
PairedDataset load_dataset(const std::filesystem::path& path);

/// CSV with header "subject,modality,slice,split"; one row per stored image.
void write_dataset_manifest(const std::filesystem::path& path, const PairedDataset& dataset);

/// FNV-1a over task, subjects, slice indices and pixel bytes, as 16 hex digits.
std::string dataset_hash(const PairedDataset& dataset);

}  // namespace i2i
