#pragma once

#include <filesystem>
#include <string>

#include "i2i/data/volume.hpp"

namespace i2i {

/// Reads a 3D NIfTI-1 volume (.nii or .nii.gz, either byte order). Integer
/// and float voxel types are converted to double with scl_slope/scl_inter
/// applied. Throws IoError on unreadable or unsupported files.
Volume read_nifti(const std::filesystem::path& path, std::string subject_id, Modality modality);

/// Writes a single-file NIfTI-1 volume with float32 voxels; gzip-compressed
/// when the path ends in ".gz".
void write_nifti(const std::filesystem::path& path, const Volume& volume);

}  // namespace i2i
