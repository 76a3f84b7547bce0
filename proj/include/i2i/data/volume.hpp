#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace i2i {

enum class Modality { T1, T2, PD };

std::string to_string(Modality m);
/// Case-insensitive "T1", "T2" or "PD".
Modality parse_modality(std::string_view name);

/// A 3D scan in NIfTI voxel order: x fastest, then y, then z (axial index).
struct Volume {
  std::string subject_id;
  Modality modality = Modality::T1;
  std::array<std::size_t, 3> dims = {0, 0, 0};
  std::vector<double> voxels;
  /// Millimetres per voxel along x, y, z.
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + dims[0] * (y + dims[1] * z); }
  double& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[index(x, y, z)]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[index(x, y, z)]; }
  std::size_t slices() const { return dims[2]; }
};

/// Throws DataError for empty volumes, size mismatches or non-positive spacing.
void validate_volume(const Volume& v);

}  // namespace i2i
