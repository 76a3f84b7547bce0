#pragma once

#include <array>
#include <cstddef>

#include "i2i/core/tensor.hpp"

namespace i2i {

/// Four encoder-stage feature maps, finest first.
///
/// Each level is an (h, w, c) tensor; spatial extents halve exactly from one
/// level to the next and channel widths never shrink.
class FeaturePyramid {
 public:
  static constexpr std::size_t kLevels = 4;

  /// Throws ShapeError when the levels violate the halving/widening pattern.
  explicit FeaturePyramid(std::array<Tensor, kLevels> levels);

  /// Zero-based: level(0) is the stride-4 map, level(3) the stride-32 map.
  const Tensor& level(std::size_t i) const { return levels_.at(i); }
  const std::array<Tensor, kLevels>& levels() const { return levels_; }

  bool operator==(const FeaturePyramid& other) const = default;

 private:
  std::array<Tensor, kLevels> levels_;
};

}  // namespace i2i
