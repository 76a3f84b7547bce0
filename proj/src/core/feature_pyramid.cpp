#include "i2i/core/feature_pyramid.hpp"

#include <string>

#include "i2i/core/errors.hpp"

namespace i2i {

FeaturePyramid::FeaturePyramid(std::array<Tensor, kLevels> levels) : levels_(std::move(levels)) {
  for (std::size_t i = 0; i < kLevels; ++i) {
    const auto& t = levels_[i];
    if (t.rank() != 3 || t.dim(0) == 0 || t.dim(1) == 0 || t.dim(2) == 0) {
      throw ShapeError("pyramid level " + std::to_string(i + 1) + " must be a non-empty (h, w, c) map, got " +
                       shape_to_string(t.shape()));
    }
    if (i == 0) continue;
    const auto& prev = levels_[i - 1];
    if (prev.dim(0) != 2 * t.dim(0) || prev.dim(1) != 2 * t.dim(1)) {
      throw ShapeError("pyramid level " + std::to_string(i + 1) + " " + shape_to_string(t.shape()) +
                       " does not halve level " + std::to_string(i) + " " + shape_to_string(prev.shape()));
    }
    if (t.dim(2) < prev.dim(2)) {
      throw ShapeError("pyramid level " + std::to_string(i + 1) + " has fewer channels than level " +
                       std::to_string(i));
    }
  }
}

}  // namespace i2i
