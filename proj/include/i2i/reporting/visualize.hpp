#pragma once

#include <string>
#include <vector>

#include "i2i/core/feature_pyramid.hpp"
#include "i2i/core/image.hpp"

namespace i2i {

/// Errors at or above this value saturate the error map.
inline constexpr double kErrorMapScale = 0.5;

/// |pred - target| / kErrorMapScale clipped to [0, 1]. The scale is fixed so
/// maps from different models are directly comparable.
ImageTensor error_map(const ImageTensor& pred, const ImageTensor& target);

struct FeatureVisualization {
  ImageTensor image;
  std::vector<std::string> warnings;
};

/// Channel mean of pyramid level `stage` (1 = finest), min-max normalized and
/// bilinearly upsampled to the encoder input size (4x the finest level). A
/// constant map yields zeros and a warning. Throws ConfigError when stage is
/// outside 1..4.
FeatureVisualization feature_visualization(const FeaturePyramid& pyramid, std::size_t stage);

}  // namespace i2i
