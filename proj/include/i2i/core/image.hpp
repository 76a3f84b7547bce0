#pragma once

#include <cstddef>

#include "i2i/core/tensor.hpp"

namespace i2i {

/// A 2D intensity grid stored as (height, width, channels).
///
/// MRI slices are single-channel; pretrained backbones consume the
/// three-channel replica produced by adapt_channels().
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  /// Wraps a rank-3 (h, w, c) tensor. Throws ShapeError on other ranks or zero extents.
  explicit ImageTensor(Tensor values);

  std::size_t height() const { return values_.empty() ? 0 : values_.dim(0); }
  std::size_t width() const { return values_.empty() ? 0 : values_.dim(1); }
  std::size_t channels() const { return values_.empty() ? 0 : values_.dim(2); }
  std::size_t size() const { return values_.size(); }

  const Tensor& tensor() const { return values_; }
  Tensor& tensor() { return values_; }

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return values_.at(y, x, c); }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return values_.at(y, x, c); }

  /// True when every value lies in [0, 1].
  bool is_normalized() const;

  bool operator==(const ImageTensor& other) const = default;

 private:
  Tensor values_;
};

/// Throws ShapeError unless both images have identical dimensions.
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

}  // namespace i2i
