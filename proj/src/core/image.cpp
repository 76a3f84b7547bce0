#include "i2i/core/image.hpp"

#include <algorithm>
#include <string>

#include "i2i/core/errors.hpp"

namespace i2i {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : ImageTensor(Tensor({height, width, channels}, fill)) {}

ImageTensor::ImageTensor(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3) {
    throw ShapeError("image tensor must be rank 3 (h, w, c), got " + shape_to_string(values_.shape()));
  }
  if (values_.dim(0) == 0 || values_.dim(1) == 0 || values_.dim(2) == 0) {
    throw ShapeError("image tensor extents must be positive, got " + shape_to_string(values_.shape()));
  }
}

bool ImageTensor::is_normalized() const {
  const auto v = values_.values();
  return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.tensor().shape() != b.tensor().shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.tensor().shape()) + " vs " +
                     shape_to_string(b.tensor().shape()));
  }
}

}  // namespace i2i
