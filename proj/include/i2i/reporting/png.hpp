#pragma once

#include <filesystem>

#include "i2i/core/image.hpp"

namespace i2i {

/// Writes channel 0 as 8-bit grayscale, mapping [0, 1] to [0, 255] with
/// rounding; values outside [0, 1] are clipped.
void write_png_gray(const std::filesystem::path& path, const ImageTensor& image);

/// Reads any PNG as an (h, w, 1) image in [0, 1]; colour images are converted
/// to luminance and alpha is dropped.
ImageTensor read_png_gray(const std::filesystem::path& path);

}  // namespace i2i
