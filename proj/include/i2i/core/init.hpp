#pragma once

#include <cmath>
#include <cstddef>

#include "i2i/core/rng.hpp"
#include "i2i/core/tensor.hpp"

namespace i2i {

/// Zero-mean normal weights with standard deviation gain / sqrt(fan_in).
inline Tensor fan_in_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  Tensor t(std::move(shape));
  const double sd = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = sd * rng.normal();
  return t;
}

/// 2D sinusoidal position code for an (h, w, c) token map: the first half of
/// the channels encodes the row, the second half the column.
inline Tensor sinusoidal_position_code(std::size_t h, std::size_t w, std::size_t c) {
  Tensor pe({h, w, c});
  const std::size_t half = c / 2;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const bool row_part = ch < half;
        const std::size_t local = row_part ? ch : ch - half;
        const std::size_t span = row_part ? half : c - half;
        const double pos = static_cast<double>(row_part ? y : x);
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (local / 2)) / static_cast<double>(span));
        pe.at(y, x, ch) = (local % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
      }
    }
  }
  return pe;
}

}  // namespace i2i
