#pragma once

#include <cstddef>
#include <optional>

#include "i2i/autograd/tape.hpp"

// Differentiable primitives. Spatial maps are (h, w, c); window grids are
// (windows, tokens, dim).
namespace i2i::ag {

Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);

/// y = x W + b over the last axis; x may have any rank >= 1, W is (in, out).
Var linear(Tape& t, Var x, Var weight, std::optional<Var> bias = std::nullopt);

/// 2D convolution of an (h, w, cin) map with a (kh, kw, cin, cout) kernel.
Var conv2d(Tape& t, Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad);

Var relu(Tape& t, Var x);
Var leaky_relu(Tape& t, Var x, double slope);
/// Exact (erf) GELU.
Var gelu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
/// log(sigmoid(x)) evaluated without overflow for any finite x.
Var log_sigmoid(Tape& t, Var x);

/// Normalizes over the last axis, then applies gamma/beta.
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-6);

Var upsample_nearest(Tape& t, Var x, std::size_t factor);
/// Half-pixel bilinear resampling (align_corners = false), edges clamped.
Var resize_bilinear(Tape& t, Var x, std::size_t out_h, std::size_t out_w);
/// 2x2 max pooling with stride 2; ties route the gradient to the first maximum.
Var max_pool2(Tape& t, Var x);

Var concat_channels(Tape& t, Var a, Var b);

/// (h, w, d) -> (rows*cols, wh*ww, d): non-overlapping windows in row-major
/// window order, tokens row-major within each window.
Var partition_windows(Tape& t, Var x, std::size_t wh, std::size_t ww);
/// Inverse of partition_windows for an (h, w) origin.
Var merge_windows(Tape& t, Var grid, std::size_t h, std::size_t w, std::size_t wh, std::size_t ww);

/// Multi-head scaled dot-product attention computed independently inside each
/// window of a (windows, tokens, d) grid, with softmax scale 1/sqrt(d/heads).
Var windowed_attention(Tape& t, Var q, Var k, Var v, std::size_t heads);

/// (h, w, c) -> (c): spatial mean.
Var global_avg_pool(Tape& t, Var x);
/// Mean of all elements, as a one-element tensor.
Var mean(Tape& t, Var x);
/// Mean absolute difference against a constant target.
Var l1_loss(Tape& t, Var pred, const Tensor& target);

}  // namespace i2i::ag
