#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "i2i/autograd/tape.hpp"
#include "i2i/core/parameter_set.hpp"
#include "i2i/core/rng.hpp"
#include "i2i/core/tensor.hpp"

namespace i2i {

struct WindowShape {
  std::size_t h = 0;
  std::size_t w = 0;

  bool operator==(const WindowShape&) const = default;
};

/// A feature map cut into non-overlapping windows.
///
/// windows is (rows * cols, window.h * window.w, dim). Windows are stored in
/// row-major grid order and tokens row-major within each window.
struct WindowGrid {
  Tensor windows;
  std::size_t rows = 0;
  std::size_t cols = 0;
  WindowShape window;
  std::size_t origin_h = 0;
  std::size_t origin_w = 0;
  std::size_t dim = 0;
};

/// Query/key/value/output projections of one multi-head attention layer.
///
/// All matrices are (dim, dim). The key projection has no bias: a key bias
/// shifts every logit of a query by the same amount and cancels in softmax.
struct AttentionParams {
  Tensor wq, bq, wk, wv, bv, wo, bo;
  std::size_t heads = 1;

  std::size_t dim() const { return wq.empty() ? 0 : wq.dim(0); }
  std::size_t head_dim() const { return heads ? dim() / heads : 0; }
};

/// Throws DivisibilityError naming H or W when the window does not tile the map.
WindowGrid partition_windows(const Tensor& features, WindowShape window);
/// Exact inverse of partition_windows; throws StructuralError on inconsistent metadata.
Tensor merge_windows(const WindowGrid& grid);
/// Multi-head attention inside every window independently; shape-preserving.
WindowGrid window_attention(const WindowGrid& grid, const AttentionParams& params);
/// features + merge(window_attention(partition(features))).
Tensor mask_unit_attention(const Tensor& features, const AttentionParams& params, WindowShape window);

struct AttentionCost {
  /// QK^T scores plus the probability-weighted value mix.
  std::uint64_t score_mix_macs = 0;
  /// The four d x d token projections; independent of the window size.
  std::uint64_t projection_macs = 0;
};

/// Analytic multiply-accumulate counts: score+mix = 2 * n * window * d,
/// projections = 4 * n * d^2. Throws DivisibilityError when window_tokens does
/// not divide n_tokens.
AttentionCost attention_cost(std::uint64_t n_tokens, std::uint64_t window_tokens, std::uint64_t d,
                             std::uint64_t heads);

// -- parameters -----------------------------------------------------------

/// Adds prefix.{wq,bq,wk,wv,bv,wo,bo} with fan-in scaled normal weights and zero biases.
void init_attention_params(ParameterSet& params, const std::string& prefix, std::size_t dim, Rng& rng,
                           bool trainable);
AttentionParams attention_params_from(const ParameterSet& params, const std::string& prefix, std::size_t heads);
/// Throws ShapeError unless all matrices are (d, d), biases have d entries and heads divides d.
void validate_attention_params(const AttentionParams& params);

// -- differentiable forms -------------------------------------------------

struct AttentionVars {
  ag::Var wq, bq, wk, wv, bv, wo, bo;
  std::size_t heads = 1;
};

AttentionVars bind_attention(ag::ParamBinder& bind, const std::string& prefix, std::size_t heads);
AttentionVars bind_attention(ag::Tape& tape, const AttentionParams& params, bool trainable);

/// Projections and per-window attention on a (windows, tokens, d) grid.
ag::Var window_attention(ag::Tape& tape, ag::Var grid, const AttentionVars& attn);
/// merge(window_attention(partition(x))) on an (h, w, d) map, without residual.
ag::Var attend_windows(ag::Tape& tape, ag::Var x, const AttentionVars& attn, WindowShape window);
/// Residual mask-unit attention on an (h, w, d) map.
ag::Var mask_unit_attention(ag::Tape& tape, ag::Var x, const AttentionVars& attn, WindowShape window);

}  // namespace i2i
