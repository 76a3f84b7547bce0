#include "i2i/attention/mask_unit_attention.hpp"

#include <cmath>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/init.hpp"

namespace i2i {
namespace {

void check_window(const Tensor& features, WindowShape window) {
  if (features.rank() != 3) {
    throw ShapeError("feature map must be (h, w, d), got " + shape_to_string(features.shape()));
  }
  if (window.h == 0 || features.dim(0) % window.h != 0) {
    throw DivisibilityError("window height " + std::to_string(window.h) + " does not divide H = " +
                            std::to_string(features.dim(0)));
  }
  if (window.w == 0 || features.dim(1) % window.w != 0) {
    throw DivisibilityError("window width " + std::to_string(window.w) + " does not divide W = " +
                            std::to_string(features.dim(1)));
  }
}

void check_grid(const WindowGrid& g) {
  const bool ok = g.windows.rank() == 3 && g.window.h > 0 && g.window.w > 0 &&
                  g.rows * g.window.h == g.origin_h && g.cols * g.window.w == g.origin_w &&
                  g.windows.dim(0) == g.rows * g.cols && g.windows.dim(1) == g.window.h * g.window.w &&
                  g.windows.dim(2) == g.dim;
  if (!ok) {
    throw StructuralError("window grid " + shape_to_string(g.windows.shape()) + " (" + std::to_string(g.rows) + "x" +
                          std::to_string(g.cols) + " windows of " + std::to_string(g.window.h) + "x" +
                          std::to_string(g.window.w) + ") disagrees with origin " + std::to_string(g.origin_h) + "x" +
                          std::to_string(g.origin_w) + "x" + std::to_string(g.dim));
  }
}

}  // namespace

WindowGrid partition_windows(const Tensor& features, WindowShape window) {
  check_window(features, window);
  ag::Tape tape(false);
  auto out = ag::partition_windows(tape, tape.constant(features), window.h, window.w);
  return WindowGrid{tape.value(out),
                    features.dim(0) / window.h,
                    features.dim(1) / window.w,
                    window,
                    features.dim(0),
                    features.dim(1),
                    features.dim(2)};
}

Tensor merge_windows(const WindowGrid& grid) {
  check_grid(grid);
  ag::Tape tape(false);
  auto out = ag::merge_windows(tape, tape.constant(grid.windows), grid.origin_h, grid.origin_w, grid.window.h,
                               grid.window.w);
  return tape.value(out);
}

WindowGrid window_attention(const WindowGrid& grid, const AttentionParams& params) {
  check_grid(grid);
  validate_attention_params(params);
  if (params.dim() != grid.dim) {
    throw ShapeError("attention dim " + std::to_string(params.dim()) + " does not match token dim " +
                     std::to_string(grid.dim));
  }
  ag::Tape tape(false);
  auto attn = bind_attention(tape, params, false);
  auto out = window_attention(tape, tape.constant(grid.windows), attn);
  WindowGrid result = grid;
  result.windows = tape.value(out);
  return result;
}

Tensor mask_unit_attention(const Tensor& features, const AttentionParams& params, WindowShape window) {
  check_window(features, window);
  validate_attention_params(params);
  if (params.dim() != features.dim(2)) {
    throw ShapeError("attention dim " + std::to_string(params.dim()) + " does not match feature channels " +
                     std::to_string(features.dim(2)));
  }
  ag::Tape tape(false);
  auto attn = bind_attention(tape, params, false);
  return tape.value(mask_unit_attention(tape, tape.constant(features), attn, window));
}

AttentionCost attention_cost(std::uint64_t n_tokens, std::uint64_t window_tokens, std::uint64_t d,
                             std::uint64_t heads) {
  if (window_tokens == 0 || n_tokens % window_tokens != 0) {
    throw DivisibilityError("window of " + std::to_string(window_tokens) + " tokens does not divide " +
                            std::to_string(n_tokens) + " tokens");
  }
  if (heads == 0 || d % heads != 0) {
    throw ShapeError(std::to_string(heads) + " heads do not divide dim " + std::to_string(d));
  }
  // Per head: scores (w x hd) and mix (w x hd) per token; summed over heads hd*heads = d.
  return AttentionCost{2 * n_tokens * window_tokens * d, 4 * n_tokens * d * d};
}

void init_attention_params(ParameterSet& params, const std::string& prefix, std::size_t dim, Rng& rng,
                           bool trainable) {
  params.add(prefix + ".wq", fan_in_normal({dim, dim}, dim, rng), trainable);
  params.add(prefix + ".bq", Tensor({dim}), trainable);
  params.add(prefix + ".wk", fan_in_normal({dim, dim}, dim, rng), trainable);
  params.add(prefix + ".wv", fan_in_normal({dim, dim}, dim, rng), trainable);
  params.add(prefix + ".bv", Tensor({dim}), trainable);
  params.add(prefix + ".wo", fan_in_normal({dim, dim}, dim, rng), trainable);
  params.add(prefix + ".bo", Tensor({dim}), trainable);
}

AttentionParams attention_params_from(const ParameterSet& params, const std::string& prefix, std::size_t heads) {
  AttentionParams a;
  a.wq = params.at(prefix + ".wq").value;
  a.bq = params.at(prefix + ".bq").value;
  a.wk = params.at(prefix + ".wk").value;
  a.wv = params.at(prefix + ".wv").value;
  a.bv = params.at(prefix + ".bv").value;
  a.wo = params.at(prefix + ".wo").value;
  a.bo = params.at(prefix + ".bo").value;
  a.heads = heads;
  validate_attention_params(a);
  return a;
}

void validate_attention_params(const AttentionParams& p) {
  const std::size_t d = p.dim();
  const Shape mat{d, d};
  const Shape vec{d};
  if (d == 0 || p.wq.shape() != mat || p.wk.shape() != mat || p.wv.shape() != mat || p.wo.shape() != mat ||
      p.bq.shape() != vec || p.bv.shape() != vec || p.bo.shape() != vec) {
    throw ShapeError("attention projections must be square (d, d) matrices with d-entry biases");
  }
  if (p.heads == 0 || d % p.heads != 0) {
    throw ShapeError(std::to_string(p.heads) + " heads do not divide dim " + std::to_string(d));
  }
}

AttentionVars bind_attention(ag::ParamBinder& bind, const std::string& prefix, std::size_t heads) {
  return AttentionVars{bind(prefix + ".wq"), bind(prefix + ".bq"), bind(prefix + ".wk"), bind(prefix + ".wv"),
                       bind(prefix + ".bv"), bind(prefix + ".wo"), bind(prefix + ".bo"), heads};
}

AttentionVars bind_attention(ag::Tape& tape, const AttentionParams& p, bool trainable) {
  auto v = [&](const char* name, const Tensor& t) { return tape.parameter(name, t, trainable); };
  return AttentionVars{v("wq", p.wq), v("bq", p.bq), v("wk", p.wk), v("wv", p.wv),
                       v("bv", p.bv), v("wo", p.wo), v("bo", p.bo), p.heads};
}

ag::Var window_attention(ag::Tape& tape, ag::Var grid, const AttentionVars& a) {
  auto q = ag::linear(tape, grid, a.wq, a.bq);
  auto k = ag::linear(tape, grid, a.wk);
  auto v = ag::linear(tape, grid, a.wv, a.bv);
  auto mixed = ag::windowed_attention(tape, q, k, v, a.heads);
  return ag::linear(tape, mixed, a.wo, a.bo);
}

ag::Var attend_windows(ag::Tape& tape, ag::Var x, const AttentionVars& attn, WindowShape window) {
  const auto& xv = tape.value(x);
  check_window(xv, window);
  const std::size_t h = xv.dim(0), w = xv.dim(1);
  auto grid = ag::partition_windows(tape, x, window.h, window.w);
  auto attended = window_attention(tape, grid, attn);
  return ag::merge_windows(tape, attended, h, w, window.h, window.w);
}

ag::Var mask_unit_attention(ag::Tape& tape, ag::Var x, const AttentionVars& attn, WindowShape window) {
  return ag::add(tape, x, attend_windows(tape, x, attn, window));
}

}  // namespace i2i
