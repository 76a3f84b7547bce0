#include "i2i/autograd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "i2i/core/errors.hpp"

namespace i2i::ag {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(x.shape()));
  }
}

template <typename F, typename G>
Var unary(Tape& t, Var x, F f, G df) {
  const auto& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return t.record(std::move(out), {x}, [x, df](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(x)) return;
    const auto& xv = tp.value(x);
    Tensor gx(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] = g[i] * df(xv[i]);
    tp.accumulate(x, gx);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Gathers conv patches into a (positions, kh*kw*cin) matrix.
RowMat im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
              std::size_t oh, std::size_t ow) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(kh * kw * c));
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* row = cols.data() + (oy * ow + ox) * kh * kw * c;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* src = x.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
          std::copy(src, src + c, row + (ky * kw + kx) * c);
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMat& cols, Tensor& gx, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t oh, std::size_t ow) {
  const std::size_t h = gx.dim(0), w = gx.dim(1), c = gx.dim(2);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double* row = cols.data() + (oy * ow + ox) * kh * kw * c;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          double* dst = gx.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
          const double* src = row + (ky * kw + kx) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

struct AxisWeights {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisWeights bilinear_axis(std::size_t in, std::size_t out) {
  AxisWeights a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    a.lo[o] = lo;
    a.hi[o] = std::min(lo + 1, in - 1);
    a.frac[o] = src - static_cast<double>(lo);
  }
  return a;
}

std::size_t window_source_index(std::size_t win, std::size_t tok, std::size_t w, std::size_t wh, std::size_t ww) {
  const std::size_t cols = w / ww;
  const std::size_t r = win / cols, c = win % cols;
  const std::size_t i = tok / ww, j = tok % ww;
  return (r * wh + i) * w + (c * ww + j);
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw ShapeError("add: shape mismatch " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var scale(Tape& t, Var a, double s) {
  const auto& av = t.value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) {
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * s;
    tp.accumulate(a, ga);
  });
}

Var linear(Tape& t, Var x, Var weight, std::optional<Var> bias) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(weight);
  require_rank(wv, 2, "linear weight");
  if (xv.rank() == 0 || xv.shape().back() != wv.dim(0)) {
    throw ShapeError("linear: input " + shape_to_string(xv.shape()) + " incompatible with weight " +
                     shape_to_string(wv.shape()));
  }
  const auto in = static_cast<Eigen::Index>(wv.dim(0));
  const auto outd = static_cast<Eigen::Index>(wv.dim(1));
  const auto n = static_cast<Eigen::Index>(xv.size() / wv.dim(0));
  if (bias) {
    const auto& bv = t.value(*bias);
    if (bv.size() != wv.dim(1)) throw ShapeError("linear: bias size does not match output width");
  }
  Shape oshape = xv.shape();
  oshape.back() = wv.dim(1);
  Tensor out(oshape);
  MapMat y(out.data(), n, outd);
  y.noalias() = CMapMat(xv.data(), n, in) * CMapMat(wv.data(), in, outd);
  if (bias) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(t.value(*bias).data(), outd);

  std::initializer_list<Var> inputs = {x, weight};
  auto fn = [x, weight, bias, n, in, outd](Tape& tp, const Tensor& g) {
    CMapMat gy(g.data(), n, outd);
    if (tp.requires_grad(x)) {
      Tensor gx(tp.value(x).shape());
      MapMat(gx.data(), n, in).noalias() = gy * CMapMat(tp.value(weight).data(), in, outd).transpose();
      tp.accumulate(x, gx);
    }
    if (tp.requires_grad(weight)) {
      Tensor gw(tp.value(weight).shape());
      MapMat(gw.data(), in, outd).noalias() = CMapMat(tp.value(x).data(), n, in).transpose() * gy;
      tp.accumulate(weight, gw);
    }
    if (bias && tp.requires_grad(*bias)) {
      Tensor gb(tp.value(*bias).shape());
      Eigen::Map<Eigen::RowVectorXd>(gb.data(), outd) = gy.colwise().sum();
      tp.accumulate(*bias, gb);
    }
  };
  if (bias) return t.record(std::move(out), {x, weight, *bias}, fn);
  return t.record(std::move(out), inputs, fn);
}

Var conv2d(Tape& t, Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad) {
  const auto& xv = t.value(x);
  const auto& kv = t.value(kernel);
  require_rank(xv, 3, "conv2d input");
  require_rank(kv, 4, "conv2d kernel");
  const std::size_t kh = kv.dim(0), kw = kv.dim(1), cin = kv.dim(2), cout = kv.dim(3);
  if (xv.dim(2) != cin) {
    throw ShapeError("conv2d: input channels " + std::to_string(xv.dim(2)) + " != kernel channels " +
                     std::to_string(cin));
  }
  if (stride == 0 || xv.dim(0) + 2 * pad < kh || xv.dim(1) + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel larger than padded input " + shape_to_string(xv.shape()));
  }
  const std::size_t oh = (xv.dim(0) + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (xv.dim(1) + 2 * pad - kw) / stride + 1;
  const auto patch = static_cast<Eigen::Index>(kh * kw * cin);
  const auto positions = static_cast<Eigen::Index>(oh * ow);

  Tensor out({oh, ow, cout});
  {
    const RowMat cols = im2col(xv, kh, kw, stride, pad, oh, ow);
    MapMat y(out.data(), positions, static_cast<Eigen::Index>(cout));
    y.noalias() = cols * CMapMat(kv.data(), patch, static_cast<Eigen::Index>(cout));
    if (bias) {
      y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(t.value(*bias).data(), static_cast<Eigen::Index>(cout));
    }
  }
  auto fn = [=](Tape& tp, const Tensor& g) {
    CMapMat gy(g.data(), positions, static_cast<Eigen::Index>(cout));
    const auto& xval = tp.value(x);
    if (tp.requires_grad(kernel)) {
      const RowMat cols = im2col(xval, kh, kw, stride, pad, oh, ow);
      Tensor gk(tp.value(kernel).shape());
      MapMat(gk.data(), patch, static_cast<Eigen::Index>(cout)).noalias() = cols.transpose() * gy;
      tp.accumulate(kernel, gk);
    }
    if (tp.requires_grad(x)) {
      const RowMat gcols = gy * CMapMat(tp.value(kernel).data(), patch, static_cast<Eigen::Index>(cout)).transpose();
      Tensor gx(xval.shape());
      col2im(gcols, gx, kh, kw, stride, pad, oh, ow);
      tp.accumulate(x, gx);
    }
    if (bias && tp.requires_grad(*bias)) {
      Tensor gb(tp.value(*bias).shape());
      Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(cout)) = gy.colwise().sum();
      tp.accumulate(*bias, gb);
    }
  };
  if (bias) return t.record(std::move(out), {x, kernel, *bias}, fn);
  return t.record(std::move(out), {x, kernel}, fn);
}

Var relu(Tape& t, Var x) {
  return unary(t, x, [](double v) { return v > 0 ? v : 0.0; }, [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  return unary(
      t, x, [slope](double v) { return v > 0 ? v : slope * v; }, [slope](double v) { return v > 0 ? 1.0 : slope; });
}

Var gelu(Tape& t, Var x) {
  return unary(
      t, x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Var sigmoid(Tape& t, Var x) {
  return unary(t, x, stable_sigmoid, [](double v) {
    const double s = stable_sigmoid(v);
    return s * (1.0 - s);
  });
}

Var log_sigmoid(Tape& t, Var x) {
  // log sigma(x) = min(x, 0) - log1p(exp(-|x|)); derivative sigma(-x).
  return unary(
      t, x, [](double v) { return std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v))); },
      [](double v) { return stable_sigmoid(-v); });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const auto& xv = t.value(x);
  const std::size_t d = xv.shape().back();
  if (t.value(gamma).size() != d || t.value(beta).size() != d) {
    throw ShapeError("layer_norm: affine parameters must have " + std::to_string(d) + " entries");
  }
  const std::size_t n = xv.size() / d;
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(n);
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (row[i] - mu) * inv_std[r];
      xhat[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, d, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                                              const Tensor& g) {
                    const auto& gv = tp.value(gamma);
                    if (tp.requires_grad(gamma) || tp.requires_grad(beta)) {
                      Tensor gg(gv.shape()), gb(gv.shape());
                      for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t i = 0; i < d; ++i) {
                          gg[i] += g[r * d + i] * xhat[r * d + i];
                          gb[i] += g[r * d + i];
                        }
                      }
                      tp.accumulate(gamma, gg);
                      tp.accumulate(beta, gb);
                    }
                    if (!tp.requires_grad(x)) return;
                    Tensor gx(tp.value(x).shape());
                    std::vector<double> dxhat(d);
                    for (std::size_t r = 0; r < n; ++r) {
                      double m1 = 0, m2 = 0;
                      for (std::size_t i = 0; i < d; ++i) {
                        dxhat[i] = g[r * d + i] * gv[i];
                        m1 += dxhat[i];
                        m2 += dxhat[i] * xhat[r * d + i];
                      }
                      m1 /= static_cast<double>(d);
                      m2 /= static_cast<double>(d);
                      for (std::size_t i = 0; i < d; ++i) {
                        gx[r * d + i] = inv_std[r] * (dxhat[i] - m1 - xhat[r * d + i] * m2);
                      }
                    }
                    tp.accumulate(x, gx);
                  });
}

Var upsample_nearest(Tape& t, Var x, std::size_t factor) {
  const auto& xv = t.value(x);
  require_rank(xv, 3, "upsample_nearest");
  const std::size_t h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
  Tensor out({h * factor, w * factor, c});
  for (std::size_t y = 0; y < h * factor; ++y) {
    for (std::size_t xx = 0; xx < w * factor; ++xx) {
      const double* src = xv.data() + ((y / factor) * w + xx / factor) * c;
      std::copy(src, src + c, out.data() + (y * w * factor + xx) * c);
    }
  }
  return t.record(std::move(out), {x}, [x, h, w, c, factor](Tape& tp, const Tensor& g) {
    Tensor gx({h, w, c});
    for (std::size_t y = 0; y < h * factor; ++y) {
      for (std::size_t xx = 0; xx < w * factor; ++xx) {
        const double* src = g.data() + (y * w * factor + xx) * c;
        double* dst = gx.data() + ((y / factor) * w + xx / factor) * c;
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
      }
    }
    tp.accumulate(x, gx);
  });
}

Var resize_bilinear(Tape& t, Var x, std::size_t out_h, std::size_t out_w) {
  const auto& xv = t.value(x);
  require_rank(xv, 3, "resize_bilinear");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extent must be positive");
  const std::size_t h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
  auto ay = bilinear_axis(h, out_h);
  auto ax = bilinear_axis(w, out_w);
  Tensor out({out_h, out_w, c});
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = ay.frac[y];
    for (std::size_t xx = 0; xx < out_w; ++xx) {
      const double fx = ax.frac[xx];
      const double* p00 = xv.data() + (ay.lo[y] * w + ax.lo[xx]) * c;
      const double* p01 = xv.data() + (ay.lo[y] * w + ax.hi[xx]) * c;
      const double* p10 = xv.data() + (ay.hi[y] * w + ax.lo[xx]) * c;
      const double* p11 = xv.data() + (ay.hi[y] * w + ax.hi[xx]) * c;
      double* dst = out.data() + (y * out_w + xx) * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = p00[ch] + fx * (p01[ch] - p00[ch]);
        const double bot = p10[ch] + fx * (p11[ch] - p10[ch]);
        dst[ch] = top + fy * (bot - top);
      }
    }
  }
  return t.record(std::move(out), {x},
                  [x, h, w, c, out_h, out_w, ay = std::move(ay), ax = std::move(ax)](Tape& tp, const Tensor& g) {
                    Tensor gx({h, w, c});
                    for (std::size_t y = 0; y < out_h; ++y) {
                      const double fy = ay.frac[y];
                      for (std::size_t xx = 0; xx < out_w; ++xx) {
                        const double fx = ax.frac[xx];
                        const double* src = g.data() + (y * out_w + xx) * c;
                        double* p00 = gx.data() + (ay.lo[y] * w + ax.lo[xx]) * c;
                        double* p01 = gx.data() + (ay.lo[y] * w + ax.hi[xx]) * c;
                        double* p10 = gx.data() + (ay.hi[y] * w + ax.lo[xx]) * c;
                        double* p11 = gx.data() + (ay.hi[y] * w + ax.hi[xx]) * c;
                        const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
                        const double w10 = fy * (1 - fx), w11 = fy * fx;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                          p00[ch] += w00 * src[ch];
                          p01[ch] += w01 * src[ch];
                          p10[ch] += w10 * src[ch];
                          p11[ch] += w11 * src[ch];
                        }
                      }
                    }
                    tp.accumulate(x, gx);
                  });
}

Var max_pool2(Tape& t, Var x) {
  const auto& xv = t.value(x);
  require_rank(xv, 3, "max_pool2");
  const std::size_t h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
  if (h % 2 || w % 2) throw DivisibilityError("max_pool2: extent " + shape_to_string(xv.shape()) + " is odd");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({oh, ow, c});
  std::vector<std::size_t> argmax(oh * ow * c);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t xx = 0; xx < ow; ++xx) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * y) * w + 2 * xx) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * w + 2 * xx + dx) * c + ch;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (y * ow + xx) * c + ch;
        out[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  return t.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Tape& tp, const Tensor& g) {
    Tensor gx(tp.value(x).shape());
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += g[o];
    tp.accumulate(x, gx);
  });
}

Var concat_channels(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_rank(av, 3, "concat_channels");
  require_rank(bv, 3, "concat_channels");
  if (av.dim(0) != bv.dim(0) || av.dim(1) != bv.dim(1)) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_to_string(av.shape()) + " vs " +
                     shape_to_string(bv.shape()));
  }
  const std::size_t n = av.dim(0) * av.dim(1), ca = av.dim(2), cb = bv.dim(2);
  Tensor out({av.dim(0), av.dim(1), ca + cb});
  for (std::size_t p = 0; p < n; ++p) {
    std::copy(av.data() + p * ca, av.data() + (p + 1) * ca, out.data() + p * (ca + cb));
    std::copy(bv.data() + p * cb, bv.data() + (p + 1) * cb, out.data() + p * (ca + cb) + ca);
  }
  return t.record(std::move(out), {a, b}, [a, b, n, ca, cb](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor ga(tp.value(a).shape());
      for (std::size_t p = 0; p < n; ++p) {
        std::copy(g.data() + p * (ca + cb), g.data() + p * (ca + cb) + ca, ga.data() + p * ca);
      }
      tp.accumulate(a, ga);
    }
    if (tp.requires_grad(b)) {
      Tensor gb(tp.value(b).shape());
      for (std::size_t p = 0; p < n; ++p) {
        std::copy(g.data() + p * (ca + cb) + ca, g.data() + (p + 1) * (ca + cb), gb.data() + p * cb);
      }
      tp.accumulate(b, gb);
    }
  });
}

Var partition_windows(Tape& t, Var x, std::size_t wh, std::size_t ww) {
  const auto& xv = t.value(x);
  require_rank(xv, 3, "partition_windows");
  const std::size_t h = xv.dim(0), w = xv.dim(1), d = xv.dim(2);
  if (wh == 0 || h % wh != 0) {
    throw DivisibilityError("window height " + std::to_string(wh) + " does not divide H = " + std::to_string(h));
  }
  if (ww == 0 || w % ww != 0) {
    throw DivisibilityError("window width " + std::to_string(ww) + " does not divide W = " + std::to_string(w));
  }
  const std::size_t nw = (h / wh) * (w / ww), tokens = wh * ww;
  Tensor out({nw, tokens, d});
  for (std::size_t win = 0; win < nw; ++win) {
    for (std::size_t tok = 0; tok < tokens; ++tok) {
      const double* src = xv.data() + window_source_index(win, tok, w, wh, ww) * d;
      std::copy(src, src + d, out.data() + (win * tokens + tok) * d);
    }
  }
  return t.record(std::move(out), {x}, [x, w, wh, ww, nw, tokens, d](Tape& tp, const Tensor& g) {
    Tensor gx(tp.value(x).shape());
    for (std::size_t win = 0; win < nw; ++win) {
      for (std::size_t tok = 0; tok < tokens; ++tok) {
        const double* src = g.data() + (win * tokens + tok) * d;
        std::copy(src, src + d, gx.data() + window_source_index(win, tok, w, wh, ww) * d);
      }
    }
    tp.accumulate(x, gx);
  });
}

Var merge_windows(Tape& t, Var grid, std::size_t h, std::size_t w, std::size_t wh, std::size_t ww) {
  const auto& gv = t.value(grid);
  require_rank(gv, 3, "merge_windows");
  if (wh == 0 || ww == 0 || h % wh || w % ww || gv.dim(0) != (h / wh) * (w / ww) || gv.dim(1) != wh * ww) {
    throw StructuralError("merge_windows: grid " + shape_to_string(gv.shape()) + " inconsistent with origin " +
                          std::to_string(h) + "x" + std::to_string(w) + " and window " + std::to_string(wh) + "x" +
                          std::to_string(ww));
  }
  const std::size_t nw = gv.dim(0), tokens = gv.dim(1), d = gv.dim(2);
  Tensor out({h, w, d});
  for (std::size_t win = 0; win < nw; ++win) {
    for (std::size_t tok = 0; tok < tokens; ++tok) {
      const double* src = gv.data() + (win * tokens + tok) * d;
      std::copy(src, src + d, out.data() + window_source_index(win, tok, w, wh, ww) * d);
    }
  }
  return t.record(std::move(out), {grid}, [grid, w, wh, ww, nw, tokens, d](Tape& tp, const Tensor& g) {
    Tensor gg(tp.value(grid).shape());
    for (std::size_t win = 0; win < nw; ++win) {
      for (std::size_t tok = 0; tok < tokens; ++tok) {
        const double* src = g.data() + window_source_index(win, tok, w, wh, ww) * d;
        std::copy(src, src + d, gg.data() + (win * tokens + tok) * d);
      }
    }
    tp.accumulate(grid, gg);
  });
}

Var windowed_attention(Tape& t, Var q, Var k, Var v, std::size_t heads) {
  const auto& qv = t.value(q);
  const auto& kv = t.value(k);
  const auto& vv = t.value(v);
  require_rank(qv, 3, "windowed_attention");
  if (kv.shape() != qv.shape() || vv.shape() != qv.shape()) {
    throw ShapeError("windowed_attention: q/k/v shapes differ");
  }
  const std::size_t nw = qv.dim(0), tokens = qv.dim(1), d = qv.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("windowed_attention: " + std::to_string(heads) + " heads do not divide dim " + std::to_string(d));
  }
  const std::size_t hd = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto T = static_cast<Eigen::Index>(tokens);
  const auto HD = static_cast<Eigen::Index>(hd);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));

  const bool keep = t.grad_enabled() && (t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v));
  // Softmax probabilities per (window, head), kept only when backward will run.
  std::vector<RowMat> probs;
  if (keep) probs.reserve(nw * heads);

  Tensor out(qv.shape());
  constexpr Eigen::Index kRowBlock = 256;
  RowMat scores;
  for (std::size_t win = 0; win < nw; ++win) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = win * tokens * d + h * hd;
      CStridedMap Q(qv.data() + off, T, HD, stride);
      CStridedMap K(kv.data() + off, T, HD, stride);
      CStridedMap V(vv.data() + off, T, HD, stride);
      StridedMap O(out.data() + off, T, HD, stride);
      const Eigen::Index block = keep ? T : std::min(T, kRowBlock);
      for (Eigen::Index r0 = 0; r0 < T; r0 += block) {
        const Eigen::Index rows = std::min(block, T - r0);
        scores.noalias() = (Q.middleRows(r0, rows) * K.transpose()) * scale_factor;
        for (Eigen::Index r = 0; r < rows; ++r) {
          auto row = scores.row(r);
          const double m = row.maxCoeff();
          row = (row.array() - m).exp();
          row /= row.sum();
        }
        O.middleRows(r0, rows).noalias() = scores * V;
        if (keep) probs.push_back(scores);
      }
    }
  }
  if (!keep) return t.record(std::move(out), {q, k, v}, {});

  return t.record(std::move(out), {q, k, v},
                  [q, k, v, nw, heads, tokens, d, hd, scale_factor, probs = std::move(probs)](Tape& tp,
                                                                                            const Tensor& g) {
                    const auto T = static_cast<Eigen::Index>(tokens);
                    const auto HD = static_cast<Eigen::Index>(hd);
                    const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
                    const auto& qv = tp.value(q);
                    const auto& kv = tp.value(k);
                    const auto& vv = tp.value(v);
                    Tensor gq(qv.shape()), gk(kv.shape()), gv(vv.shape());
                    RowMat dp, ds;
                    for (std::size_t win = 0; win < nw; ++win) {
                      for (std::size_t h = 0; h < heads; ++h) {
                        const std::size_t off = win * tokens * d + h * hd;
                        const RowMat& P = probs[win * heads + h];
                        CStridedMap Q(qv.data() + off, T, HD, stride);
                        CStridedMap K(kv.data() + off, T, HD, stride);
                        CStridedMap V(vv.data() + off, T, HD, stride);
                        CStridedMap dO(g.data() + off, T, HD, stride);
                        StridedMap(gv.data() + off, T, HD, stride).noalias() = P.transpose() * dO;
                        dp.noalias() = dO * V.transpose();
                        ds = P.array() * (dp.array().colwise() - (dp.array() * P.array()).rowwise().sum());
                        StridedMap(gq.data() + off, T, HD, stride).noalias() = (ds * K) * scale_factor;
                        StridedMap(gk.data() + off, T, HD, stride).noalias() = (ds.transpose() * Q) * scale_factor;
                      }
                    }
                    tp.accumulate(q, gq);
                    tp.accumulate(k, gk);
                    tp.accumulate(v, gv);
                  });
}

Var global_avg_pool(Tape& t, Var x) {
  const auto& xv = t.value(x);
  require_rank(xv, 3, "global_avg_pool");
  const std::size_t n = xv.dim(0) * xv.dim(1), c = xv.dim(2);
  Tensor out({c});
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += xv[p * c + ch];
  }
  for (std::size_t ch = 0; ch < c; ++ch) out[ch] /= static_cast<double>(n);
  return t.record(std::move(out), {x}, [x, n, c](Tape& tp, const Tensor& g) {
    Tensor gx(tp.value(x).shape());
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) gx[p * c + ch] = g[ch] / static_cast<double>(n);
    }
    tp.accumulate(x, gx);
  });
}

Var mean(Tape& t, Var x) {
  const auto& xv = t.value(x);
  double s = 0;
  for (double e : xv.values()) s += e;
  const auto n = static_cast<double>(xv.size());
  return t.record(Tensor({1}, s / n), {x}, [x, n](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor(tp.value(x).shape(), g[0] / n));
  });
}

Var l1_loss(Tape& t, Var pred, const Tensor& target) {
  const auto& pv = t.value(pred);
  if (pv.shape() != target.shape()) {
    throw ShapeError("l1_loss: shape mismatch " + shape_to_string(pv.shape()) + " vs " +
                     shape_to_string(target.shape()));
  }
  double s = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) s += std::abs(pv[i] - target[i]);
  const auto n = static_cast<double>(pv.size());
  return t.record(Tensor({1}, s / n), {pred}, [pred, target, n](Tape& tp, const Tensor& g) {
    const auto& pv = tp.value(pred);
    Tensor gp(pv.shape());
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double diff = pv[i] - target[i];
      gp[i] = diff > 0 ? g[0] / n : (diff < 0 ? -g[0] / n : 0.0);
    }
    tp.accumulate(pred, gp);
  });
}

}  // namespace i2i::ag
