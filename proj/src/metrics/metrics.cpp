#include "i2i/metrics/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  const double c = static_cast<double>(kSsimWindow / 2);
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable valid-mode filtering of an (h, w) plane; output (h-10, w-10).
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::array<double, kSsimWindow>& k) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < kSsimWindow; ++i) s += k[i] * plane[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < kSsimWindow; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

double mse(const ImageTensor& a, const ImageTensor& b) {
  const auto av = a.tensor().values();
  const auto bv = b.tensor().values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

}  // namespace

double psnr(const ImageTensor& pred, const ImageTensor& target, double data_range) {
  require_same_shape(pred, target, "psnr");
  if (!(data_range > 0.0)) throw DataError("psnr: data_range must be positive");
  const double m = mse(pred, target);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / m);
}

double ssim(const ImageTensor& pred, const ImageTensor& target, double data_range) {
  require_same_shape(pred, target, "ssim");
  const std::size_t h = pred.height(), w = pred.width(), c = pred.channels();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                     std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
  }
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const auto k = gaussian_kernel();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t i = r * w + col;
        x[i] = pred.at(r, col, ch);
        y[i] = target.at(r, col, ch);
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
    }
    const auto mx = filter_valid(x, h, w, k);
    const auto my = filter_valid(y, h, w, k);
    const auto exx = filter_valid(xx, h, w, k);
    const auto eyy = filter_valid(yy, h, w, k);
    const auto exy = filter_valid(xy, h, w, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * sxy + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sxx + syy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double nrmse(const ImageTensor& pred, const ImageTensor& target) {
  require_same_shape(pred, target, "nrmse");
  const auto tv = target.tensor().values();
  const auto [lo, hi] = std::minmax_element(tv.begin(), tv.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DataError("nrmse: target is constant, normalizer (max - min) is zero");
  return std::sqrt(mse(pred, target)) / range;
}

ImageMetrics measure(const ImageTensor& pred, const ImageTensor& target, std::string subject, std::size_t slice) {
  return ImageMetrics{std::move(subject), slice, psnr(pred, target), ssim(pred, target), nrmse(pred, target)};
}

MetricReport aggregate(std::string model, std::string task, std::vector<ImageMetrics> per_image) {
  MetricReport r{std::move(model), std::move(task), std::move(per_image), 0.0, 0.0, 0.0};
  if (r.per_image.empty()) return r;
  for (const auto& m : r.per_image) {
    r.psnr_mean += m.psnr;
    r.ssim_mean += m.ssim;
    r.nrmse_mean += m.nrmse;
  }
  const auto n = static_cast<double>(r.per_image.size());
  r.psnr_mean /= n;
  r.ssim_mean /= n;
  r.nrmse_mean /= n;
  return r;
}

std::string format_metric(double value, int decimals) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

void write_metric_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "task,subject,slice,psnr,ssim,nrmse\n";
  for (const auto& r : reports) {
    for (const auto& m : r.per_image) {
      os << r.task << ',' << m.subject << ',' << m.slice << ',' << format_metric(m.psnr, 6) << ','
         << format_metric(m.ssim, 8) << ',' << format_metric(m.nrmse, 8) << '\n';
    }
  }
}

}  // namespace i2i
