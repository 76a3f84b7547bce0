#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "i2i/core/image.hpp"

namespace i2i {

/// 10 log10(data_range^2 / MSE); +infinity when the images are identical.
double psnr(const ImageTensor& pred, const ImageTensor& target, double data_range = 1.0);

/// Mean structural similarity over every 11x11 window that fits inside the
/// image (no padding), with Gaussian weights (sigma 1.5), K1 = 0.01 and
/// K2 = 0.03. Channels are scored independently and averaged. Throws
/// ShapeError when an image side is below 11.
double ssim(const ImageTensor& pred, const ImageTensor& target, double data_range = 1.0);

/// RMSE(pred, target) / (max(target) - min(target)). Throws DataError for a
/// constant target.
double nrmse(const ImageTensor& pred, const ImageTensor& target);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct ImageMetrics {
  std::string subject;
  std::size_t slice = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double nrmse = 0.0;
};

ImageMetrics measure(const ImageTensor& pred, const ImageTensor& target, std::string subject = {},
                     std::size_t slice = 0);

/// Aggregate scores of one model on one translation task.
struct MetricReport {
  std::string model;
  std::string task;
  std::vector<ImageMetrics> per_image;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double nrmse_mean = 0.0;

  std::size_t count() const { return per_image.size(); }
};

/// Means are plain arithmetic means in per_image order (an infinite PSNR makes
/// the PSNR mean infinite).
MetricReport aggregate(std::string model, std::string task, std::vector<ImageMetrics> per_image);

/// "inf" for infinite values, otherwise fixed with the given decimals.
std::string format_metric(double value, int decimals);

/// Per-image CSV with header task,subject,slice,psnr,ssim,nrmse.
void write_metric_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

}  // namespace i2i
