#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "i2i/core/errors.hpp"
#include "i2i/metrics/metrics.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace i2i;
using i2i::testing::random_image;

TEST(Metrics, AgreeWithDirectDefinitions) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 11 + rng.below(30), w = 11 + rng.below(30);
    const auto a = random_image(h, w, rng), b = random_image(h, w, rng);
    EXPECT_NEAR(psnr(a, b), i2i::testing::psnr_oracle(a, b), 1e-9);
    EXPECT_NEAR(ssim(a, b), i2i::testing::ssim_oracle(a, b), 1e-9);
    EXPECT_NEAR(nrmse(a, b), i2i::testing::nrmse_oracle(a, b), 1e-12);
  }
}

TEST(Metrics, SsimMultiChannelAndRange) {
  Rng rng(2);
  const auto a = random_image(16, 20, rng, 3), b = random_image(16, 20, rng, 3);
  EXPECT_NEAR(ssim(a, b, 2.0), i2i::testing::ssim_oracle(a, b, 2.0), 1e-9);
  EXPECT_NEAR(psnr(a, b, 2.0), i2i::testing::psnr_oracle(a, b, 2.0), 1e-9);
}

TEST(Metrics, IdentitiesAreExact) {
  Rng rng(3);
  const auto a = random_image(32, 32, rng);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_EQ(nrmse(a, a), 0.0);
}

TEST(Metrics, KnownPsnr) {
  ImageTensor a(4, 4, 1, 0.5), b(4, 4, 1, 0.6);
  // MSE = 0.01 -> 20 dB.
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
}

TEST(Metrics, ErrorsOnDegenerateInputs) {
  EXPECT_THROW(ssim(ImageTensor(10, 40, 1), ImageTensor(10, 40, 1)), ShapeError);
  EXPECT_THROW(nrmse(ImageTensor(16, 16, 1, 0.2), ImageTensor(16, 16, 1, 0.3)), DataError);
  EXPECT_THROW(psnr(ImageTensor(16, 16, 1), ImageTensor(16, 15, 1)), ShapeError);
}

TEST(Metrics, AggregateMeansInOrder) {
  std::vector<ImageMetrics> per = {{"s1", 0, 20.0, 0.5, 0.1}, {"s2", 3, 30.0, 0.7, 0.3}};
  const auto r = aggregate("m", "T1→T2", per);
  EXPECT_EQ(r.count(), 2u);
  EXPECT_DOUBLE_EQ(r.psnr_mean, 25.0);
  EXPECT_DOUBLE_EQ(r.ssim_mean, 0.6);
  EXPECT_DOUBLE_EQ(r.nrmse_mean, 0.2);
  per.push_back({"s3", 1, std::numeric_limits<double>::infinity(), 1.0, 0.0});
  EXPECT_TRUE(std::isinf(aggregate("m", "t", per).psnr_mean));
}

TEST(Metrics, FormatMetric) {
  EXPECT_EQ(format_metric(28.014, 2), "28.01");
  EXPECT_EQ(format_metric(0.1904, 4), "0.1904");
  EXPECT_EQ(format_metric(std::numeric_limits<double>::infinity(), 2), "inf");
}

TEST(Metrics, PerImageCsv) {
  const auto dir = fs::temp_directory_path() / "i2i_metrics_csv";
  fs::create_directories(dir);
  const auto r = aggregate("m", "T1→T2", {{"s1", 4, 20.0, 0.5, 0.1}});
  write_metric_csv(dir / "m.csv", {r});
  std::ifstream is(dir / "m.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "task,subject,slice,psnr,ssim,nrmse");
  EXPECT_EQ(row.rfind("T1→T2,s1,4,", 0), 0u);
}
