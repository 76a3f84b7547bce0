#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "i2i/core/errors.hpp"
#include "i2i/reporting/bench.hpp"
#include "i2i/reporting/manifest.hpp"
#include "i2i/reporting/png.hpp"
#include "i2i/reporting/tables.hpp"
#include "i2i/reporting/visualize.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace i2i;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("i2i_report_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const fs::path kGolden = I2I_GOLDEN_DIR;

}  // namespace

TEST(Tables, ModelComparisonMatchesGolden) {
  const auto reports = read_summary_csv(kGolden / "model_comparison_values.csv");
  EXPECT_EQ(render_markdown_table(reports, TableLayout::models), read_file(kGolden / "model_comparison.md"));
  EXPECT_EQ(render_csv_table(reports, TableLayout::models), read_file(kGolden / "model_comparison.csv"));
}

TEST(Tables, EncoderAblationMatchesGolden) {
  const auto reports = read_summary_csv(kGolden / "encoder_ablation_values.csv");
  const auto dir = scratch("ablation");
  report_tables(reports, dir, "ablation", TableLayout::encoders);
  EXPECT_EQ(read_file(dir / "ablation.md"), read_file(kGolden / "encoder_ablation.md"));
  EXPECT_EQ(read_file(dir / "ablation.csv"), read_file(kGolden / "encoder_ablation.csv"));
}

TEST(Tables, MissingCellsAndUnknownTasks) {
  MetricReport r;
  r.model = "m";
  r.task = "T1→PD";
  r.psnr_mean = 25.0;
  r.ssim_mean = 0.9;
  r.nrmse_mean = 0.1;
  const auto csv = render_csv_table({r}, TableLayout::models);
  EXPECT_NE(csv.find("m,-,-,-,-,-,-,25.00,0.900,0.1000,-,-,-"), std::string::npos);
  r.task = "T2→PD";
  EXPECT_THROW(render_markdown_table({r}, TableLayout::models), DataError);
  EXPECT_THROW(report_tables({}, scratch("empty"), "x", TableLayout::models), DataError);
}

TEST(Tables, SummaryCsvRoundTrip) {
  const auto dir = scratch("summary");
  auto r = aggregate("model A", "PD→T1", {{"s", 0, 31.25, 0.95, 0.07}, {"s", 1, 30.75, 0.93, 0.09}});
  write_summary_csv(dir / "s.csv", {r});
  const auto back = read_summary_csv(dir / "s.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].model, "model A");
  EXPECT_EQ(back[0].task, "PD→T1");
  EXPECT_NEAR(back[0].psnr_mean, 31.0, 1e-6);
  EXPECT_NEAR(back[0].ssim_mean, 0.94, 1e-8);
  std::ofstream(dir / "bad.csv") << "wrong,header\n";
  EXPECT_THROW(read_summary_csv(dir / "bad.csv"), DataError);
  std::ofstream(dir / "bad2.csv") << "model,task,psnr,ssim,nrmse\nm,T1→T2,abc,0.5,0.1\n";
  EXPECT_THROW(read_summary_csv(dir / "bad2.csv"), DataError);
}

TEST(ErrorMap, FixedScaleAndSaturation) {
  ImageTensor p(1, 4, 1), t(1, 4, 1);
  p.tensor() = Tensor({1, 4, 1}, std::vector<double>{0.0, 0.1, 0.9, 0.2});
  t.tensor() = Tensor({1, 4, 1}, std::vector<double>{0.0, 0.35, 0.1, 0.2});
  const auto e = error_map(p, t);
  EXPECT_EQ(e.at(0, 0), 0.0);
  EXPECT_NEAR(e.at(0, 1), 0.5, 1e-15);
  EXPECT_EQ(e.at(0, 2), 1.0);
  EXPECT_EQ(e.at(0, 3), 0.0);
  EXPECT_THROW(error_map(p, ImageTensor(2, 4, 1)), ShapeError);
}

TEST(FeatureVisualization, NormalizedAndUpsampled) {
  Rng rng(1);
  std::array<Tensor, 4> levels;
  for (std::size_t i = 0; i < 4; ++i) levels[i] = i2i::testing::random_tensor({16u >> i, 16u >> i, 4u << i}, rng);
  const FeaturePyramid pyr(levels);
  for (std::size_t stage = 1; stage <= 4; ++stage) {
    const auto v = feature_visualization(pyr, stage);
    EXPECT_EQ(v.image.height(), 64u);
    EXPECT_EQ(v.image.width(), 64u);
    EXPECT_TRUE(v.image.is_normalized());
    EXPECT_TRUE(v.warnings.empty());
  }
  EXPECT_THROW(feature_visualization(pyr, 0), ConfigError);
  EXPECT_THROW(feature_visualization(pyr, 5), ConfigError);
}

TEST(FeatureVisualization, ConstantMapWarns) {
  std::array<Tensor, 4> levels;
  for (std::size_t i = 0; i < 4; ++i) levels[i] = Tensor({8u >> i, 8u >> i, 4}, 3.0);
  const auto v = feature_visualization(FeaturePyramid(levels), 2);
  ASSERT_EQ(v.warnings.size(), 1u);
  for (double x : v.image.tensor().values()) EXPECT_EQ(x, 0.0);
}

TEST(Png, RoundTripQuantizesTo8Bits) {
  const auto dir = scratch("png");
  ImageTensor img(3, 5, 1);
  for (std::size_t y = 0; y < 3; ++y) {
    for (std::size_t x = 0; x < 5; ++x) img.at(y, x) = (y * 5 + x) / 14.0;
  }
  img.at(0, 0) = -0.5;
  img.at(2, 4) = 1.7;
  write_png_gray(dir / "a.png", img);
  const auto back = read_png_gray(dir / "a.png");
  EXPECT_EQ(back.height(), 3u);
  EXPECT_EQ(back.width(), 5u);
  EXPECT_EQ(back.at(0, 0), 0.0);
  EXPECT_EQ(back.at(2, 4), 1.0);
  for (std::size_t y = 0; y < 3; ++y) {
    for (std::size_t x = 1; x < 4; ++x) {
      EXPECT_EQ(back.at(y, x), std::round(img.at(y, x) * 255.0) / 255.0);
    }
  }
  EXPECT_THROW(read_png_gray(dir / "missing.png"), IoError);
  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png_gray(dir / "junk.png"), IoError);
}

TEST(Bench, RowsCostsAndCsv) {
  BenchOptions o;
  o.dim = 8;
  o.samples = 1;
  o.min_sample_seconds = 0.0;
  const auto r = bench_attention({16, 64, 50}, {4, 16, 9}, o);
  // 16 tokens: window 4 plus global (a 16-token window is the global row).
  // 64 tokens: windows 4 and 16 plus global. 50 is not a square, and a
  // 9-token window does not tile either map.
  EXPECT_EQ(r.rows.size(), 5u);
  EXPECT_FALSE(r.warnings.empty());
  for (const auto& row : r.rows) {
    const auto c = attention_cost(row.n_tokens, row.window, 8, 2);
    EXPECT_EQ(row.score_mix_macs, c.score_mix_macs);
    EXPECT_EQ(row.total_macs, c.score_mix_macs + c.projection_macs);
    EXPECT_GT(row.seconds, 0.0);
    if (row.mode == "global") {
      EXPECT_EQ(row.window, row.n_tokens);
    }
  }
  const auto dir = scratch("bench");
  write_bench_csv(dir / "b.csv", r.rows);
  std::ifstream is(dir / "b.csv");
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "n_tokens,window,mode,score_mix_macs,projection_macs,total_macs,seconds");
}

TEST(Manifest, HashIgnoresTimestampsOnly) {
  RunManifest a;
  a.command = "train";
  a.dataset_hash = "0123456789abcdef";
  a.inputs = {{"task", "t1-t2"}};
  a.started_at = "2026-01-01T00:00:00Z";
  RunManifest b = a;
  b.started_at = "2027-01-01T00:00:00Z";
  b.finished_at = "2027-01-01T01:00:00Z";
  EXPECT_EQ(manifest_hash(a), manifest_hash(b));
  EXPECT_EQ(run_directory("runs", a), run_directory("runs", b));
  EXPECT_EQ(run_directory("runs", a).filename().string(), "train-" + manifest_hash(a).substr(0, 12));

  for (auto change : {+[](RunManifest& m) { m.seed = 1; }, +[](RunManifest& m) { m.config.epochs = 3; },
                      +[](RunManifest& m) { m.inputs["task"] = "t2-t1"; }, +[](RunManifest& m) { m.command = "x"; },
                      +[](RunManifest& m) { m.dataset_hash = ""; }}) {
    RunManifest c = a;
    change(c);
    EXPECT_NE(manifest_hash(c), manifest_hash(a));
  }
  const auto j = to_json(a);
  EXPECT_EQ(j.at("manifest_hash"), manifest_hash(a));
  EXPECT_EQ(j.at("toolkit_version"), kToolkitVersion);
  EXPECT_EQ(utc_timestamp().size(), 20u);
}

TEST(Manifest, FileHashTracksContent) {
  const auto dir = scratch("fh");
  std::ofstream(dir / "a") << "abc";
  std::ofstream(dir / "b") << "abd";
  EXPECT_NE(file_hash(dir / "a"), file_hash(dir / "b"));
  EXPECT_EQ(file_hash(dir / "a").size(), 16u);
}
