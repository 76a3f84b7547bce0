#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "i2i/core/config.hpp"

namespace fs = std::filesystem;
using namespace i2i;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(I2I_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string output_dir(const RunResult& r) {
  const auto pos = r.out.rfind("output: ");
  if (pos == std::string::npos) return "";
  auto end = r.out.find('\n', pos);
  return r.out.substr(pos + 8, end - pos - 8);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("i2i_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("no-such-command").code, 1);
  EXPECT_EQ(run_cli("train --task t1-ct").code, 1);
  EXPECT_EQ(run_cli("visualize --stage 7").code, 1);

  const auto dir = scratch("usage");
  std::ofstream(dir / "bad.cfg") << "image_size = 100\n";
  EXPECT_EQ(run_cli("prepare-data --config " + (dir / "bad.cfg").string() + " --data-dir " + dir.string()).code, 1);
  std::ofstream(dir / "unknown.cfg") << "colour = blue\n";
  EXPECT_EQ(run_cli("bench-attention --config " + (dir / "unknown.cfg").string()).code, 1);
  EXPECT_EQ(run_cli("evaluate --data-dir " + dir.string()).code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
  const auto dir = scratch("data");
  EXPECT_EQ(run_cli("prepare-data --data-dir " + (dir / "absent").string() + " --out-dir " + dir.string()).code, 2);
  EXPECT_EQ(run_cli("train --dataset " + (dir / "absent.i2i").string() + " --out-dir " + dir.string()).code, 2);
}

TEST(Cli, PhantomTrainEvaluateReportFlow) {
  const auto dir = scratch("flow");
  ExperimentConfig c;
  c.image_size = 64;
  c.stage_channels = {8, 16, 32, 64};
  c.epochs = 1;
  c.seed = 11;
  save_config(dir / "tiny.cfg", c);
  const std::string common = " --config " + (dir / "tiny.cfg").string() + " --out-dir " + dir.string();

  const auto phantom = run_cli("make-phantom --subjects 2" + common);
  ASSERT_EQ(phantom.code, 0) << phantom.out;
  const std::string volumes = output_dir(phantom);
  EXPECT_TRUE(fs::exists(fs::path(volumes) / "manifest.json"));

  const auto prepared = run_cli("prepare-data --data-dir " + volumes + common);
  ASSERT_EQ(prepared.code, 0) << prepared.out;
  const std::string dataset = (fs::path(output_dir(prepared)) / "dataset.i2i").string();
  EXPECT_TRUE(fs::exists(dataset));

  const auto trained = run_cli("train --dataset " + dataset + common);
  ASSERT_EQ(trained.code, 0) << trained.out;
  EXPECT_NE(trained.out.find("epoch 1/1"), std::string::npos);
  const fs::path train_dir = output_dir(trained);
  EXPECT_TRUE(fs::exists(train_dir / "loss_history.csv"));
  const std::string ckpt = (train_dir / "final.i2i").string();
  ASSERT_TRUE(fs::exists(ckpt));

  // Mismatched config on resume is a usage error.
  EXPECT_EQ(run_cli("train --dataset " + dataset + common + " --checkpoint " + ckpt + " --seed 99").code, 1);

  const auto evaluated = run_cli("evaluate --baselines --dataset " + dataset + " --checkpoint " + ckpt + common);
  ASSERT_EQ(evaluated.code, 0) << evaluated.out;
  EXPECT_NE(evaluated.out.find("Identity T1→T2"), std::string::npos);
  const fs::path summary = fs::path(output_dir(evaluated)) / "summary.csv";
  ASSERT_TRUE(fs::exists(summary));

  const auto reported = run_cli("report --input " + summary.string() + common);
  ASSERT_EQ(reported.code, 0) << reported.out;
  EXPECT_TRUE(fs::exists(fs::path(output_dir(reported)) / "table_models.md"));

  const auto visual = run_cli("visualize --stage 2 --dataset " + dataset + " --checkpoint " + ckpt + common);
  ASSERT_EQ(visual.code, 0) << visual.out;
  EXPECT_EQ(run_cli("visualize --index 999 --dataset " + dataset + " --checkpoint " + ckpt + common).code, 1);

  const auto translated = run_cli("translate --dataset " + dataset + " --checkpoint " + ckpt + common);
  ASSERT_EQ(translated.code, 0) << translated.out;
}

TEST(Cli, BenchAttentionWritesCsv) {
  const auto dir = scratch("bench");
  const auto r = run_cli("bench-attention --sizes 16,64 --windows 4 --dim 8 --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(fs::path(output_dir(r)) / "bench_attention.csv"));
  EXPECT_EQ(run_cli("bench-attention --dim 7 --out-dir " + dir.string()).code, 1);
}
