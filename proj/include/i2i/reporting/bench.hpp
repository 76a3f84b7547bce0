#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace i2i {

struct BenchOptions {
  std::size_t dim = 64;
  std::size_t heads = 2;
  /// Timed samples per row; the reported time is their median.
  std::size_t samples = 5;
  /// Each sample repeats the call until at least this many seconds elapse.
  double min_sample_seconds = 0.02;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t n_tokens = 0;
  /// Tokens per window; equals n_tokens for global attention.
  std::size_t window = 0;
  std::string mode;  // "windowed" or "global"
  std::uint64_t score_mix_macs = 0;
  std::uint64_t projection_macs = 0;
  std::uint64_t total_macs = 0;
  double seconds = 0.0;  // median wall time of one mask_unit_attention call
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<std::string> warnings;
};

/// Times mask_unit_attention on square maps of n tokens (side sqrt(n)) with
/// square windows of w tokens, plus one global row per n. Entries that are
/// not perfect squares or whose window side does not divide the map side are
/// skipped with a warning.
BenchResult bench_attention(const std::vector<std::size_t>& token_counts, const std::vector<std::size_t>& windows,
                            const BenchOptions& options = {});

/// Header: n_tokens,window,mode,score_mix_macs,projection_macs,total_macs,seconds
void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows);

}  // namespace i2i
