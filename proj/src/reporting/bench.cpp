#include "i2i/reporting/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "i2i/attention/mask_unit_attention.hpp"
#include "i2i/core/errors.hpp"
#include "i2i/core/rng.hpp"

namespace i2i {
namespace {

std::size_t exact_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : 0;
}

double median_seconds(const Tensor& x, const AttentionParams& params, WindowShape window, const BenchOptions& o) {
  std::vector<double> samples;
  for (std::size_t s = 0; s < std::max<std::size_t>(1, o.samples); ++s) {
    std::size_t reps = 0;
    const auto t0 = std::chrono::steady_clock::now();
    double elapsed = 0.0;
    do {
      const Tensor y = mask_unit_attention(x, params, window);
      if (y.size() == 0) throw StructuralError("empty attention output");
      ++reps;
      elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } while (elapsed < o.min_sample_seconds);
    samples.push_back(elapsed / static_cast<double>(reps));
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace

BenchResult bench_attention(const std::vector<std::size_t>& token_counts, const std::vector<std::size_t>& windows,
                            const BenchOptions& o) {
  BenchResult result;
  Rng rng(o.seed);
  ParameterSet ps;
  init_attention_params(ps, "bench", o.dim, rng, false);
  const AttentionParams params = attention_params_from(ps, "bench", o.heads);

  for (std::size_t n : token_counts) {
    const std::size_t side = exact_sqrt(n);
    if (side == 0) {
      result.warnings.push_back("skipping n_tokens=" + std::to_string(n) + ": not a square map");
      continue;
    }
    Tensor x({side, side, o.dim});
    for (auto& v : x.values()) v = rng.normal();

    auto run = [&](std::size_t w, const char* mode) {
      const std::size_t wside = exact_sqrt(w);
      if (wside == 0 || w > n || side % wside != 0) {
        result.warnings.push_back("skipping n_tokens=" + std::to_string(n) + " window=" + std::to_string(w) +
                                  ": window must be a square whose side divides " + std::to_string(side));
        return;
      }
      const AttentionCost cost = attention_cost(n, w, o.dim, o.heads);
      BenchRow row{n, w, mode, cost.score_mix_macs, cost.projection_macs, cost.score_mix_macs + cost.projection_macs,
                   median_seconds(x, params, {wside, wside}, o)};
      result.rows.push_back(std::move(row));
    };
    for (std::size_t w : windows) {
      if (w == n) continue;  // covered by the global row
      run(w, "windowed");
    }
    run(n, "global");
  }
  return result;
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "n_tokens,window,mode,score_mix_macs,projection_macs,total_macs,seconds\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g", r.seconds);
    os << r.n_tokens << ',' << r.window << ',' << r.mode << ',' << r.score_mix_macs << ',' << r.projection_macs << ','
       << r.total_macs << ',' << buf << '\n';
  }
}

}  // namespace i2i
