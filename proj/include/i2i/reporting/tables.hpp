#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "i2i/metrics/metrics.hpp"

namespace i2i {

/// Rows are translation models, or image encoders in the ablation layout.
enum class TableLayout { models, encoders };

/// Task column groups in display order: T1→T2, T2→T1, T1→PD, PD→T1.
const std::vector<std::string>& table_tasks();

/// Markdown table: a header row of task groups, a sub-header row of
/// PSNR/SSIM/NRMSE, then one row per model in first-appearance order. PSNR
/// has 2 decimals, SSIM 3, NRMSE 4; missing cells render as "-".
std::string render_markdown_table(const std::vector<MetricReport>& reports, TableLayout layout);

/// Same content as CSV with a single header row ("Model,T1→T2 PSNR,...").
std::string render_csv_table(const std::vector<MetricReport>& reports, TableLayout layout);

/// Writes <stem>.md and <stem>.csv into dir. Throws DataError when reports is empty.
void report_tables(const std::vector<MetricReport>& reports, const std::filesystem::path& dir,
                   const std::string& stem, TableLayout layout);

/// Summary rows "model,task,psnr,ssim,nrmse,count"; task uses the "T1→T2" label.
void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);
/// Reads summary rows back as reports with means only (per_image left empty).
std::vector<MetricReport> read_summary_csv(const std::filesystem::path& path);

}  // namespace i2i
