#include "i2i/reporting/tables.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

struct Cell {
  bool present = false;
  double psnr = 0.0, ssim = 0.0, nrmse = 0.0;
};

struct Grid {
  std::vector<std::string> rows;
  std::vector<std::vector<Cell>> cells;
};

Grid arrange(const std::vector<MetricReport>& reports) {
  const auto& tasks = table_tasks();
  Grid g;
  for (const auto& r : reports) {
    std::size_t col = tasks.size();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i] == r.task) col = i;
    }
    if (col == tasks.size()) throw DataError("unknown task '" + r.task + "' in report for " + r.model);
    std::size_t row = 0;
    while (row < g.rows.size() && g.rows[row] != r.model) ++row;
    if (row == g.rows.size()) {
      g.rows.push_back(r.model);
      g.cells.emplace_back(tasks.size());
    }
    g.cells[row][col] = {true, r.psnr_mean, r.ssim_mean, r.nrmse_mean};
  }
  return g;
}

std::vector<std::string> values(const Cell& c) {
  if (!c.present) return {"-", "-", "-"};
  return {format_metric(c.psnr, 2), format_metric(c.ssim, 3), format_metric(c.nrmse, 4)};
}

const char* first_column(TableLayout layout) { return layout == TableLayout::models ? "Model" : "Encoder"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_metric(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

const std::vector<std::string>& table_tasks() {
  static const std::vector<std::string> tasks = {"T1→T2", "T2→T1", "T1→PD", "PD→T1"};
  return tasks;
}

std::string render_markdown_table(const std::vector<MetricReport>& reports, TableLayout layout) {
  const Grid g = arrange(reports);
  std::vector<std::string> groups = {first_column(layout)}, subs = {""}, align = {"---"};
  for (const auto& t : table_tasks()) {
    groups.insert(groups.end(), {t, "", ""});
    subs.insert(subs.end(), {"PSNR", "SSIM", "NRMSE"});
    align.insert(align.end(), 3, "---:");
  }
  std::vector<std::vector<std::string>> lines = {groups, align, subs};
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    std::vector<std::string> line = {g.rows[r]};
    for (const auto& c : g.cells[r]) {
      for (auto& v : values(c)) line.push_back(std::move(v));
    }
    lines.push_back(std::move(line));
  }
  std::ostringstream os;
  for (const auto& line : lines) {
    os << '|';
    for (const auto& cell : line) os << ' ' << cell << (cell.empty() ? "|" : " |");
    os << '\n';
  }
  return os.str();
}

std::string render_csv_table(const std::vector<MetricReport>& reports, TableLayout layout) {
  const Grid g = arrange(reports);
  std::ostringstream os;
  os << first_column(layout);
  for (const auto& t : table_tasks()) os << ',' << t << " PSNR," << t << " SSIM," << t << " NRMSE";
  os << '\n';
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    os << g.rows[r];
    for (const auto& c : g.cells[r]) {
      for (const auto& v : values(c)) os << ',' << v;
    }
    os << '\n';
  }
  return os.str();
}

void report_tables(const std::vector<MetricReport>& reports, const std::filesystem::path& dir, const std::string& stem,
                   TableLayout layout) {
  if (reports.empty()) throw DataError("report_tables: no reports");
  std::filesystem::create_directories(dir);
  for (const auto& [ext, text] : {std::pair{".md", render_markdown_table(reports, layout)},
                                  std::pair{".csv", render_csv_table(reports, layout)}}) {
    const auto path = dir / (stem + ext);
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "model,task,psnr,ssim,nrmse,count\n";
  for (const auto& r : reports) {
    os << r.model << ',' << r.task << ',' << format_metric(r.psnr_mean, 6) << ',' << format_metric(r.ssim_mean, 8)
       << ',' << format_metric(r.nrmse_mean, 8) << ',' << r.count() << '\n';
  }
}

std::vector<MetricReport> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("model,task,psnr,ssim,nrmse", 0) != 0) {
    throw DataError(path.string() + ": expected header model,task,psnr,ssim,nrmse[,count]");
  }
  std::vector<MetricReport> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 5) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected at least 5 fields");
    try {
      MetricReport r;
      r.model = f[0];
      r.task = f[1];
      r.psnr_mean = parse_metric(f[2]);
      r.ssim_mean = parse_metric(f[3]);
      r.nrmse_mean = parse_metric(f[4]);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed metric value");
    }
  }
  return out;
}

}  // namespace i2i
