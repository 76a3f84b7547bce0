// Command-line front end: data preparation, training, evaluation and reports.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error,
// 3 numerical failure during training.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "i2i/core/errors.hpp"
#include "i2i/data/dataset_io.hpp"
#include "i2i/data/phantom.hpp"
#include "i2i/encoders/encoder.hpp"
#include "i2i/reporting/bench.hpp"
#include "i2i/reporting/manifest.hpp"
#include "i2i/reporting/png.hpp"
#include "i2i/reporting/tables.hpp"
#include "i2i/reporting/visualize.hpp"
#include "i2i/training/evaluate.hpp"

namespace fs = std::filesystem;
using namespace i2i;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericalError = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data_dir;
  std::string out_dir = "runs";
  std::string checkpoint;
  std::string task = "t1-t2";
  std::string encoder;
  std::string dataset;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool data, bool checkpoint, bool task) {
  cmd->add_option("--config", o.config_path, "Experiment config file (key = value)");
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--out-dir", o.out_dir, "Parent directory for the per-run output directory");
  cmd->add_option("--encoder", o.encoder, "Override the encoder kind")
      ->check(CLI::IsMember({"hiera", "cnn", "vit", "hiera_style", "multiscale_cnn", "single_scale_vit"}));
  if (data) {
    cmd->add_option("--data-dir", o.data_dir, "Volume directory (<subject>/<T1|T2|PD>.nii[.gz]); defaults to $I2I_DATA_ROOT");
    cmd->add_option("--dataset", o.dataset, "Prepared dataset archive (overrides --data-dir)");
  }
  if (checkpoint) cmd->add_option("--checkpoint", o.checkpoint, "Training checkpoint");
  if (task) {
    cmd->add_option("--task", o.task, "Translation direction")->check(CLI::IsMember({"t1-t2", "t2-t1", "t1-pd", "pd-t1"}));
  }
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.encoder.empty()) c.encoder_kind = parse_encoder_kind(o.encoder);
  const auto problems = validate_config(c);
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

PairedDataset obtain_dataset(const CommonOptions& o, const ExperimentConfig& c) {
  if (!o.dataset.empty()) {
    PairedDataset ds = load_dataset(o.dataset);
    if (ds.image_size != c.image_size) {
      throw DataError("dataset image size " + std::to_string(ds.image_size) + " does not match config image_size " +
                      std::to_string(c.image_size));
    }
    return ds;
  }
  std::string dir = o.data_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("I2I_DATA_ROOT")) dir = env;
  }
  if (dir.empty()) throw ConfigError("no data: pass --dataset, --data-dir or set I2I_DATA_ROOT");
  PipelineOptions po;
  po.image_size = c.image_size;
  po.seed = c.seed;
  PairedDataset ds = build_dataset(load_volume_directory(dir), parse_task(o.task), po);
  print_warnings(ds.warnings);
  return ds;
}

RunManifest new_manifest(std::string command, const ExperimentConfig& c, std::string dataset_hash) {
  RunManifest m;
  m.command = std::move(command);
  m.config = c;
  m.dataset_hash = std::move(dataset_hash);
  m.seed = c.seed;
  return m;
}

fs::path start_run(RunManifest& m, const CommonOptions& o) {
  m.started_at = utc_timestamp();
  const fs::path dir = run_directory(o.out_dir, m);
  fs::create_directories(dir);
  return dir;
}

void finish_run(RunManifest& m, const fs::path& dir) {
  m.finished_at = utc_timestamp();
  write_manifest(dir / "manifest.json", m);
  std::cout << "output: " << dir.string() << '\n';
}

std::string slice_stem(const PairedSlice& p) { return p.subject_id + "_s" + std::to_string(p.slice_index); }

int run_make_phantom(const CommonOptions& o, std::size_t subjects, std::size_t size) {
  const ExperimentConfig c = resolve_config(o);
  PhantomOptions po;
  po.size = size;
  RunManifest m = new_manifest("make-phantom", c, "");
  m.inputs = {{"subjects", subjects}, {"size", size}};
  const fs::path dir = start_run(m, o);
  write_volume_directory(dir, make_phantom_cohort(subjects, c.seed, po));
  finish_run(m, dir);
  return 0;
}

int run_prepare(const CommonOptions& o) {
  const ExperimentConfig c = resolve_config(o);
  const PairedDataset ds = obtain_dataset(o, c);
  RunManifest m = new_manifest("prepare-data", c, dataset_hash(ds));
  m.inputs = {{"task", ds.task.name()}};
  const fs::path dir = start_run(m, o);
  save_dataset(dir / "dataset.i2i", ds);
  write_dataset_manifest(dir / "manifest.csv", ds);
  std::cout << "train pairs: " << ds.train.size() << " (" << ds.train_subjects.size() << " subjects), test pairs: "
            << ds.test.size() << " (" << ds.test_subjects.size() << " subjects)\n";
  finish_run(m, dir);
  return 0;
}

int run_train(const CommonOptions& o, const std::string& encoder_weights) {
  ExperimentConfig c = resolve_config(o);
  std::optional<Checkpoint> resume;
  if (!o.checkpoint.empty()) {
    resume = load_checkpoint(o.checkpoint);
    if (!(resume->config == c)) {
      throw ConfigError("checkpoint " + o.checkpoint + " was trained with a different configuration");
    }
  }
  const PairedDataset ds = obtain_dataset(o, c);
  const ModelSpec spec = resume ? resume->spec : make_model_spec(c);
  RunManifest m = new_manifest("train", c, dataset_hash(ds));
  m.inputs = {{"task", ds.task.name()}};
  if (resume) m.inputs["resume"] = file_hash(o.checkpoint);
  if (!encoder_weights.empty()) m.inputs["encoder_weights"] = file_hash(encoder_weights);
  const fs::path dir = start_run(m, o);

  TrainState state = resume ? resume->state
                            : init_train_state(c, spec, encoder_weights.empty()
                                                            ? std::nullopt
                                                            : std::optional<fs::path>(encoder_weights));
  TrainOptions to;
  to.out_dir = dir;
  to.on_epoch = [&](std::size_t epoch, double l_img) {
    std::cout << "epoch " << epoch << "/" << c.epochs << "  mean l_img " << format_metric(l_img, 5) << '\n';
  };
  train(c, spec, ds, std::move(state), to);
  finish_run(m, dir);
  return 0;
}

int run_evaluate(const CommonOptions& o, const std::string& model_name, bool baselines) {
  if (o.checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint");
  const ExperimentConfig c = resolve_config(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const PairedDataset ds = obtain_dataset(o, c);
  RunManifest m = new_manifest("evaluate", c, dataset_hash(ds));
  m.inputs = {{"task", ds.task.name()}, {"checkpoint", file_hash(o.checkpoint)}, {"baselines", baselines}};
  const fs::path dir = start_run(m, o);

  std::vector<MetricReport> reports;
  reports.push_back(evaluate_checkpoint(ck, ds, model_name));
  if (baselines) {
    std::vector<std::string> train = ck.train_subjects;
    train.insert(train.end(), ds.train_subjects.begin(), ds.train_subjects.end());
    reports.push_back(evaluate(identity_generator(), ds.test, train, "Identity", ds.task.label()));
  }
  write_metric_csv(dir / "metrics.csv", reports);
  write_summary_csv(dir / "summary.csv", reports);
  for (const auto& r : reports) {
    std::cout << r.model << " " << r.task << ": PSNR " << format_metric(r.psnr_mean, 2) << "  SSIM "
              << format_metric(r.ssim_mean, 3) << "  NRMSE " << format_metric(r.nrmse_mean, 4) << "  (" << r.count()
              << " slices)\n";
  }
  finish_run(m, dir);
  return 0;
}

int run_translate(const CommonOptions& o, const std::string& input) {
  if (o.checkpoint.empty()) throw ConfigError("translate needs --checkpoint");
  const ExperimentConfig c = resolve_config(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  RunManifest m = new_manifest("translate", c, "");
  m.inputs = {{"checkpoint", file_hash(o.checkpoint)}};
  if (!input.empty()) {
    m.inputs["input"] = file_hash(input);
    const ImageTensor src = read_png_gray(input);
    const fs::path dir = start_run(m, o);
    write_png_gray(dir / (fs::path(input).stem().string() + "_translated.png"),
                   translate(src, ck.spec.generator, ck.state.generator));
    finish_run(m, dir);
    return 0;
  }
  const PairedDataset ds = obtain_dataset(o, c);
  m.dataset_hash = dataset_hash(ds);
  const fs::path dir = start_run(m, o);
  for (const auto& p : ds.test) {
    write_png_gray(dir / (slice_stem(p) + "_pred.png"), translate(p.source, ck.spec.generator, ck.state.generator));
  }
  finish_run(m, dir);
  return 0;
}

int run_visualize(const CommonOptions& o, std::size_t index, std::size_t stage) {
  if (o.checkpoint.empty()) throw ConfigError("visualize needs --checkpoint");
  const ExperimentConfig c = resolve_config(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const PairedDataset ds = obtain_dataset(o, c);
  if (index >= ds.test.size()) {
    throw ConfigError("--index " + std::to_string(index) + " out of range (test split has " +
                      std::to_string(ds.test.size()) + " pairs)");
  }
  RunManifest m = new_manifest("visualize", c, dataset_hash(ds));
  m.inputs = {{"checkpoint", file_hash(o.checkpoint)}, {"index", index}, {"stage", stage}};
  const fs::path dir = start_run(m, o);
  const PairedSlice& p = ds.test[index];
  const ImageTensor pred = translate(p.source, ck.spec.generator, ck.state.generator);
  const std::string stem = slice_stem(p);
  write_png_gray(dir / (stem + "_source.png"), p.source);
  write_png_gray(dir / (stem + "_target.png"), p.target);
  write_png_gray(dir / (stem + "_pred.png"), pred);
  write_png_gray(dir / (stem + "_error.png"), error_map(pred, p.target));
  write_png_gray(dir / (stem + "_identity_error.png"), error_map(p.source, p.target));
  const FeaturePyramid pyramid = encode(adapt_channels(p.source), ck.spec.generator.encoder, ck.state.generator);
  const auto vis = feature_visualization(pyramid, stage);
  print_warnings(vis.warnings);
  write_png_gray(dir / (stem + "_features_stage" + std::to_string(stage) + ".png"), vis.image);
  finish_run(m, dir);
  return 0;
}

int run_report(const CommonOptions& o, const std::vector<std::string>& inputs, bool ablation) {
  const ExperimentConfig c = resolve_config(o);
  std::vector<MetricReport> reports;
  RunManifest m = new_manifest("report", c, "");
  m.inputs = {{"ablation", ablation}, {"inputs", nlohmann::json::array()}};
  for (const auto& in : inputs) {
    auto rows = read_summary_csv(in);
    reports.insert(reports.end(), rows.begin(), rows.end());
    m.inputs["inputs"].push_back(file_hash(in));
  }
  if (reports.empty()) throw DataError("report: the inputs contain no rows");
  const fs::path dir = start_run(m, o);
  report_tables(reports, dir, ablation ? "table_encoders" : "table_models",
                ablation ? TableLayout::encoders : TableLayout::models);
  std::cout << render_markdown_table(reports, ablation ? TableLayout::encoders : TableLayout::models);
  finish_run(m, dir);
  return 0;
}

int run_bench(const CommonOptions& o, const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& windows,
              std::size_t dim) {
  const ExperimentConfig c = resolve_config(o);
  BenchOptions bo;
  bo.dim = dim;
  bo.heads = c.heads;
  bo.seed = c.seed;
  if (dim % c.heads != 0) throw ConfigError("--dim must be divisible by heads");
  RunManifest m = new_manifest("bench-attention", c, "");
  m.inputs = {{"sizes", sizes}, {"windows", windows}, {"dim", dim}};
  const fs::path dir = start_run(m, o);
  const BenchResult r = bench_attention(sizes, windows, bo);
  print_warnings(r.warnings);
  write_bench_csv(dir / "bench_attention.csv", r.rows);
  for (const auto& row : r.rows) {
    std::cout << row.mode << " n=" << row.n_tokens << " window=" << row.window << " MACs=" << row.total_macs
              << " time=" << format_metric(row.seconds * 1e3, 3) << " ms\n";
  }
  finish_run(m, dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modality MRI translation with a frozen hierarchical encoder"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* phantom = app.add_subcommand("make-phantom", "Generate a synthetic T1/T2/PD volume cohort");
  std::size_t subjects = 25, phantom_size = 64;
  add_common(phantom, o, false, false, false);
  phantom->add_option("--subjects", subjects, "Number of subjects")->check(CLI::PositiveNumber);
  phantom->add_option("--size", phantom_size, "In-plane size of each slice")->check(CLI::PositiveNumber);

  auto* prepare = app.add_subcommand("prepare-data", "Normalize, slice, split and pair volumes into an archive");
  add_common(prepare, o, true, false, true);

  auto* train_cmd = app.add_subcommand("train", "Train the decoder and discriminator");
  std::string encoder_weights;
  add_common(train_cmd, o, true, true, true);
  train_cmd->add_option("--encoder-weights", encoder_weights, "Pretrained encoder archive");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  std::string model_name = "Ours";
  bool baselines = false;
  add_common(eval_cmd, o, true, true, true);
  eval_cmd->add_option("--model-name", model_name, "Row label in reports");
  eval_cmd->add_flag("--baselines", baselines, "Also score the identity baseline");

  auto* translate_cmd = app.add_subcommand("translate", "Translate a PNG slice or the whole test split");
  std::string input;
  add_common(translate_cmd, o, true, true, true);
  translate_cmd->add_option("--input", input, "Grayscale PNG to translate")->check(CLI::ExistingFile);

  auto* vis_cmd = app.add_subcommand("visualize", "Error maps and encoder feature maps for one test slice");
  std::size_t index = 0, stage = 1;
  add_common(vis_cmd, o, true, true, true);
  vis_cmd->add_option("--index", index, "Test pair index");
  vis_cmd->add_option("--stage", stage, "Encoder stage to visualize (1-4)")->check(CLI::Range(1, 4));

  auto* report_cmd = app.add_subcommand("report", "Render summary CSVs as comparison tables");
  std::vector<std::string> inputs;
  bool ablation = false;
  add_common(report_cmd, o, false, false, false);
  report_cmd->add_option("--input", inputs, "summary.csv files")->required()->check(CLI::ExistingFile);
  report_cmd->add_flag("--ablation", ablation, "Rows are encoders instead of models");

  auto* bench_cmd = app.add_subcommand("bench-attention", "Time windowed vs. global attention");
  std::vector<std::size_t> sizes = {256, 1024, 4096}, windows = {16, 64};
  std::size_t dim = 64;
  add_common(bench_cmd, o, false, false, false);
  bench_cmd->add_option("--sizes", sizes, "Token counts (square maps)")->delimiter(',');
  bench_cmd->add_option("--windows", windows, "Tokens per window (square windows)")->delimiter(',');
  bench_cmd->add_option("--dim", dim, "Channel width")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*phantom) return run_make_phantom(o, subjects, phantom_size);
    if (*prepare) return run_prepare(o);
    if (*train_cmd) return run_train(o, encoder_weights);
    if (*eval_cmd) return run_evaluate(o, model_name, baselines);
    if (*translate_cmd) return run_translate(o, input);
    if (*vis_cmd) return run_visualize(o, index, stage);
    if (*report_cmd) return run_report(o, inputs, ablation);
    if (*bench_cmd) return run_bench(o, sizes, windows, dim);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}
