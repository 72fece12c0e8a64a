#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skelact/clip_io.hpp"
#include "skelact/runconfig.hpp"
#include "skelact/synthetic.hpp"
#include "skelact/training.hpp"
#include "skelact/verification.hpp"
#include "skelact/visualize.hpp"

namespace fs = std::filesystem;
using namespace skelact;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitEmpty = 2;
constexpr int kExitVerification = 3;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (!item.empty()) values.push_back(std::stod(item));
    pos = comma + 1;
  }
  if (values.empty()) throw std::runtime_error("empty number list: '" + text + "'");
  return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (double v : parse_double_list(text)) seeds.push_back(static_cast<std::uint64_t>(v));
  return seeds;
}

ClipFormat resolve_format(const std::string& format, const std::string& path) {
  if (format == "json") return ClipFormat::kJson;
  if (format == "ntu") return ClipFormat::kNtu;
  return detect_clip_format(path);
}

void write_confusion_csv(const std::string& path, const Tensor& confusion) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "class";
  for (int j = 0; j < confusion.dim(1); ++j) out << ",pred_" << j;
  out << '\n';
  for (int i = 0; i < confusion.dim(0); ++i) {
    out << i;
    for (int j = 0; j < confusion.dim(1); ++j) {
      out << ',' << static_cast<long long>(confusion(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

struct LoadedRun {
  RunConfig config;
  Dataset train;
  Dataset val;
};

LoadedRun load_run_data(const std::string& config_path) {
  LoadedRun run;
  run.config = load_run_config(config_path);
  if (!fs::is_directory(run.config.data_dir)) {
    throw std::runtime_error(run.config.data_dir + ": data directory does not exist");
  }
  fs::create_directories(run.config.output_dir);
  save_run_config((fs::path(run.config.output_dir) / "effective_config.json").string(),
                  run.config);
  std::tie(run.train, run.val) = load_dataset(run.config.data_dir);
  const int data_classes = std::max(run.train.class_count, run.val.class_count);
  if (data_classes > run.config.model.class_count) {
    throw std::runtime_error("data has " + std::to_string(data_classes) +
                             " classes but the model is configured for " +
                             std::to_string(run.config.model.class_count));
  }
  return run;
}

int cmd_generate(const std::string& out_dir, int classes, int clips_per_class, int frames,
                 std::uint64_t seed, double val_fraction) {
  SyntheticSpec spec;
  spec.class_count = classes;
  spec.clips_per_class = clips_per_class;
  spec.frames = frames;
  spec.seed = seed;
  Dataset all = generate_synthetic_dataset(spec);
  auto [train, val] = split_dataset(all, val_fraction, seed);
  fs::create_directories(out_dir);
  save_dataset(out_dir, train, val);
  std::cout << "wrote " << train.clips.size() << " train and " << val.clips.size()
            << " val clips to " << out_dir << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& in_dir, const std::string& out_dir, bool dif, int resample,
                   const std::string& format) {
  if (!fs::is_directory(in_dir)) {
    std::cerr << "error: " << in_dir << ": input directory does not exist\n";
    return kExitUsage;
  }

  std::vector<ManifestEntry> inputs;
  if (fs::exists(fs::path(in_dir) / "manifest.csv")) {
    inputs = read_manifest(in_dir);
  } else {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".json" || ext == ".skeleton") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) inputs.push_back({name, std::nullopt, "train"});
  }

  fs::create_directories(out_dir);
  std::vector<ManifestEntry> written;
  std::size_t failures = 0;
  for (const ManifestEntry& entry : inputs) {
    const std::string in_path = (fs::path(in_dir) / entry.path).string();
    try {
      SkeletonClip clip = parse_clip_file(in_path, resolve_format(format, in_path));
      if (!clip.label) clip.label = entry.label;
      SkeletonClip processed = preprocess_clip(clip, dif, resample);
      fs::path rel(entry.path);
      rel.replace_extension(".json");
      fs::create_directories((fs::path(out_dir) / rel).parent_path());
      write_clip_file((fs::path(out_dir) / rel).string(), processed);
      written.push_back({rel.string(), processed.label, entry.split});
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }

  if (written.empty()) {
    std::cerr << "error: no clips written\n";
    return kExitEmpty;
  }
  write_manifest(out_dir, written);
  std::cout << "preprocessed " << written.size() << " clips (" << failures << " failures) into "
            << out_dir << "\n";
  return failures == 0 ? kExitOk : kExitUsage;
}

int cmd_train(const std::string& config_path) {
  LoadedRun run = load_run_data(config_path);
  if (run.train.clips.empty()) throw std::runtime_error("training split is empty");

  Model model(run.train.clips.front().topology, run.config.model, run.config.seed);
  std::vector<MetricsRecord> records = train(model, run.train, run.val, run.config.train);

  const fs::path out(run.config.output_dir);
  write_metrics_csv((out / "metrics.csv").string(), records);
  model.save((out / "model.ckpt").string());
  const MetricsRecord& last = records.back();
  std::cout << "trained " << records.size() << " epochs; final train_top1 "
            << fmt_double(last.train_top1) << " val_top1 " << fmt_double(last.val_top1)
            << " val_top5 " << fmt_double(last.val_top5) << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& fusion_name) {
  LoadedRun run = load_run_data(config_path);
  if (run.val.clips.empty()) {
    std::cerr << "error: validation split is empty\n";
    return kExitEmpty;
  }
  const fs::path out(run.config.output_dir);
  const std::string checkpoint = (out / "model.ckpt").string();
  if (!fs::exists(checkpoint)) {
    throw std::runtime_error(checkpoint + ": checkpoint not found (run train first)");
  }
  Model model = Model::load(checkpoint);
  const BranchMode fusion = fusion_name.empty() ? run.config.train.branch_mode
                                                : branch_mode_from_name(fusion_name);
  EvalResult result = evaluate(model, run.val, fusion, run.config.train);
  write_confusion_csv((out / "confusion.csv").string(), result.confusion);
  std::cout << "top1 " << fmt_double(result.top1) << "\n"
            << "top5 " << fmt_double(result.top5) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, bool corrupt) {
  RunConfig config = load_run_config(config_path);
  const double tolerance = 1e-4;
  std::vector<SuiteCheck> checks = run_gradient_suite(config.model, tolerance, corrupt);
  std::cout << gradient_suite_table(checks, tolerance);
  double worst = 0.0;
  for (const SuiteCheck& check : checks) worst = std::max(worst, check.report.max_error());
  if (!gradient_suite_passed(checks)) {
    std::cout << "gradient suite FAILED (max error " << fmt_double(worst) << ", tolerance "
              << fmt_double(tolerance) << ")\n";
    return kExitVerification;
  }
  std::cout << "gradient suite passed (max error " << fmt_double(worst) << ", tolerance "
            << fmt_double(tolerance) << ")\n";
  return kExitOk;
}

int cmd_experiment(const std::string& config_path, const std::string& kind,
                   const std::string& fractions, const std::string& sigmas,
                   const std::string& seeds) {
  LoadedRun run = load_run_data(config_path);
  const std::vector<std::uint64_t> seed_list = parse_seed_list(seeds);
  const fs::path out(run.config.output_dir);
  std::vector<ExperimentPoint> points;
  std::string csv_path;
  if (kind == "reduced") {
    points = run_reduced_data_experiment(run.config.model, run.config.train, run.train, run.val,
                                         parse_double_list(fractions), seed_list);
    csv_path = (out / "reduced_data.csv").string();
    write_experiment_csv(csv_path, "fraction", points);
  } else {
    points = run_noise_experiment(run.config.model, run.config.train, run.train, run.val,
                                  parse_double_list(sigmas), seed_list);
    csv_path = (out / "noise.csv").string();
    write_experiment_csv(csv_path, "sigma", points);
  }
  std::cout << "wrote " << points.size() << " points to " << csv_path << "\n";
  return kExitOk;
}

int cmd_visualize(const std::string& checkpoint, const std::string& clip_path,
                  const std::string& out_dir, bool dif, int resample) {
  Model model = Model::load(checkpoint);
  SkeletonClip clip = parse_clip_file(clip_path, detect_clip_format(clip_path));
  SaliencyResult result = compute_saliency(model, clip, dif, resample);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_heat_curves_csv((out / "heat_curves.csv").string(), result);
  write_joint_heat_csv((out / "joint_heat.csv").string(), result);
  for (std::size_t m = 0; m < result.selected.size(); ++m) {
    Tensor image = Tensor::zeros({result.frame_joint.dim(1), result.frame_joint.dim(2)});
    for (int t = 0; t < image.dim(0); ++t) {
      for (int v = 0; v < image.dim(1); ++v) {
        image(t, v) = result.frame_joint(static_cast<int>(m), t, v);
      }
    }
    write_pgm((out / ("saliency_segment_" + std::to_string(result.selected[m]) + ".pgm")).string(),
              image);
  }
  std::cout << "selected segments:";
  for (std::size_t m = 0; m < result.selected.size(); ++m) {
    std::cout << ' ' << result.selected[m] << " (frames " << result.input_ranges[m][0] << ".."
              << result.input_ranges[m][1] << ")";
  }
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton action recognition: training, evaluation, and diagnostics"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "write a synthetic skeleton dataset");
  std::string gen_out;
  int gen_classes = 8, gen_clips = 40, gen_frames = 100;
  std::uint64_t gen_seed = 0;
  double gen_val_fraction = 0.2;
  generate->add_option("--out", gen_out, "output dataset directory")->required();
  generate->add_option("--classes", gen_classes, "number of action classes");
  generate->add_option("--clips-per-class", gen_clips, "clips per class");
  generate->add_option("--frames", gen_frames, "frames per clip");
  generate->add_option("--seed", gen_seed, "generator seed");
  generate->add_option("--val-fraction", gen_val_fraction, "fraction held out for validation");

  auto* preprocess = app.add_subcommand("preprocess", "parse, canonicalize, and resample clips");
  std::string pre_in, pre_out, pre_format = "auto";
  bool pre_dif = false;
  int pre_resample = 100;
  preprocess->add_option("--in", pre_in, "input clip directory")->required();
  preprocess->add_option("--out", pre_out, "output clip directory")->required();
  preprocess->add_flag("--dif", pre_dif, "apply the direction-invariant transform");
  preprocess->add_option("--resample", pre_resample, "frames per output clip");
  preprocess->add_option("--format", pre_format, "input format")
      ->check(CLI::IsMember({"auto", "json", "ntu"}));

  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "run config JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate the trained checkpoint");
  std::string eval_config, eval_fusion;
  eval_cmd->add_option("--config", eval_config, "run config JSON")->required();
  eval_cmd->add_option("--fusion", eval_fusion, "prediction mode")
      ->check(CLI::IsMember({"global", "dfl", "both"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string grad_config;
  bool grad_corrupt = false;
  gradcheck->add_option("--config", grad_config, "run config JSON")->required();
  gradcheck->add_flag("--corrupt-backward", grad_corrupt,
                      "negative control: falsify one gradient and expect failure");

  auto* experiment = app.add_subcommand("experiment", "reduced-data / noise-robustness sweeps");
  std::string exp_config, exp_kind;
  std::string exp_fractions = "1,0.5,0.25,0.1";
  std::string exp_sigmas = "0,0.02,0.05,0.1";
  std::string exp_seeds = "0,1,2";
  experiment->add_option("--config", exp_config, "run config JSON")->required();
  experiment->add_option("--kind", exp_kind, "sweep kind")
      ->required()
      ->check(CLI::IsMember({"reduced", "noise"}));
  experiment->add_option("--fractions", exp_fractions, "comma-separated training fractions");
  experiment->add_option("--sigmas", exp_sigmas, "comma-separated noise levels (meters)");
  experiment->add_option("--seeds", exp_seeds, "comma-separated seeds");

  auto* visualize = app.add_subcommand("visualize", "saliency heat maps for one clip");
  std::string vis_checkpoint, vis_clip, vis_out;
  bool vis_dif = true;
  int vis_resample = 100;
  visualize->add_option("--checkpoint", vis_checkpoint, "trained model checkpoint")->required();
  visualize->add_option("--clip", vis_clip, "clip file (json or ntu)")->required();
  visualize->add_option("--out", vis_out, "output directory")->required();
  visualize->add_flag("--dif,!--no-dif", vis_dif, "apply the direction-invariant transform");
  visualize->add_option("--resample", vis_resample, "frames fed to the model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) {
      return cmd_generate(gen_out, gen_classes, gen_clips, gen_frames, gen_seed, gen_val_fraction);
    }
    if (preprocess->parsed()) {
      return cmd_preprocess(pre_in, pre_out, pre_dif, pre_resample, pre_format);
    }
    if (train_cmd->parsed()) return cmd_train(train_config);
    if (eval_cmd->parsed()) return cmd_eval(eval_config, eval_fusion);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_config, grad_corrupt);
    if (experiment->parsed()) {
      return cmd_experiment(exp_config, exp_kind, exp_fractions, exp_sigmas, exp_seeds);
    }
    if (visualize->parsed()) {
      return cmd_visualize(vis_checkpoint, vis_clip, vis_out, vis_dif, vis_resample);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
