#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include "skelact/clip_io.hpp"
#include "skelact/model.hpp"
#include "skelact/runconfig.hpp"
#include "skelact/synthetic.hpp"
#include "skelact/training.hpp"
#include "skelact/verification.hpp"

namespace fs = std::filesystem;
namespace py = pybind11;
using namespace skelact;

namespace {

std::pair<int, int> generate_dataset(const std::string& out_dir, int classes, int clips_per_class,
                                     int frames, std::uint64_t seed, double val_fraction) {
  SyntheticSpec spec;
  spec.class_count = classes;
  spec.clips_per_class = clips_per_class;
  spec.frames = frames;
  spec.seed = seed;
  Dataset all = generate_synthetic_dataset(spec);
  auto [train_split, val_split] = split_dataset(all, val_fraction, seed);
  fs::create_directories(out_dir);
  save_dataset(out_dir, train_split, val_split);
  return {static_cast<int>(train_split.clips.size()), static_cast<int>(val_split.clips.size())};
}

void preprocess_file(const std::string& in_path, const std::string& out_path, bool dif,
                     int frames) {
  SkeletonClip clip = parse_clip_file(in_path, detect_clip_format(in_path));
  write_clip_file(out_path, preprocess_clip(clip, dif, frames));
}

py::dict clip_info(const std::string& path) {
  SkeletonClip clip = parse_clip_file(path, detect_clip_format(path));
  py::dict info;
  info["frames"] = clip.frames();
  info["joints"] = clip.joints();
  info["label"] = clip.label ? py::cast(*clip.label) : py::none();
  return info;
}

py::dict train_run(const std::string& config_path) {
  RunConfig config = load_run_config(config_path);
  auto [train_split, val_split] = load_dataset(config.data_dir);
  if (train_split.clips.empty()) throw std::runtime_error("training split is empty");
  fs::create_directories(config.output_dir);
  save_run_config((fs::path(config.output_dir) / "effective_config.json").string(), config);

  Model model(train_split.clips.front().topology, config.model, config.seed);
  std::vector<MetricsRecord> records = train(model, train_split, val_split, config.train);
  write_metrics_csv((fs::path(config.output_dir) / "metrics.csv").string(), records);
  model.save((fs::path(config.output_dir) / "model.ckpt").string());

  const MetricsRecord& last = records.back();
  py::dict out;
  out["epochs"] = static_cast<int>(records.size());
  out["train_top1"] = last.train_top1;
  out["val_top1"] = last.val_top1;
  out["val_top5"] = last.val_top5;
  return out;
}

py::dict evaluate_checkpoint(const std::string& config_path, const std::string& fusion) {
  RunConfig config = load_run_config(config_path);
  Model model = Model::load((fs::path(config.output_dir) / "model.ckpt").string());
  auto [train_split, val_split] = load_dataset(config.data_dir);
  const BranchMode mode =
      fusion.empty() ? config.train.branch_mode : branch_mode_from_name(fusion);
  EvalResult result = evaluate(model, val_split, mode, config.train);
  py::dict out;
  out["top1"] = result.top1;
  out["top5"] = result.top5;
  return out;
}

std::vector<double> predict(const std::string& checkpoint, const std::string& clip_path,
                            const std::string& fusion, bool dif, int frames) {
  Model model = Model::load(checkpoint);
  SkeletonClip clip = parse_clip_file(clip_path, detect_clip_format(clip_path));
  const SkeletonClip processed = preprocess_clip(clip, dif, frames);
  const Tensor batch = clips_to_batch({&processed});
  const Tensor probabilities = predict_probabilities(model, batch, branch_mode_from_name(fusion));
  std::vector<double> row(probabilities.dim(1));
  for (int c = 0; c < probabilities.dim(1); ++c) row[static_cast<std::size_t>(c)] = probabilities(0, c);
  return row;
}

bool gradient_suite_ok(const std::string& config_path, bool corrupt) {
  RunConfig config = load_run_config(config_path);
  return gradient_suite_passed(run_gradient_suite(config.model, 1e-4, corrupt));
}

}  // namespace

PYBIND11_MODULE(skelact, m) {
  m.doc() = "skeleton action recognition: dataset tools, training, and inference";

  m.def("generate_dataset", &generate_dataset, py::arg("out_dir"), py::arg("classes") = 8,
        py::arg("clips_per_class") = 40, py::arg("frames") = 100, py::arg("seed") = 0,
        py::arg("val_fraction") = 0.2,
        "Write a synthetic dataset; returns (train_count, val_count).");
  m.def("preprocess_file", &preprocess_file, py::arg("in_path"), py::arg("out_path"),
        py::arg("dif") = true, py::arg("frames") = 100,
        "Canonicalize and resample one clip file.");
  m.def("clip_info", &clip_info, py::arg("path"), "Frames, joints, and label of a clip file.");
  m.def("train_run", &train_run, py::arg("config_path"),
        "Train from a run config; writes checkpoint and metrics, returns final metrics.");
  m.def("evaluate_checkpoint", &evaluate_checkpoint, py::arg("config_path"),
        py::arg("fusion") = "", "Evaluate the run's checkpoint on its validation split.");
  m.def("predict", &predict, py::arg("checkpoint"), py::arg("clip_path"),
        py::arg("fusion") = "both", py::arg("dif") = true, py::arg("frames") = 100,
        "Class probabilities for one clip.");
  m.def("gradient_suite_ok", &gradient_suite_ok, py::arg("config_path"),
        py::arg("corrupt") = false, "Run the finite-difference gradient suite.");
}
