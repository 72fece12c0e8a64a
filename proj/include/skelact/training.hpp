#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelact/clip.hpp"
#include "skelact/model.hpp"

namespace skelact {

struct TrainConfig {
  int epochs = 120;
  int batch_size = 64;
  double lr0 = 0.1;
  std::vector<int> lr_drop_epochs = {60, 90};
  double lr_drop_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool dif_enabled = true;
  BranchMode branch_mode = BranchMode::kBoth;
  int resample_frames = 100;  // every clip is resampled to this length

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  double loss_global = 0.0, loss_segment = 0.0, loss_slot = 0.0, loss_aggregate = 0.0;
  double train_top1 = 0.0, val_top1 = 0.0, val_top5 = 0.0;
  double seconds = 0.0;
};

struct EvalResult {
  double top1 = 0.0, top5 = 0.0;
  Tensor confusion;  // [c×c], row = true class, column = prediction
};

/// Direction-invariant transform (optional) followed by temporal resampling
/// to a fixed frame count.
SkeletonClip preprocess_clip(const SkeletonClip& clip, bool dif, int frames);

/// Stacks same-shape clips into a [B×3×T×V] input tensor.
Tensor clips_to_batch(const std::vector<const SkeletonClip*>& clips);

/// Class probabilities for one preprocessed batch under the given fusion
/// mode (global -> softmax(global logits), dfl -> softmax(aggregate),
/// both -> their mean).
Tensor predict_probabilities(Model& model, const Tensor& input, BranchMode fusion);

/// Epoch loop: seeded shuffled mini-batches, the configured loss subset,
/// Nesterov momentum steps (only the active branch's parameters), stepped
/// learning-rate schedule, per-epoch metrics with validation accuracy.
std::vector<MetricsRecord> train(Model& model, const Dataset& train_split,
                                 const Dataset& val_split, const TrainConfig& config);

EvalResult evaluate(Model& model, const Dataset& data, BranchMode fusion,
                    const TrainConfig& config);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);

struct ExperimentPoint {
  double x = 0.0;  // fraction or noise sigma
  std::uint64_t seed = 0;
  double top1 = 0.0;
};

/// Per (fraction, seed): train a fresh model on a class-stratified subsample
/// of the training split and evaluate on the fixed validation split.
std::vector<ExperimentPoint> run_reduced_data_experiment(
    const ModelConfig& model_config, const TrainConfig& train_config,
    const Dataset& train_split, const Dataset& val_split, const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds);

/// Per seed: train once on clean data, then evaluate against validation
/// clips perturbed with per-clip Gaussian noise for each sigma.
std::vector<ExperimentPoint> run_noise_experiment(const ModelConfig& model_config,
                                                  const TrainConfig& train_config,
                                                  const Dataset& train_split,
                                                  const Dataset& val_split,
                                                  const std::vector<double>& sigmas,
                                                  const std::vector<std::uint64_t>& seeds);

void write_experiment_csv(const std::string& path, const std::string& x_name,
                          const std::vector<ExperimentPoint>& points);

}  // namespace skelact
