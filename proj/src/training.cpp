#include "skelact/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "skelact/dif.hpp"
#include "skelact/optimizer.hpp"

namespace skelact {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x73687566666c6573ull;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int argmax_row(const Tensor& probs, int row) {
  int best = 0;
  for (int c = 1; c < probs.dim(1); ++c) {
    if (probs(row, c) > probs(row, best)) best = c;
  }
  return best;
}

// Rank ties break toward the lower class index.
bool in_top_k(const Tensor& probs, int row, int label, int k) {
  const double p = probs(row, label);
  int better = 0;
  for (int c = 0; c < probs.dim(1); ++c) {
    if (c == label) continue;
    if (probs(row, c) > p || (probs(row, c) == p && c < label)) ++better;
  }
  return better < k;
}

Tensor batch_probabilities(const ModelForward& fwd, BranchMode fusion) {
  switch (fusion) {
    case BranchMode::kGlobal: return softmax(fwd.global_logits, 1);
    case BranchMode::kDfl: return softmax(fwd.dfl.aggregate, 1);
    case BranchMode::kBoth: return fuse_inference(fwd.global_logits, fwd.dfl.aggregate);
  }
  throw std::logic_error("unreachable fusion mode");
}

void check_labels(const Dataset& data, int class_count, const char* who) {
  for (const SkeletonClip& clip : data.clips) {
    if (!clip.label) throw std::invalid_argument(std::string(who) + ": every clip needs a label");
    if (*clip.label < 0 || *clip.label >= class_count) {
      throw std::invalid_argument(std::string(who) + ": label " + std::to_string(*clip.label) +
                                  " outside the model's " + std::to_string(class_count) +
                                  " classes");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(lr_drop_factor >= 1.0)) {
    throw std::invalid_argument("train config: learning-rate drop factor must be >= 1");
  }
  for (int e : lr_drop_epochs) {
    if (e < 0) throw std::invalid_argument("train config: drop epochs must be >= 0");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("train config: momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) {
    throw std::invalid_argument("train config: weight decay must be nonnegative");
  }
  if (resample_frames < 2) {
    throw std::invalid_argument("train config: need at least two frames per clip");
  }
}

SkeletonClip preprocess_clip(const SkeletonClip& clip, bool dif, int frames) {
  SkeletonClip out = dif ? apply_dif(clip) : clip;
  if (out.frames() != frames) out = resample_uniform(out, frames);
  return out;
}

Tensor clips_to_batch(const std::vector<const SkeletonClip*>& clips) {
  if (clips.empty()) throw std::invalid_argument("batch: no clips");
  for (const SkeletonClip* clip : clips) {
    if (!clip) throw std::invalid_argument("batch: null clip");
  }
  const int frames = clips.front()->frames();
  const int joints = clips.front()->joints();
  const int batch = static_cast<int>(clips.size());
  Tensor input = Tensor::zeros({batch, 3, frames, joints});
  for (int b = 0; b < batch; ++b) {
    const SkeletonClip& clip = *clips[b];
    if (clip.frames() != frames || clip.joints() != joints) {
      throw std::invalid_argument("batch: clips must share frame and joint counts");
    }
    for (int t = 0; t < frames; ++t) {
      for (int v = 0; v < joints; ++v) {
        for (int c = 0; c < 3; ++c) input(b, c, t, v) = clip.positions(t, v, c);
      }
    }
  }
  return input;
}

Tensor predict_probabilities(Model& model, const Tensor& input, BranchMode fusion) {
  ModelForward fwd = model.forward(input, nullptr, fusion);
  return batch_probabilities(fwd, fusion);
}

EvalResult evaluate(Model& model, const Dataset& data, BranchMode fusion,
                    const TrainConfig& config) {
  config.validate();
  if (data.clips.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int classes = model.config().class_count;
  check_labels(data, classes, "evaluate");

  model.set_mode(Mode::kEval);
  EvalResult result;
  result.confusion = Tensor::zeros({classes, classes});
  const int top_k = std::min(5, classes);
  const int n = static_cast<int>(data.clips.size());
  int correct1 = 0, correct5 = 0;
  for (int start = 0; start < n; start += config.batch_size) {
    const int count = std::min(config.batch_size, n - start);
    std::vector<SkeletonClip> prepped;
    prepped.reserve(count);
    std::vector<const SkeletonClip*> ptrs;
    for (int i = 0; i < count; ++i) {
      prepped.push_back(preprocess_clip(data.clips[start + i], config.dif_enabled,
                                        config.resample_frames));
      ptrs.push_back(&prepped.back());
    }
    const Tensor probs = predict_probabilities(model, clips_to_batch(ptrs), fusion);
    for (int i = 0; i < count; ++i) {
      const int label = *data.clips[start + i].label;
      const int predicted = argmax_row(probs, i);
      result.confusion(label, predicted) += 1.0;
      if (predicted == label) ++correct1;
      if (in_top_k(probs, i, label, top_k)) ++correct5;
    }
  }
  result.top1 = static_cast<double>(correct1) / n;
  result.top5 = static_cast<double>(correct5) / n;
  return result;
}

std::vector<MetricsRecord> train(Model& model, const Dataset& train_split,
                                 const Dataset& val_split, const TrainConfig& config) {
  config.validate();
  if (train_split.clips.empty()) throw std::invalid_argument("train: empty training split");
  const int classes = model.config().class_count;
  check_labels(train_split, classes, "train");

  const int n = static_cast<int>(train_split.clips.size());
  std::vector<SkeletonClip> prepped;
  prepped.reserve(n);
  std::vector<int> labels;
  labels.reserve(n);
  for (const SkeletonClip& clip : train_split.clips) {
    prepped.push_back(preprocess_clip(clip, config.dif_enabled, config.resample_frames));
    labels.push_back(*clip.label);
  }

  std::vector<ParamRef> active = model.params(config.branch_mode);
  SgdNesterov optimizer(config.lr0, config.momentum, config.weight_decay);
  RandomStream shuffle_rng(RandomStream::mix(config.seed, kShuffleSalt));
  model.set_stat_tracking(true);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<MetricsRecord> records;
  records.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model.set_mode(Mode::kTrain);
    optimizer.set_learning_rate(scheduled_learning_rate(config.lr0, config.lr_drop_epochs,
                                                        config.lr_drop_factor, epoch));
    shuffle_rng.shuffle(order);

    double sum_global = 0.0, sum_segment = 0.0, sum_slot = 0.0, sum_aggregate = 0.0;
    int train_correct = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      std::vector<const SkeletonClip*> ptrs;
      std::vector<int> batch_labels;
      for (int i = 0; i < count; ++i) {
        ptrs.push_back(&prepped[order[start + i]]);
        batch_labels.push_back(labels[order[start + i]]);
      }
      model.zero_grad();
      ModelForward fwd =
          model.forward(clips_to_batch(ptrs), &batch_labels, config.branch_mode);
      model.backward(fwd);
      optimizer.step(active);

      sum_global += fwd.loss_global * count;
      sum_segment += fwd.loss_segment * count;
      sum_slot += fwd.loss_slot * count;
      sum_aggregate += fwd.loss_aggregate * count;
      const Tensor probs = batch_probabilities(fwd, config.branch_mode);
      for (int i = 0; i < count; ++i) {
        if (argmax_row(probs, i) == batch_labels[i]) ++train_correct;
      }
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.loss_global = sum_global / n;
    rec.loss_segment = sum_segment / n;
    rec.loss_slot = sum_slot / n;
    rec.loss_aggregate = sum_aggregate / n;
    rec.train_top1 = static_cast<double>(train_correct) / n;
    if (!val_split.clips.empty()) {
      const EvalResult val = evaluate(model, val_split, config.branch_mode, config);
      rec.val_top1 = val.top1;
      rec.val_top5 = val.top5;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);
  }
  model.set_mode(Mode::kEval);
  return records;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "epoch,lg,ls,ld,la,train_top1,val_top1,val_top5,seconds\n";
  for (const MetricsRecord& rec : records) {
    out << rec.epoch << ',' << fmt_double(rec.loss_global) << ',' << fmt_double(rec.loss_segment)
        << ',' << fmt_double(rec.loss_slot) << ',' << fmt_double(rec.loss_aggregate) << ','
        << fmt_double(rec.train_top1) << ',' << fmt_double(rec.val_top1) << ','
        << fmt_double(rec.val_top5) << ',' << fmt_double(rec.seconds) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<ExperimentPoint> run_reduced_data_experiment(
    const ModelConfig& model_config, const TrainConfig& train_config, const Dataset& train_split,
    const Dataset& val_split, const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds) {
  if (train_split.clips.empty()) throw std::invalid_argument("experiment: empty training split");
  if (val_split.clips.empty()) throw std::invalid_argument("experiment: empty validation split");
  std::vector<ExperimentPoint> points;
  for (double fraction : fractions) {
    for (std::uint64_t seed : seeds) {
      Dataset subset = subsample_stratified(train_split, fraction, seed);
      TrainConfig cfg = train_config;
      cfg.seed = seed;
      Model model(train_split.clips.front().topology, model_config, seed);
      const std::vector<MetricsRecord> records = train(model, subset, val_split, cfg);
      points.push_back({fraction, seed, records.back().val_top1});
    }
  }
  return points;
}

std::vector<ExperimentPoint> run_noise_experiment(const ModelConfig& model_config,
                                                  const TrainConfig& train_config,
                                                  const Dataset& train_split,
                                                  const Dataset& val_split,
                                                  const std::vector<double>& sigmas,
                                                  const std::vector<std::uint64_t>& seeds) {
  if (train_split.clips.empty()) throw std::invalid_argument("experiment: empty training split");
  if (val_split.clips.empty()) throw std::invalid_argument("experiment: empty validation split");
  std::vector<ExperimentPoint> points;
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = train_config;
    cfg.seed = seed;
    Model model(train_split.clips.front().topology, model_config, seed);
    train(model, train_split, val_split, cfg);
    for (double sigma : sigmas) {
      Dataset noisy = val_split;
      for (std::size_t i = 0; i < noisy.clips.size(); ++i) {
        noisy.clips[i] = add_gaussian_noise(noisy.clips[i], sigma,
                                            RandomStream::mix(seed, static_cast<std::uint64_t>(i)));
      }
      const EvalResult result = evaluate(model, noisy, cfg.branch_mode, cfg);
      points.push_back({sigma, seed, result.top1});
    }
  }
  std::stable_sort(points.begin(), points.end(), [](const ExperimentPoint& a,
                                                    const ExperimentPoint& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.seed < b.seed;
  });
  return points;
}

void write_experiment_csv(const std::string& path, const std::string& x_name,
                          const std::vector<ExperimentPoint>& points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << x_name << ",seed,top1\n";
  for (const ExperimentPoint& point : points) {
    out << fmt_double(point.x) << ',' << point.seed << ',' << fmt_double(point.top1) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace skelact
