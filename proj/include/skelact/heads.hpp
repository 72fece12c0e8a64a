#pragma once

#include <memory>
#include <vector>

#include "skelact/layers.hpp"

namespace skelact {

/// How segment saliency is scored: the max class probability after a
/// softmax (comparable across segments) or the raw max logit.
enum class SaliencyMode { kSoftmax, kLogit };

std::string saliency_mode_name(SaliencyMode mode);
SaliencyMode saliency_mode_from_name(const std::string& name);

/// Average-pool the feature map over time and joints, then classify:
/// [B×C×T×V] -> logits [B×c].
class GlobalBranch : public Layer {
 public:
  GlobalBranch(int channels, int classes, RandomStream& rng);

  Tensor forward(const Tensor& f_out) override;
  Tensor backward(const Tensor& logit_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

  int classes() const { return fc_.out_features(); }

 private:
  GlobalAveragePool pool_;
  Dense fc_;
};

/// Everything the discriminative branch produces for one batch.
struct DflResult {
  Tensor segments;        // [B×N×C]  pooled segment features
  Tensor segment_logits;  // [B×N×c]  shared classifier outputs
  Tensor saliency;        // [B×N]    per-segment scores
  std::vector<std::vector<int>> selected;  // per sample, strictly ascending, size D
  Tensor slot_logits;     // [B×D×c]  per-slot classifier outputs
  Tensor aggregate;       // [B×c]    summed slot logits
};

/// Discriminative feature branch: segment pooling, a shared segment
/// classifier, saliency-based top-D selection (constant during the backward
/// pass), and per-slot classifiers with independent parameters where slot m
/// receives each sample's m-th earliest selected segment.
class DflBranch {
 public:
  DflBranch(int channels, int classes, int n_segments, int n_selected, SaliencyMode mode,
            RandomStream& rng);

  /// forced_selection overrides the saliency ranking (one ascending index
  /// list per sample); used by visualization and tests.
  DflResult forward(const Tensor& f_out,
                    const std::vector<std::vector<int>>* forced_selection = nullptr);

  /// Gradients with respect to the three logit outputs; returns the
  /// gradient with respect to f_out. Selection indices are constants.
  Tensor backward(const Tensor& segment_logit_grad, const Tensor& slot_logit_grad,
                  const Tensor& aggregate_grad);

  /// Backpropagates a gradient on the pooled segment map [B×N×C] through
  /// the segment pooling of the most recent forward only (classifiers
  /// untouched); used to trace single segment features back to the input.
  Tensor segment_pool_backward(const Tensor& map_grad);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  std::vector<ParamRef> params();
  void zero_grad();

  int segment_count() const { return n_segments_; }
  int selected_count() const { return n_selected_; }
  int classes() const { return classes_; }
  SaliencyMode saliency_mode() const { return mode_; }

 private:
  int channels_, classes_, n_segments_, n_selected_;
  SaliencyMode mode_;
  SegmentAveragePool pool_;
  Dense shared_h_;
  std::vector<std::unique_ptr<Dense>> slots_;
  // caches
  std::vector<std::vector<int>> cached_selected_;
  std::vector<int> cached_map_shape_;
  int cached_batch_ = 0;
  bool has_cache_ = false;
};

/// Max class score per segment from shared-classifier logits [B×N×c].
Tensor saliency_scores(const Tensor& segment_logits, SaliencyMode mode);

/// Top-D segments per sample by score; ties prefer the smaller index and
/// the result is sorted ascending in time.
std::vector<std::vector<int>> select_top_segments(const Tensor& scores, int n_selected);

struct DflLosses {
  double segment_loss = 0.0;    // mean segment cross-entropy
  double slot_loss = 0.0;       // mean slot cross-entropy
  double aggregate_loss = 0.0;  // cross-entropy of the summed slot logits
  Tensor segment_logit_grad;    // [B×N×c]
  Tensor slot_logit_grad;       // [B×D×c]
  Tensor aggregate_grad;        // [B×c]
};

/// Cross-entropy losses (and logit gradients) for the discriminative branch.
DflLosses dfl_losses(const DflResult& result, const std::vector<int>& labels);

/// Unweighted sum of the four training loss components.
inline double total_loss(double global_loss, double segment_loss, double slot_loss,
                         double aggregate_loss) {
  return global_loss + segment_loss + slot_loss + aggregate_loss;
}

/// Mean of the two branch softmaxes: probabilities [B×c].
Tensor fuse_inference(const Tensor& global_logits, const Tensor& aggregate_logits);

}  // namespace skelact
