#pragma once

#include <memory>
#include <string>
#include <vector>

#include "skelact/tensor.hpp"

namespace skelact {

enum class Mode { kTrain, kEval };

/// Named view into a layer's parameter and its gradient accumulator.
/// Parameter and gradient tensors always have identical shapes.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Named view into non-learned running statistics (batch norm).
struct StatRef {
  std::string name;
  Tensor* value;
};

/// Forward/backward layer contract. backward() may only be called after a
/// matching forward(); it accumulates parameter gradients (no implicit
/// zeroing) and returns the gradient with respect to the input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& input) = 0;
  virtual Tensor backward(const Tensor& output_grad) = 0;

  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void collect_stats(const std::string& prefix, std::vector<StatRef>& out) {}
  virtual void set_mode(Mode mode) { mode_ = mode; }
  /// Enable/disable batch-norm running-stat updates (frozen during gradient checks).
  virtual void set_stat_tracking(bool on) {}

  Mode mode() const { return mode_; }
  std::vector<ParamRef> params();
  void zero_grad();

 protected:
  void require_cache(bool have, const char* layer) const;
  Mode mode_ = Mode::kTrain;
};

/// y = x W + b with x [B x in], W [in x out], b [out].
class Dense : public Layer {
 public:
  Dense(int in_features, int out_features, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

  int in_features() const { return in_features_; }
  int out_features() const { return out_features_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  int in_features_, out_features_;
  Tensor weight_, bias_;
  Tensor dweight_, dbias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;

 private:
  Tensor cached_input_;
  bool has_cache_ = false;
};

/// Per-channel batch norm over every non-channel axis of [B x C x ...].
/// Running stats use keep-momentum 0.9; eval mode normalizes with them.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int channels, double momentum = 0.9, double epsilon = 1e-5);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_stats(const std::string& prefix, std::vector<StatRef>& out) override;
  void set_stat_tracking(bool on) override { track_stats_ = on; }

  int channels() const { return channels_; }

 private:
  int channels_;
  double momentum_, epsilon_;
  bool track_stats_ = true;
  Tensor gamma_, beta_, dgamma_, dbeta_;
  Tensor running_mean_, running_var_;
  // caches
  Tensor cached_xhat_;
  std::vector<double> cached_inv_std_;
  bool cached_train_ = false;
  bool has_cache_ = false;
};

/// Per-joint 1D convolution along the temporal axis of [B x C x T x V],
/// same-padding, so T' = ceil(T / stride).
class TemporalConv : public Layer {
 public:
  TemporalConv(int in_channels, int out_channels, int kernel, int stride, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

  int out_frames(int in_frames) const { return (in_frames + stride_ - 1) / stride_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

 private:
  int in_channels_, out_channels_, kernel_, stride_, pad_;
  Tensor weight_;  // [out x in x kernel]
  Tensor bias_;    // [out]
  Tensor dweight_, dbias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

/// Mean over the temporal and joint axes: [B x C x T x V] -> [B x C].
class GlobalAveragePool : public Layer {
 public:
  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;

 private:
  std::vector<int> cached_shape_;
  bool has_cache_ = false;
};

/// Splits the temporal axis into n contiguous segments (the first T mod n
/// segments get the extra frame) and mean-pools each over frames and joints:
/// [B x C x T x V] -> [B x n x C].
class SegmentAveragePool : public Layer {
 public:
  explicit SegmentAveragePool(int n_segments);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;

  const std::vector<int>& segment_begins() const { return begins_; }
  const std::vector<int>& segment_lengths() const { return lengths_; }

 private:
  int n_segments_;
  std::vector<int> begins_, lengths_;
  std::vector<int> cached_shape_;
  bool has_cache_ = false;
};

/// Uniform init on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor glorot_uniform(const std::vector<int>& shape, int fan_in, int fan_out, RandomStream& rng);

/// Computes contiguous segment boundaries for the pooling rule above.
void segment_bounds(int frames, int n_segments, std::vector<int>& begins, std::vector<int>& lengths);

}  // namespace skelact
