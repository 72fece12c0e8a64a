#pragma once

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include "skelact/graph.hpp"
#include "skelact/layers.hpp"

namespace skelact {

using GraphPtr = std::shared_ptr<const SkeletonGraph>;

/// Batched spatial graph convolution: [B×C×T×V] -> [B×C'×T×V], one weight
/// matrix per neighbor partition plus a shared per-channel bias. Each frame
/// is transformed exactly like graph_conv_apply.
class GraphConvLayer : public Layer {
 public:
  GraphConvLayer(GraphPtr graph, int in_channels, int out_channels, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

 private:
  GraphPtr graph_;
  int in_channels_, out_channels_;
  std::array<Tensor, 3> weight_, dweight_;  // each [C×C'], indexed by partition
  Tensor bias_, dbias_;                     // [C']
  Tensor cached_input_;
  bool has_cache_ = false;
};

struct StgcnBlockConfig {
  int in_channels = 0;
  int out_channels = 0;
  int temporal_kernel = 9;  // odd
  int temporal_stride = 1;
  bool residual = true;
  bool batch_norm = true;
};

/// One spatial-temporal block: graph conv -> norm -> ReLU -> temporal conv
/// (same padding, configurable stride) -> norm -> residual add -> ReLU.
/// The residual is the identity when shapes agree, otherwise a strided 1×1
/// temporal projection; T' = ceil(T / stride).
class StgcnBlock : public Layer {
 public:
  StgcnBlock(GraphPtr graph, const StgcnBlockConfig& config, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_stats(const std::string& prefix, std::vector<StatRef>& out) override;
  void set_mode(Mode mode) override;
  void set_stat_tracking(bool on) override;

  const StgcnBlockConfig& config() const { return config_; }
  int out_frames(int in_frames) const { return tconv_.out_frames(in_frames); }

 private:
  StgcnBlockConfig config_;
  GraphConvLayer gcn_;
  TemporalConv tconv_;
  std::unique_ptr<BatchNorm> bn1_, bn2_;
  std::unique_ptr<TemporalConv> res_proj_;  // strided 1×1 when shapes differ
  ReLU relu1_, relu2_;
  bool identity_residual_ = false;
  bool has_cache_ = false;
};

/// Spatial attention over joints: the time-averaged feature map is passed
/// through a same-padded 1D convolution along the joint axis, squashed with
/// a sigmoid into a per-(channel, joint) mask M, and the block returns
/// f + M⊙f with M broadcast over time.
class EsaBlock : public Layer {
 public:
  EsaBlock(int channels, int spatial_kernel, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

  int channels() const { return channels_; }

 private:
  int channels_, kernel_, pad_;
  Tensor weight_;  // [C×C×K]
  Tensor bias_;    // [C]
  Tensor dweight_, dbias_;
  Tensor cached_input_, cached_mean_, cached_mask_;
  bool has_cache_ = false;
};

struct BackboneConfig {
  std::vector<StgcnBlockConfig> blocks;
  bool esa_enabled = false;
  int esa_kernel = 9;
};

/// Sequential block stack (with an attention block after every block when
/// enabled). Records per-block activations so saliency visualization can
/// backpropagate from intermediate features.
class Backbone : public Layer {
 public:
  Backbone(GraphPtr graph, const BackboneConfig& config, RandomStream& rng);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& output_grad) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_stats(const std::string& prefix, std::vector<StatRef>& out) override;
  void set_mode(Mode mode) override;
  void set_stat_tracking(bool on) override;

  const BackboneConfig& config() const { return config_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  int output_channels() const { return config_.blocks.back().out_channels; }
  int output_frames(int input_frames) const;
  const std::vector<Tensor>& block_outputs() const { return block_outputs_; }

  /// Maps an output-frame interval back through every temporal convolution
  /// to the input-frame interval it draws on (unclamped; callers clip to
  /// [0, T-1]). Attention blocks are ignored: their temporal mean couples
  /// all frames weakly and has no localized footprint.
  std::pair<int, int> input_frame_range(int out_lo, int out_hi) const;

 private:
  BackboneConfig config_;
  GraphPtr graph_;
  std::vector<std::unique_ptr<StgcnBlock>> blocks_;
  std::vector<std::unique_ptr<EsaBlock>> esa_;
  std::vector<Tensor> block_outputs_;
};

}  // namespace skelact
