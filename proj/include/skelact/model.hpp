#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "skelact/backbone.hpp"
#include "skelact/heads.hpp"
#include "skelact/topology.hpp"

namespace skelact {

/// Which classifier branches participate in a pass: the global classifier,
/// the discriminative-feature branch, or both (the full model).
enum class BranchMode { kGlobal, kDfl, kBoth };

std::string branch_mode_name(BranchMode mode);
BranchMode branch_mode_from_name(const std::string& name);

struct LossWeights {
  double global = 1.0;
  double segment = 1.0;
  double slot = 1.0;
  double aggregate = 1.0;
};

struct ModelConfig {
  std::vector<int> channels = {16, 16, 32, 64};  // per block output width
  std::vector<int> strides = {1, 1, 2, 2};       // per block temporal stride
  int temporal_kernel = 9;
  bool residual = true;
  bool batch_norm = true;
  int input_channels = 3;
  int class_count = 8;
  int segment_count = 5;   // N temporal fragments
  int selected_count = 3;  // D discriminative features
  SaliencyMode saliency = SaliencyMode::kSoftmax;
  bool esa_enabled = false;
  int esa_kernel = 9;
  LossWeights loss_weights;

  void validate() const;
  BackboneConfig backbone_config() const;
};

/// One batch's outputs, losses, and loss gradients. Loss fields are only
/// populated when labels were supplied.
struct ModelForward {
  BranchMode branch = BranchMode::kBoth;
  Tensor features;       // backbone output [B×C'×T'×V]
  Tensor global_logits;  // [B×c] (global/both)
  DflResult dfl;         // populated for dfl/both
  bool has_losses = false;
  double loss_global = 0.0, loss_segment = 0.0, loss_slot = 0.0, loss_aggregate = 0.0;
  double loss_total = 0.0;  // weighted sum of the active components
  Tensor global_logit_grad;
  DflLosses dfl_grads;
};

/// The full two-branch recognition model: spatial-temporal backbone plus
/// global and discriminative heads.
class Model {
 public:
  Model(TopologyPtr topology, const ModelConfig& config, std::uint64_t seed);

  /// labels may be null (inference). forced_selection pins the
  /// discriminative segment choice (visualization, gradient checks).
  ModelForward forward(const Tensor& input, const std::vector<int>* labels,
                       BranchMode branch,
                       const std::vector<std::vector<int>>* forced_selection = nullptr);

  /// Backpropagates the weighted losses recorded in `record`; accumulates
  /// parameter gradients and returns the input gradient.
  Tensor backward(const ModelForward& record);

  /// Gradient of one pooled segment feature's sum with respect to the model
  /// input; uses the caches of the most recent forward (which must have run
  /// the discriminative branch).
  Tensor segment_feature_input_gradient(int segment_index);

  /// Parameters of the named branch subset (backbone always included).
  std::vector<ParamRef> params(BranchMode branch = BranchMode::kBoth);
  std::vector<StatRef> stats();
  void zero_grad();
  void set_mode(Mode mode);
  void set_stat_tracking(bool on);

  const ModelConfig& config() const { return config_; }
  const TopologyPtr& topology() const { return topology_; }
  Backbone& backbone() { return *backbone_; }
  DflBranch& dfl_branch() { return *dfl_; }
  GlobalBranch& global_branch() { return *global_; }

  void save(const std::string& path);
  static Model load(const std::string& path);

 private:
  TopologyPtr topology_;
  ModelConfig config_;
  GraphPtr graph_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<GlobalBranch> global_;
  std::unique_ptr<DflBranch> dfl_;
};

}  // namespace skelact
