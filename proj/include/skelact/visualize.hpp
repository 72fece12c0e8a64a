#pragma once

#include <array>
#include <string>
#include <vector>

#include "skelact/model.hpp"
#include "skelact/training.hpp"

namespace skelact {

/// Input-gradient saliency for one clip's selected discriminative features.
/// For each selected segment, the gradient of its summed pooled activations
/// is backpropagated to the raw model input and its magnitude aggregated.
struct SaliencyResult {
  std::vector<int> selected;  // chosen segment indices, ascending
  std::vector<std::array<int, 2>> input_ranges;  // per feature: input-frame receptive field
  Tensor heat_curves;  // [D x T_in]  mean |grad| over joints and coordinates
  Tensor joint_heat;   // [D x V]     mean |grad| over coordinates and receptive-field frames
  Tensor frame_joint;  // [D x T_in x V]  mean |grad| over coordinates
};

/// Preprocesses the clip exactly like training (optional direction-invariant
/// transform, then resampling), runs the discriminative branch, and
/// backpropagates each selected feature.
SaliencyResult compute_saliency(Model& model, const SkeletonClip& clip, bool dif, int frames);

/// frame,segment_<s0>,segment_<s1>,... rows of the per-frame heat curves.
void write_heat_curves_csv(const std::string& path, const SaliencyResult& result);

/// joint,segment_<s0>,... rows of the per-joint heat map.
void write_joint_heat_csv(const std::string& path, const SaliencyResult& result);

/// Binary 8-bit grayscale PGM (P5), values scaled so the image maximum maps
/// to 255; an all-zero image stays all zero.
void write_pgm(const std::string& path, const Tensor& image);

}  // namespace skelact
