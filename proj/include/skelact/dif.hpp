#pragma once

#include <array>

#include "skelact/clip.hpp"

namespace skelact {

/// Per-frame body-local coordinate frame: origin at the spine joint, axes
/// stored as rows X, Y, Z of a proper rotation matrix.
struct LocalFrame {
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<std::array<double, 3>, 3> axes{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  bool is_orthonormal(double tol = 1e-9) const;
};

/// Builds the local frame from one frame of joint positions [V x 3]:
/// Y = normalize(chest - spine), X = normalize(Y x (right_shoulder -
/// left_shoulder)), Z = X x Y. When the construction degenerates (cross
/// product below 1e-8), falls back to `previous` if given, else to the
/// identity frame at the spine.
LocalFrame compute_local_frame(const Tensor& frame_positions, const SkeletonTopology& topology,
                               const LocalFrame* previous = nullptr);

/// Expresses every joint of every frame in that frame's local coordinates:
/// p' = axes * (p - origin). Frames are processed in order so degenerate
/// frames inherit the previous frame's LocalFrame.
SkeletonClip apply_dif(const SkeletonClip& clip);

}  // namespace skelact
