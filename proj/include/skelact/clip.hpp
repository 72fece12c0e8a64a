#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelact/tensor.hpp"
#include "skelact/topology.hpp"

namespace skelact {

/// One motion sample: per-frame 3D joint positions in meters.
struct SkeletonClip {
  TopologyPtr topology;
  Tensor positions;  // [T x V x 3]
  std::optional<int> label;
  std::optional<int> subject_id;
  std::optional<int> camera_id;

  int frames() const { return positions.ndim() == 3 ? positions.dim(0) : 0; }
  int joints() const { return positions.ndim() == 3 ? positions.dim(1) : 0; }

  /// Throws unless positions is [T x V x 3] with T >= 1, V matching the
  /// topology, and every coordinate finite.
  void validate() const;
};

struct Dataset {
  std::vector<SkeletonClip> clips;
  int class_count = 0;
  std::string split;  // "train" | "val"

  /// Throws unless every labeled clip has label in [0, class_count).
  void validate() const;
};

bool clips_equal(const SkeletonClip& a, const SkeletonClip& b);

/// Linear resampling onto exactly target_frames frames; frame t samples the
/// source at time t * (T-1) / (target_frames-1), so endpoints are preserved.
SkeletonClip resample_uniform(const SkeletonClip& clip, int target_frames = 100);

/// Adds i.i.d. zero-mean Gaussian noise (stddev sigma, meters) to every
/// coordinate. sigma = 0 returns the clip unchanged.
SkeletonClip add_gaussian_noise(const SkeletonClip& clip, double sigma, std::uint64_t seed);

struct AugmentParams {
  double max_rotation_deg = 30.0;  // yaw drawn from [-max, +max]
  double max_translation = 0.5;    // per-axis translation drawn from [-max, +max], meters
};

/// Record of the transform actually applied, sufficient to invert it.
struct AugmentLog {
  int frame_begin = 0;
  int frame_count = 0;
  double yaw_rad = 0.0;
  std::array<double, 3> pivot{0.0, 0.0, 0.0};
  std::array<double, 3> translation{0.0, 0.0, 0.0};
};

/// Picks a random contiguous frame fragment and rigidly moves it: yaw about
/// the vertical (Y) axis through the fragment's first-frame center joint,
/// then a per-axis translation. Frames outside the fragment are untouched.
SkeletonClip augment_translate_rotate(const SkeletonClip& clip, std::uint64_t seed,
                                      const AugmentParams& params = {},
                                      AugmentLog* log = nullptr);

/// Stratified split into (train, val): per class, a seeded shuffle sends
/// round(val_fraction * count) clips to val. Unlabeled clips stay in train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double val_fraction,
                                          std::uint64_t seed);

/// Stratified subsample keeping max(1, round(fraction * count)) clips per
/// class, so per-class counts differ from fraction * count by at most one.
Dataset subsample_stratified(const Dataset& dataset, double fraction, std::uint64_t seed);

}  // namespace skelact
