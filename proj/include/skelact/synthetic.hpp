#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelact/clip.hpp"

namespace skelact {

struct SyntheticSpec {
  int class_count = 8;
  int clips_per_class = 40;
  int joint_count = 25;  // only the 25-joint humanoid is supported
  std::uint64_t seed = 0;
  int frames = 100;
};

/// Procedural action classes on the 25-joint humanoid. Each class pairs a
/// limb group with a movement direction (expressed in the body frame) and a
/// temporal phase profile; consecutive class pairs share group and phase and
/// differ only in direction, so canonicalizing the facing direction is what
/// separates them. Every clip gets a random global yaw in [0, 360) degrees,
/// a random global translation, and speed/amplitude jitter. Deterministic
/// given the seed.
Dataset generate_synthetic_dataset(const SyntheticSpec& spec);

/// Names of the procedural classes for a given class count (wrapped variants
/// get a numeric suffix).
std::vector<std::string> synthetic_class_names(int class_count);

}  // namespace skelact
