#include "skelact/synthetic.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace skelact {

namespace {

// T-pose base skeleton, meters. The character faces +Z; +X is the
// character's left; +Y is up. Indices follow the 25-joint humanoid.
constexpr std::array<std::array<double, 3>, 25> kBasePose{{
    {0.00, 0.90, 0.00},   // 0  spine_base
    {0.00, 1.05, 0.00},   // 1  spine_mid
    {0.00, 1.40, 0.00},   // 2  neck
    {0.00, 1.55, 0.00},   // 3  head
    {0.20, 1.30, 0.00},   // 4  shoulder_left
    {0.45, 1.30, 0.00},   // 5  elbow_left
    {0.70, 1.30, 0.00},   // 6  wrist_left
    {0.80, 1.30, 0.00},   // 7  hand_left
    {-0.20, 1.30, 0.00},  // 8  shoulder_right
    {-0.45, 1.30, 0.00},  // 9  elbow_right
    {-0.70, 1.30, 0.00},  // 10 wrist_right
    {-0.80, 1.30, 0.00},  // 11 hand_right
    {0.10, 0.85, 0.00},   // 12 hip_left
    {0.10, 0.45, 0.00},   // 13 knee_left
    {0.10, 0.08, 0.00},   // 14 ankle_left
    {0.10, 0.02, 0.12},   // 15 foot_left
    {-0.10, 0.85, 0.00},  // 16 hip_right
    {-0.10, 0.45, 0.00},  // 17 knee_right
    {-0.10, 0.08, 0.00},  // 18 ankle_right
    {-0.10, 0.02, 0.12},  // 19 foot_right
    {0.00, 1.30, 0.00},   // 20 spine_shoulder
    {0.88, 1.30, 0.00},   // 21 handtip_left
    {0.82, 1.26, 0.03},   // 22 thumb_left
    {-0.88, 1.30, 0.00},  // 23 handtip_right
    {-0.82, 1.26, 0.03},  // 24 thumb_right
}};

struct WeightedJoint {
  int joint;
  double weight;  // grows toward the end of the chain
};

using Group = std::vector<WeightedJoint>;

const Group& left_arm() {
  static const Group g{{4, 0.25}, {5, 0.55}, {6, 0.85}, {7, 1.0}, {21, 1.1}, {22, 1.05}};
  return g;
}
const Group& right_arm() {
  static const Group g{{8, 0.25}, {9, 0.55}, {10, 0.85}, {11, 1.0}, {23, 1.1}, {24, 1.05}};
  return g;
}
const Group& both_arms() {
  static const Group g = [] {
    Group v = left_arm();
    const Group& r = right_arm();
    v.insert(v.end(), r.begin(), r.end());
    return v;
  }();
  return g;
}
const Group& left_leg() {
  static const Group g{{12, 0.25}, {13, 0.6}, {14, 0.95}, {15, 1.05}};
  return g;
}
const Group& right_leg() {
  static const Group g{{16, 0.25}, {17, 0.6}, {18, 0.95}, {19, 1.05}};
  return g;
}
const Group& torso() {
  static const Group g{{20, 0.5}, {2, 0.75}, {3, 1.0}, {4, 0.6}, {8, 0.6}};
  return g;
}
const Group& head_group() {
  static const Group g{{2, 0.5}, {3, 1.0}};
  return g;
}

enum class Phase { kEarly, kLate, kDouble };
enum class DirMode { kFixed, kSpread };  // spread: each side moves outward along its own X sign

struct MotionClass {
  const char* name;
  const Group& group;
  DirMode dir_mode;
  std::array<double, 3> direction;  // body frame, normalized at use
  Phase phase;
};

// Consecutive pairs (0,1), (2,3), (4,5), (6,7), ... share limb group and
// phase profile and differ only in movement direction.
const std::vector<MotionClass>& class_table() {
  static const std::vector<MotionClass> t{
      {"right_arm_forward", right_arm(), DirMode::kFixed, {0.0, 0.5, 1.0}, Phase::kEarly},
      {"right_arm_side", right_arm(), DirMode::kFixed, {-1.0, 0.5, 0.0}, Phase::kEarly},
      {"left_arm_forward", left_arm(), DirMode::kFixed, {0.0, 0.5, 1.0}, Phase::kLate},
      {"left_arm_side", left_arm(), DirMode::kFixed, {1.0, 0.5, 0.0}, Phase::kLate},
      {"right_leg_forward", right_leg(), DirMode::kFixed, {0.0, 0.25, 1.0}, Phase::kDouble},
      {"right_leg_side", right_leg(), DirMode::kFixed, {-1.0, 0.25, 0.0}, Phase::kDouble},
      {"both_arms_forward", both_arms(), DirMode::kFixed, {0.0, 0.15, 1.0}, Phase::kEarly},
      {"both_arms_spread", both_arms(), DirMode::kSpread, {1.0, 0.15, 0.0}, Phase::kEarly},
      {"left_leg_forward", left_leg(), DirMode::kFixed, {0.0, 0.25, 1.0}, Phase::kLate},
      {"left_leg_side", left_leg(), DirMode::kFixed, {1.0, 0.25, 0.0}, Phase::kLate},
      {"torso_forward", torso(), DirMode::kFixed, {0.0, -0.2, 1.0}, Phase::kEarly},
      {"torso_side", torso(), DirMode::kFixed, {1.0, -0.2, 0.0}, Phase::kLate},
      {"head_forward", head_group(), DirMode::kFixed, {0.0, -0.3, 1.0}, Phase::kDouble},
      {"head_side", head_group(), DirMode::kFixed, {1.0, -0.3, 0.0}, Phase::kDouble},
      {"right_arm_up", right_arm(), DirMode::kFixed, {0.0, 1.0, 0.2}, Phase::kLate},
      {"left_arm_up", left_arm(), DirMode::kFixed, {0.0, 1.0, 0.2}, Phase::kEarly},
  };
  return t;
}

double bump(double tau, double mu, double sigma) {
  const double d = (tau - mu) / sigma;
  return std::exp(-0.5 * d * d);
}

double envelope(Phase phase, double tau) {
  switch (phase) {
    case Phase::kEarly:
      return bump(tau, 0.3, 0.12);
    case Phase::kLate:
      return bump(tau, 0.7, 0.12);
    case Phase::kDouble:
      return bump(tau, 0.25, 0.09) + bump(tau, 0.75, 0.09);
  }
  return 0.0;
}

}  // namespace

std::vector<std::string> synthetic_class_names(int class_count) {
  const auto& table = class_table();
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) {
    const auto& row = table[static_cast<std::size_t>(c) % table.size()];
    const int wrap = c / static_cast<int>(table.size());
    names.push_back(wrap == 0 ? row.name : row.name + std::string("_v") + std::to_string(wrap));
  }
  return names;
}

Dataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.class_count < 2) {
    throw std::invalid_argument("synthetic dataset: need at least 2 classes");
  }
  if (spec.clips_per_class < 1) {
    throw std::invalid_argument("synthetic dataset: need at least 1 clip per class");
  }
  if (spec.joint_count != 25) {
    throw std::invalid_argument(
        "synthetic dataset: the generator is defined on the fixed 25-joint humanoid");
  }
  if (spec.frames < 2) {
    throw std::invalid_argument("synthetic dataset: need at least 2 frames");
  }
  const auto& table = class_table();
  const TopologyPtr topo = ntu25_topology();

  Dataset out;
  out.class_count = spec.class_count;
  out.split = "train";
  out.clips.reserve(static_cast<std::size_t>(spec.class_count) * spec.clips_per_class);

  for (int cls = 0; cls < spec.class_count; ++cls) {
    const MotionClass& mc = table[static_cast<std::size_t>(cls) % table.size()];
    const int wrap = cls / static_cast<int>(table.size());
    // Wrapped variants repeat the phase profile at a higher rate so they stay
    // distinguishable from their base class.
    const double rate = 1.0 + wrap;

    double dnorm = std::sqrt(mc.direction[0] * mc.direction[0] +
                             mc.direction[1] * mc.direction[1] +
                             mc.direction[2] * mc.direction[2]);
    const std::array<double, 3> dir{mc.direction[0] / dnorm, mc.direction[1] / dnorm,
                                    mc.direction[2] / dnorm};

    for (int k = 0; k < spec.clips_per_class; ++k) {
      const std::uint64_t clip_index =
          static_cast<std::uint64_t>(cls) * static_cast<std::uint64_t>(spec.clips_per_class) + k;
      RandomStream rng(RandomStream::mix(spec.seed, clip_index));

      const double yaw = rng.uniform(0.0, 2.0 * M_PI);
      const double gtx = rng.uniform(-1.0, 1.0);
      const double gtz = rng.uniform(-1.0, 1.0);
      const double gty = rng.uniform(-0.1, 0.1);
      const double speed = 1.0 + 0.2 * rng.uniform(-1.0, 1.0);
      const double amp = 0.35 * (1.0 + 0.15 * rng.uniform(-1.0, 1.0));
      const double osc_phase = rng.uniform(0.0, 2.0 * M_PI);
      const double bob_phase = rng.uniform(0.0, 2.0 * M_PI);

      const double cy = std::cos(yaw), sy = std::sin(yaw);

      SkeletonClip clip;
      clip.topology = topo;
      clip.label = cls;
      clip.positions = Tensor::zeros({spec.frames, 25, 3});

      // body-frame pose per frame, then global yaw + translation + jitter
      std::array<std::array<double, 3>, 25> pose{};
      for (int f = 0; f < spec.frames; ++f) {
        const double tau = static_cast<double>(f) / (spec.frames - 1);
        const double warped = tau * speed * rate;
        const double env = envelope(mc.phase, rate > 1.0 ? std::fmod(warped, 1.0) : warped);
        const double texture = 1.0 + 0.15 * std::sin(2.0 * M_PI * 2.5 * warped + osc_phase);
        const double bob = 0.008 * std::sin(2.0 * M_PI * tau + bob_phase);

        pose = kBasePose;
        for (const auto& wj : mc.group) {
          const double scale = amp * wj.weight * env * texture;
          std::array<double, 3> d = dir;
          if (mc.dir_mode == DirMode::kSpread) {
            const double side = kBasePose[static_cast<std::size_t>(wj.joint)][0] >= 0.0 ? 1.0 : -1.0;
            d = {side * dir[0], dir[1], dir[2]};
          }
          for (int c = 0; c < 3; ++c) pose[static_cast<std::size_t>(wj.joint)][c] += scale * d[c];
        }
        for (int j = 0; j < 25; ++j) {
          const double x = pose[static_cast<std::size_t>(j)][0];
          const double y = pose[static_cast<std::size_t>(j)][1] + bob;
          const double z = pose[static_cast<std::size_t>(j)][2];
          clip.positions(f, j, 0) = cy * x + sy * z + gtx;
          clip.positions(f, j, 1) = y + gty;
          clip.positions(f, j, 2) = -sy * x + cy * z + gtz;
        }
      }
      // faint sensor texture, independent per coordinate
      for (auto& v : clip.positions.data()) v += rng.normal(0.0, 0.003);
      out.clips.push_back(std::move(clip));
    }
  }
  out.validate();
  return out;
}

}  // namespace skelact
