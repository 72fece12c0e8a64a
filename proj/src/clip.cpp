#include "skelact/clip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace skelact {

void SkeletonClip::validate() const {
  if (!topology) throw std::invalid_argument("clip: missing topology");
  if (positions.ndim() != 3 || positions.dim(2) != 3) {
    throw std::invalid_argument("clip: positions must be [T x V x 3], got " +
                                positions.shape_str());
  }
  if (positions.dim(0) < 1) throw std::invalid_argument("clip: needs at least one frame");
  if (positions.dim(1) != topology->joint_count) {
    throw std::invalid_argument("clip: " + std::to_string(positions.dim(1)) +
                                " joints but topology has " +
                                std::to_string(topology->joint_count));
  }
  require_finite(positions, "clip positions");
  if (label && *label < 0) throw std::invalid_argument("clip: negative label");
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < clips.size(); ++i) {
    clips[i].validate();
    if (clips[i].label && *clips[i].label >= class_count) {
      throw std::invalid_argument("dataset: clip " + std::to_string(i) + " label " +
                                  std::to_string(*clips[i].label) + " >= class count " +
                                  std::to_string(class_count));
    }
  }
}

bool clips_equal(const SkeletonClip& a, const SkeletonClip& b) {
  if (!a.topology || !b.topology || !same_topology(*a.topology, *b.topology)) return false;
  if (a.positions.shape() != b.positions.shape()) return false;
  for (std::int64_t i = 0; i < a.positions.size(); ++i) {
    if (a.positions[i] != b.positions[i]) return false;
  }
  return a.label == b.label;
}

SkeletonClip resample_uniform(const SkeletonClip& clip, int target_frames) {
  clip.validate();
  const int t_in = clip.frames();
  if (t_in < 2) {
    throw std::invalid_argument("resample_uniform: need at least 2 frames, got " +
                                std::to_string(t_in));
  }
  if (target_frames < 2) {
    throw std::invalid_argument("resample_uniform: target must be at least 2 frames");
  }
  const int v = clip.joints();
  SkeletonClip out = clip;
  out.positions = Tensor::zeros({target_frames, v, 3});
  for (int t = 0; t < target_frames; ++t) {
    const double pos = static_cast<double>(t) * (t_in - 1) / (target_frames - 1);
    int i0 = static_cast<int>(pos);
    if (i0 > t_in - 2) i0 = t_in - 2;
    const double frac = pos - i0;
    for (int j = 0; j < v; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double a = clip.positions(i0, j, c);
        const double b = clip.positions(i0 + 1, j, c);
        // exact at integer sample times and for equal endpoints
        out.positions(t, j, c) =
            frac == 0.0 ? a : (frac == 1.0 ? b : (a == b ? a : (1.0 - frac) * a + frac * b));
      }
    }
  }
  return out;
}

SkeletonClip add_gaussian_noise(const SkeletonClip& clip, double sigma, std::uint64_t seed) {
  clip.validate();
  if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: negative sigma");
  SkeletonClip out = clip;
  if (sigma == 0.0) return out;
  RandomStream rng(seed);
  for (auto& v : out.positions.data()) v += rng.normal(0.0, sigma);
  return out;
}

SkeletonClip augment_translate_rotate(const SkeletonClip& clip, std::uint64_t seed,
                                      const AugmentParams& params, AugmentLog* log) {
  clip.validate();
  const int t = clip.frames();
  RandomStream rng(seed);
  const int frag_len = rng.uniform_int(1, t);
  const int frag_begin = rng.uniform_int(0, t - frag_len);
  const double max_rad = params.max_rotation_deg * M_PI / 180.0;
  const double yaw = rng.uniform(-max_rad, max_rad);
  const double tx = rng.uniform(-params.max_translation, params.max_translation);
  const double ty = rng.uniform(-params.max_translation, params.max_translation);
  const double tz = rng.uniform(-params.max_translation, params.max_translation);

  SkeletonClip out = clip;
  const int center = clip.topology->center_joint;
  const std::array<double, 3> pivot{clip.positions(frag_begin, center, 0),
                                    clip.positions(frag_begin, center, 1),
                                    clip.positions(frag_begin, center, 2)};
  if (log) {
    *log = AugmentLog{frag_begin, frag_len, yaw, pivot, {tx, ty, tz}};
  }
  if (yaw == 0.0 && tx == 0.0 && ty == 0.0 && tz == 0.0) return out;

  const double c = std::cos(yaw), s = std::sin(yaw);
  for (int f = frag_begin; f < frag_begin + frag_len; ++f) {
    for (int j = 0; j < clip.joints(); ++j) {
      const double x = clip.positions(f, j, 0) - pivot[0];
      const double y = clip.positions(f, j, 1) - pivot[1];
      const double z = clip.positions(f, j, 2) - pivot[2];
      // yaw about the vertical (+Y) axis
      out.positions(f, j, 0) = c * x + s * z + pivot[0] + tx;
      out.positions(f, j, 1) = y + pivot[1] + ty;
      out.positions(f, j, 2) = -s * x + c * z + pivot[2] + tz;
    }
  }
  return out;
}

namespace {

std::vector<std::vector<int>> indices_by_class(const Dataset& dataset) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(dataset.class_count));
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    const auto& label = dataset.clips[i].label;
    if (label && *label < dataset.class_count) {
      by_class[static_cast<std::size_t>(*label)].push_back(static_cast<int>(i));
    }
  }
  return by_class;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double val_fraction,
                                          std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("split_dataset: val_fraction must lie in [0, 1)");
  }
  dataset.validate();
  Dataset train, val;
  train.class_count = val.class_count = dataset.class_count;
  train.split = "train";
  val.split = "val";
  std::vector<char> to_val(dataset.clips.size(), 0);
  auto by_class = indices_by_class(dataset);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    RandomStream rng(RandomStream::mix(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    const int take = static_cast<int>(std::lround(val_fraction * static_cast<double>(idx.size())));
    for (int i = 0; i < take && i < static_cast<int>(idx.size()); ++i) {
      to_val[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    }
  }
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    (to_val[i] ? val : train).clips.push_back(dataset.clips[i]);
  }
  return {std::move(train), std::move(val)};
}

Dataset subsample_stratified(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw std::invalid_argument("subsample_stratified: fraction must lie in (0, 1]");
  }
  dataset.validate();
  Dataset out;
  out.class_count = dataset.class_count;
  out.split = dataset.split;
  std::vector<char> keep(dataset.clips.size(), 0);
  auto by_class = indices_by_class(dataset);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    RandomStream rng(RandomStream::mix(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    const int take = std::max(
        1, static_cast<int>(std::lround(fraction * static_cast<double>(idx.size()))));
    for (int i = 0; i < take && i < static_cast<int>(idx.size()); ++i) {
      keep[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    }
  }
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    if (keep[i]) out.clips.push_back(dataset.clips[i]);
  }
  return out;
}

}  // namespace skelact
