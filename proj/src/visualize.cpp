#include "skelact/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "skelact/layers.hpp"

namespace skelact {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SaliencyResult compute_saliency(Model& model, const SkeletonClip& clip, bool dif, int frames) {
  if (clip.joints() != model.topology()->joint_count) {
    throw std::invalid_argument("visualize: clip has " + std::to_string(clip.joints()) +
                                " joints but the model expects " +
                                std::to_string(model.topology()->joint_count));
  }
  const SkeletonClip prepped = preprocess_clip(clip, dif, frames);
  model.set_mode(Mode::kEval);
  const Tensor input = clips_to_batch({&prepped});
  ModelForward fwd = model.forward(input, nullptr, BranchMode::kDfl);

  SaliencyResult result;
  result.selected = fwd.dfl.selected.at(0);
  const int n_selected = static_cast<int>(result.selected.size());
  const int joints = clip.joints();
  result.heat_curves = Tensor::zeros({n_selected, frames});
  result.joint_heat = Tensor::zeros({n_selected, joints});
  result.frame_joint = Tensor::zeros({n_selected, frames, joints});

  const int out_frames = model.backbone().output_frames(frames);
  std::vector<int> begins, lengths;
  segment_bounds(out_frames, model.config().segment_count, begins, lengths);

  for (int m = 0; m < n_selected; ++m) {
    const int segment = result.selected[m];
    const Tensor grad = model.segment_feature_input_gradient(segment);

    for (int t = 0; t < frames; ++t) {
      for (int v = 0; v < joints; ++v) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) sum += std::abs(grad(0, c, t, v));
        result.frame_joint(m, t, v) = sum / 3.0;
        result.heat_curves(m, t) += sum;
      }
      result.heat_curves(m, t) /= 3.0 * joints;
    }

    auto [in_lo, in_hi] = model.backbone().input_frame_range(
        begins[segment], begins[segment] + lengths[segment] - 1);
    in_lo = std::max(in_lo, 0);
    in_hi = std::min(in_hi, frames - 1);
    result.input_ranges.push_back({in_lo, in_hi});
    for (int v = 0; v < joints; ++v) {
      double sum = 0.0;
      for (int t = in_lo; t <= in_hi; ++t) {
        for (int c = 0; c < 3; ++c) sum += std::abs(grad(0, c, t, v));
      }
      result.joint_heat(m, v) = sum / (3.0 * (in_hi - in_lo + 1));
    }
  }
  model.zero_grad();  // feature backprops leave parameter gradients behind
  return result;
}

void write_heat_curves_csv(const std::string& path, const SaliencyResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "frame";
  for (int s : result.selected) out << ",segment_" << s;
  out << '\n';
  for (int t = 0; t < result.heat_curves.dim(1); ++t) {
    out << t;
    for (int m = 0; m < result.heat_curves.dim(0); ++m) {
      out << ',' << fmt_double(result.heat_curves(m, t));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_joint_heat_csv(const std::string& path, const SaliencyResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "joint";
  for (int s : result.selected) out << ",segment_" << s;
  out << '\n';
  for (int v = 0; v < result.joint_heat.dim(1); ++v) {
    out << v;
    for (int m = 0; m < result.joint_heat.dim(0); ++m) {
      out << ',' << fmt_double(result.joint_heat(m, v));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 2) throw std::invalid_argument("pgm: image must be 2-D");
  double max_value = 0.0;
  for (const double v : image.data()) {
    if (v < 0.0) throw std::invalid_argument("pgm: negative intensity");
    max_value = std::max(max_value, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  for (const double v : image.data()) {
    const double scaled = max_value > 0.0 ? 255.0 * v / max_value : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace skelact
