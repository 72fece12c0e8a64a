#include "skelact/dif.hpp"

#include <cmath>
#include <stdexcept>

namespace skelact {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 joint_at(const Tensor& positions, int joint) {
  return {positions(joint, 0), positions(joint, 1), positions(joint, 2)};
}

constexpr double kDegenerate = 1e-8;

}  // namespace

bool LocalFrame::is_orthonormal(double tol) const {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::fabs(dot(axes[static_cast<std::size_t>(i)], axes[static_cast<std::size_t>(j)]) -
                    want) > tol) {
        return false;
      }
    }
  }
  // proper rotation: det = +1
  const double det = dot(axes[0], cross(axes[1], axes[2]));
  return std::fabs(det - 1.0) <= tol;
}

LocalFrame compute_local_frame(const Tensor& frame_positions, const SkeletonTopology& topology,
                               const LocalFrame* previous) {
  if (frame_positions.ndim() != 2 || frame_positions.dim(1) != 3 ||
      frame_positions.dim(0) != topology.joint_count) {
    throw std::invalid_argument("compute_local_frame: positions must be [V x 3], got " +
                                frame_positions.shape_str());
  }
  require_finite(frame_positions, "local frame positions");

  const Vec3 spine = joint_at(frame_positions, topology.center_joint);
  const Vec3 chest = joint_at(frame_positions, topology.chest_joint);
  const Vec3 lsh = joint_at(frame_positions, topology.left_shoulder_joint);
  const Vec3 rsh = joint_at(frame_positions, topology.right_shoulder_joint);

  auto fallback = [&]() {
    if (previous) return *previous;
    LocalFrame id;
    id.origin = spine;
    return id;
  };

  Vec3 y = sub(chest, spine);
  const double ylen = norm(y);
  if (ylen < kDegenerate) return fallback();
  for (double& v : y) v /= ylen;

  const Vec3 shoulder = sub(rsh, lsh);
  Vec3 x = cross(y, shoulder);
  const double xlen = norm(x);
  if (xlen < kDegenerate) return fallback();
  for (double& v : x) v /= xlen;

  const Vec3 z = cross(x, y);

  LocalFrame frame;
  frame.origin = spine;
  frame.axes = {x, y, z};
  return frame;
}

SkeletonClip apply_dif(const SkeletonClip& clip) {
  clip.validate();
  const int t = clip.frames(), v = clip.joints();
  SkeletonClip out = clip;
  LocalFrame previous;  // identity; replaced before first use unless frame 0 degenerates
  bool have_previous = false;
  Tensor frame = Tensor::zeros({v, 3});
  for (int f = 0; f < t; ++f) {
    for (int j = 0; j < v; ++j)
      for (int c = 0; c < 3; ++c) frame(j, c) = clip.positions(f, j, c);
    const LocalFrame lf =
        compute_local_frame(frame, *clip.topology, have_previous ? &previous : nullptr);
    previous = lf;
    have_previous = true;
    for (int j = 0; j < v; ++j) {
      const Vec3 p{clip.positions(f, j, 0) - lf.origin[0], clip.positions(f, j, 1) - lf.origin[1],
                   clip.positions(f, j, 2) - lf.origin[2]};
      for (int axis = 0; axis < 3; ++axis) {
        out.positions(f, j, axis) = dot(lf.axes[static_cast<std::size_t>(axis)], p);
      }
    }
  }
  return out;
}

}  // namespace skelact
