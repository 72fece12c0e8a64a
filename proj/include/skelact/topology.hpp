#pragma once

#include <memory>
#include <string>
#include <vector>

namespace skelact {

/// Joint tree plus the named joints the local-frame construction and the
/// graph partitioning depend on. center_joint doubles as the spine origin.
struct SkeletonTopology {
  int joint_count = 0;
  std::vector<int> parent;  // parent index per joint, -1 for the unique root
  std::vector<std::string> names;
  int center_joint = -1;
  int chest_joint = -1;
  int left_shoulder_joint = -1;
  int right_shoulder_joint = -1;

  /// Throws std::invalid_argument unless parent encodes a single tree with
  /// one root and the four named indices are distinct and in range.
  void validate() const;

  /// Tree-structure subset of validate(): single root, no cycles, center
  /// joint in range. Does not require the chest/shoulder roles, so tiny
  /// graphs (fewer than four joints) can be used for graph construction.
  void validate_tree() const;
};

using TopologyPtr = std::shared_ptr<const SkeletonTopology>;

bool same_topology(const SkeletonTopology& a, const SkeletonTopology& b);

/// The 25-joint humanoid used by NTU-style skeletons (0-based indices,
/// spine_mid as center).
TopologyPtr ntu25_topology();

/// Simple path graph for small tests: joint i hangs off i-1. Requires at
/// least 4 joints so the named indices can be distinct.
TopologyPtr chain_topology(int joint_count);

}  // namespace skelact
