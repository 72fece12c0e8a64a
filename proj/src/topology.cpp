#include "skelact/topology.hpp"

#include <stdexcept>
#include <vector>

namespace skelact {

void SkeletonTopology::validate_tree() const {
  const int v = joint_count;
  if (v <= 0) throw std::invalid_argument("topology: joint_count must be positive");
  if (static_cast<int>(parent.size()) != v || static_cast<int>(names.size()) != v) {
    throw std::invalid_argument("topology: parent/names arrays must have joint_count entries");
  }
  int root = -1;
  for (int i = 0; i < v; ++i) {
    const int p = parent[static_cast<std::size_t>(i)];
    if (p == -1) {
      if (root != -1) throw std::invalid_argument("topology: more than one root");
      root = i;
    } else if (p < 0 || p >= v || p == i) {
      throw std::invalid_argument("topology: invalid parent " + std::to_string(p) +
                                  " for joint " + std::to_string(i));
    }
  }
  if (root == -1) throw std::invalid_argument("topology: no root joint");
  // A single tree: following parents from any joint must reach the root
  // without revisiting (cycle) or exceeding V steps.
  for (int i = 0; i < v; ++i) {
    int cur = i, steps = 0;
    while (cur != root) {
      cur = parent[static_cast<std::size_t>(cur)];
      if (++steps > v) throw std::invalid_argument("topology: parent links contain a cycle");
    }
  }
  if (center_joint < 0 || center_joint >= v) {
    throw std::invalid_argument("topology: center joint index " +
                                std::to_string(center_joint) + " out of range");
  }
}

void SkeletonTopology::validate() const {
  validate_tree();
  const int v = joint_count;
  const int named[4] = {center_joint, chest_joint, left_shoulder_joint, right_shoulder_joint};
  for (int idx : named) {
    if (idx < 0 || idx >= v) {
      throw std::invalid_argument("topology: named joint index " + std::to_string(idx) +
                                  " out of range");
    }
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      if (named[i] == named[j]) {
        throw std::invalid_argument("topology: named joint indices must be distinct");
      }
    }
}

bool same_topology(const SkeletonTopology& a, const SkeletonTopology& b) {
  return a.joint_count == b.joint_count && a.parent == b.parent && a.names == b.names &&
         a.center_joint == b.center_joint && a.chest_joint == b.chest_joint &&
         a.left_shoulder_joint == b.left_shoulder_joint &&
         a.right_shoulder_joint == b.right_shoulder_joint;
}

TopologyPtr ntu25_topology() {
  auto t = std::make_shared<SkeletonTopology>();
  t->joint_count = 25;
  t->names = {
      "spine_base",     "spine_mid",      "neck",          "head",           "shoulder_left",
      "elbow_left",     "wrist_left",     "hand_left",     "shoulder_right", "elbow_right",
      "wrist_right",    "hand_right",     "hip_left",      "knee_left",      "ankle_left",
      "foot_left",      "hip_right",      "knee_right",    "ankle_right",    "foot_right",
      "spine_shoulder", "handtip_left",   "thumb_left",    "handtip_right",  "thumb_right"};
  t->parent = {
      -1,  // 0  spine_base
      0,   // 1  spine_mid
      20,  // 2  neck
      2,   // 3  head
      20,  // 4  shoulder_left
      4,   // 5  elbow_left
      5,   // 6  wrist_left
      6,   // 7  hand_left
      20,  // 8  shoulder_right
      8,   // 9  elbow_right
      9,   // 10 wrist_right
      10,  // 11 hand_right
      0,   // 12 hip_left
      12,  // 13 knee_left
      13,  // 14 ankle_left
      14,  // 15 foot_left
      0,   // 16 hip_right
      16,  // 17 knee_right
      17,  // 18 ankle_right
      18,  // 19 foot_right
      1,   // 20 spine_shoulder
      7,   // 21 handtip_left
      7,   // 22 thumb_left
      11,  // 23 handtip_right
      11,  // 24 thumb_right
  };
  t->center_joint = 1;          // spine_mid
  t->chest_joint = 20;          // spine_shoulder
  t->left_shoulder_joint = 4;
  t->right_shoulder_joint = 8;
  t->validate();
  return t;
}

TopologyPtr chain_topology(int joint_count) {
  if (joint_count < 4) {
    throw std::invalid_argument("chain_topology: need at least 4 joints for named indices");
  }
  auto t = std::make_shared<SkeletonTopology>();
  t->joint_count = joint_count;
  t->parent.resize(static_cast<std::size_t>(joint_count));
  t->names.resize(static_cast<std::size_t>(joint_count));
  for (int i = 0; i < joint_count; ++i) {
    t->parent[static_cast<std::size_t>(i)] = i - 1;
    t->names[static_cast<std::size_t>(i)] = "j" + std::to_string(i);
  }
  t->center_joint = 0;
  t->chest_joint = 1;
  t->left_shoulder_joint = 2;
  t->right_shoulder_joint = 3;
  t->validate();
  return t;
}

}  // namespace skelact
