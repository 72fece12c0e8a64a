#pragma once

#include <array>

#include "skelact/tensor.hpp"
#include "skelact/topology.hpp"

namespace skelact {

// Spatial-configuration partitioning of a skeleton graph.  Every joint's
// neighborhood (itself plus bone-connected joints) is split into three
// disjoint sets by hop distance to the center joint: the root set (the joint
// itself), the centripetal set (neighbors closer to the center; equal
// distance counts as centripetal), and the centrifugal set (neighbors
// farther from the center).
struct SkeletonGraph {
  TopologyPtr topology;
  int joint_count = 0;
  std::vector<int> hop_to_center;    // BFS hop distance from the center joint
  Tensor adjacency;                  // V×V symmetric 0/1, bone edges only
  std::array<Tensor, 3> partitions;  // root / centripetal / centrifugal, 0/1
  std::array<Tensor, 3> normalized;  // partitions with rows scaled to sum to 1
};

constexpr int kPartitionRoot = 0;
constexpr int kPartitionCentripetal = 1;
constexpr int kPartitionCentrifugal = 2;

SkeletonGraph build_graph(const TopologyPtr& topology);

// Spatial graph convolution on a single frame.  f_in is C×V, weights holds
// one C×C' matrix per partition.  Returns the C'×V feature map
//   sum_k  W_k^T · f_in · A̅_k^T
// where A̅_k is the row-normalized partition matrix.
Tensor graph_conv_apply(const SkeletonGraph& graph, const Tensor& f_in,
                        const std::array<Tensor, 3>& weights);

}  // namespace skelact
