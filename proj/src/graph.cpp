#include "skelact/graph.hpp"

#include <queue>
#include <stdexcept>
#include <string>

namespace skelact {

SkeletonGraph build_graph(const TopologyPtr& topology) {
  if (!topology) throw std::invalid_argument("build_graph: null topology");
  topology->validate_tree();
  const int v = topology->joint_count;

  SkeletonGraph graph;
  graph.topology = topology;
  graph.joint_count = v;
  graph.adjacency = Tensor::zeros({v, v});
  for (int j = 0; j < v; ++j) {
    const int p = topology->parent[j];
    if (p < 0) continue;
    graph.adjacency(j, p) = 1.0;
    graph.adjacency(p, j) = 1.0;
  }

  graph.hop_to_center.assign(v, -1);
  std::queue<int> frontier;
  graph.hop_to_center[topology->center_joint] = 0;
  frontier.push(topology->center_joint);
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int j = 0; j < v; ++j) {
      if (graph.adjacency(i, j) == 0.0 || graph.hop_to_center[j] >= 0) continue;
      graph.hop_to_center[j] = graph.hop_to_center[i] + 1;
      frontier.push(j);
    }
  }
  for (int j = 0; j < v; ++j) {
    if (graph.hop_to_center[j] < 0) {
      throw std::invalid_argument("build_graph: joint " + std::to_string(j) +
                                  " is not connected to the center joint");
    }
  }

  for (auto& part : graph.partitions) part = Tensor::zeros({v, v});
  for (int i = 0; i < v; ++i) {
    graph.partitions[kPartitionRoot](i, i) = 1.0;
    for (int j = 0; j < v; ++j) {
      if (graph.adjacency(i, j) == 0.0) continue;
      if (graph.hop_to_center[j] <= graph.hop_to_center[i]) {
        graph.partitions[kPartitionCentripetal](i, j) = 1.0;
      } else {
        graph.partitions[kPartitionCentrifugal](i, j) = 1.0;
      }
    }
  }

  for (int k = 0; k < 3; ++k) {
    graph.normalized[k] = Tensor::zeros({v, v});
    for (int i = 0; i < v; ++i) {
      int nonzero = 0;
      for (int j = 0; j < v; ++j) {
        if (graph.partitions[k](i, j) != 0.0) ++nonzero;
      }
      if (nonzero == 0) continue;
      const double scale = 1.0 / nonzero;
      for (int j = 0; j < v; ++j) {
        if (graph.partitions[k](i, j) != 0.0) graph.normalized[k](i, j) = scale;
      }
    }
  }
  return graph;
}

Tensor graph_conv_apply(const SkeletonGraph& graph, const Tensor& f_in,
                        const std::array<Tensor, 3>& weights) {
  if (f_in.ndim() != 2) {
    throw std::invalid_argument("graph_conv_apply: f_in must be C×V, got " +
                                shape_to_string(f_in.shape()));
  }
  const int v = graph.joint_count;
  if (f_in.dim(1) != v) {
    throw std::invalid_argument(
        "graph_conv_apply: f_in has " + std::to_string(f_in.dim(1)) +
        " joints, graph has " + std::to_string(v));
  }
  const int c_in = f_in.dim(0);
  for (const Tensor& w : weights) {
    if (w.ndim() != 2 || w.dim(0) != c_in || w.dim(1) != weights[0].dim(1)) {
      throw std::invalid_argument(
          "graph_conv_apply: weights must share shape C×C'; got " +
          shape_to_string(w.shape()) + " for C=" + std::to_string(c_in));
    }
  }
  const int c_out = weights[0].dim(1);

  Tensor out = Tensor::zeros({c_out, v});
  Tensor tmp = Tensor::zeros({c_out, v});
  for (int k = 0; k < 3; ++k) {
    detail::mm_tn(weights[k].data().data(), f_in.data().data(),
                  tmp.data().data(), c_out, c_in, v, false);
    detail::mm_nt(tmp.data().data(), graph.normalized[k].data().data(),
                  out.data().data(), c_out, v, v, true);
  }
  return out;
}

}  // namespace skelact
