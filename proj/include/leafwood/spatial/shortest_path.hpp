#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "leafwood/core/point_cloud.hpp"
#include "leafwood/spatial/kdtree.hpp"

namespace leafwood::spatial {

/// Undirected point-adjacency graph; edge weights are Euclidean distances.
struct NeighborGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency;

  std::size_t size() const { return adjacency.size(); }
};

/// Symmetrized kNN graph: every point is linked to its `graph_k` nearest
/// neighbours and each link is mirrored so the graph is undirected.
inline NeighborGraph build_knn_graph(const std::vector<Vec3f>& points,
                                     std::size_t graph_k) {
  if (points.empty()) throw std::invalid_argument("empty point set");
  NeighborGraph graph;
  graph.adjacency.resize(points.size());
  KdTree tree(points);
  const std::size_t k = std::min(graph_k + 1, points.size());  // +1 for self
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    for (std::uint32_t j : tree.knn(points[i], k)) {
      if (j == i) continue;
      const double w = distance(points[i], points[j]);
      graph.adjacency[i].emplace_back(j, w);
      graph.adjacency[j].emplace_back(i, w);
    }
  }
  return graph;
}

struct PathLengths {
  std::vector<double> length;          // meters; unreachable entries are +inf
  std::vector<std::uint8_t> reachable; // 1 where a path to the source exists
  std::uint32_t source = 0;            // lowest-z point
  std::size_t unreachable_count = 0;
};

inline PathLengths dijkstra(const NeighborGraph& graph, std::uint32_t source) {
  const double inf = std::numeric_limits<double>::infinity();
  PathLengths out;
  out.source = source;
  out.length.assign(graph.size(), inf);
  out.reachable.assign(graph.size(), 0);
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  out.length[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > out.length[u]) continue;
    out.reachable[u] = 1;
    for (const auto& [v, w] : graph.adjacency[u]) {
      const double nd = d + w;
      if (nd < out.length[v]) {
        out.length[v] = nd;
        queue.emplace(nd, v);
      }
    }
  }
  for (std::size_t i = 0; i < graph.size(); ++i)
    if (!out.reachable[i]) ++out.unreachable_count;
  return out;
}

/// Per-point shortest-path distance from the cloud's lowest point (the tree
/// base) through a symmetric kNN adjacency graph. Disconnected points are
/// flagged, not fatal.
inline PathLengths shortest_path_lengths(const PointCloud& cloud,
                                         std::size_t graph_k = 8) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  std::uint32_t source = 0;
  for (std::uint32_t i = 1; i < cloud.size(); ++i)
    if (cloud.positions[i].z < cloud.positions[source].z) source = i;
  const NeighborGraph graph = build_knn_graph(cloud.positions, graph_k);
  return dijkstra(graph, source);
}

}  // namespace leafwood::spatial
