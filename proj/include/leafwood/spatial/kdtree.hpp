#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "leafwood/core/point_cloud.hpp"
#include "leafwood/spatial/voxel.hpp"

namespace leafwood::spatial {

/// Exact k-nearest-neighbour tree over a borrowed point array. Ties in
/// distance are broken by ascending point index, which callers rely on for
/// reproducibility. The referenced points must outlive the tree.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(const std::vector<Vec3f>& points) { build(points); }

  void build(const std::vector<Vec3f>& points) {
    pts_ = points.data();
    n_ = points.size();
    order_.resize(n_);
    for (std::uint32_t i = 0; i < n_; ++i) order_[i] = i;
    nodes_.clear();
    nodes_.reserve(n_ / kLeafSize * 2 + 2);
    if (n_ > 0) build_node(0, std::uint32_t(n_));
  }

  std::size_t size() const { return n_; }

  /// Exact k nearest points to `query`, ordered by (distance, index).
  std::vector<std::uint32_t> knn(const Vec3f& query, std::size_t k) const {
    if (k < 1 || k > n_)
      throw std::invalid_argument("knn: k must be in [1, point count], got " +
                                  std::to_string(k));
    Heap heap;
    search(0, query, k, heap);
    std::vector<Candidate> ordered(heap.size());
    for (std::size_t i = ordered.size(); i-- > 0;) {
      ordered[i] = heap.top();
      heap.pop();
    }
    std::vector<std::uint32_t> out(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) out[i] = ordered[i].index;
    return out;
  }

 private:
  struct Candidate {
    float d2 = 0.0f;
    std::uint32_t index = 0;
    bool operator<(const Candidate& o) const {
      return d2 != o.d2 ? d2 < o.d2 : index < o.index;
    }
  };
  using Heap = std::priority_queue<Candidate>;  // max-heap on (d2, index)

  struct Node {
    float split = 0.0f;
    std::uint32_t right = 0;   // index of right child; left child is next node
    std::uint32_t begin = 0, end = 0;
    std::uint8_t axis = 3;     // 3 marks a leaf
  };

  static constexpr std::uint32_t kLeafSize = 16;

  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = std::uint32_t(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= kLeafSize) {
      nodes_[id].begin = begin;
      nodes_[id].end = end;
      return id;
    }
    // Split on the widest axis at the median.
    Vec3f lo(std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
             std::numeric_limits<float>::max());
    Vec3f hi(-std::numeric_limits<float>::max(), -std::numeric_limits<float>::max(),
             -std::numeric_limits<float>::max());
    for (std::uint32_t i = begin; i < end; ++i) {
      const Vec3f& p = pts_[order_[i]];
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3f extent = hi - lo;
    std::uint8_t axis = 0;
    if (extent.y > extent.x) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const float va = pts_[a][axis], vb = pts_[b][axis];
                       return va != vb ? va < vb : a < b;
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = pts_[order_[mid]][axis];
    build_node(begin, mid);  // left child is node id + 1
    nodes_[id].right = build_node(mid, end);
    return id;
  }

  void consider(const Vec3f& q, std::uint32_t idx, std::size_t k, Heap& heap) const {
    const Candidate c{squared_distance(q, pts_[idx]), idx};
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  }

  void search(std::uint32_t node_id, const Vec3f& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis == 3) {
      for (std::uint32_t i = node.begin; i < node.end; ++i)
        consider(q, order_[i], k, heap);
      return;
    }
    const float delta = q[node.axis] - node.split;
    const std::uint32_t near_child = delta < 0.0f ? node_id + 1 : node.right;
    const std::uint32_t far_child = delta < 0.0f ? node.right : node_id + 1;
    search(near_child, q, k, heap);
    // The far side can still hold equal-distance, lower-index candidates, so
    // only prune when strictly farther than the current worst.
    if (heap.size() < k || delta * delta <= heap.top().d2)
      search(far_child, q, k, heap);
  }

  const Vec3f* pts_ = nullptr;
  std::size_t n_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Uniform hash grid for fixed-radius lookups. Cell edge equals the query
/// radius so a 27-cell scan covers the closed ball.
class UniformGrid {
 public:
  UniformGrid(const std::vector<Vec3f>& points, float cell_size)
      : pts_(points.data()), cell_(cell_size) {
    if (!(cell_size > 0.0f))
      throw std::invalid_argument("cell_size must be positive");
    cells_.reserve(points.size() / 2 + 1);
    for (std::uint32_t i = 0; i < points.size(); ++i)
      cells_[voxel_key_of(points[i], cell_)].push_back(i);
  }

  /// All indices with distance <= radius (closed ball), nearest `max_count`
  /// if more qualify, ordered by (distance, index).
  std::vector<std::uint32_t> radius(const Vec3f& q, float radius,
                                    std::size_t max_count) const {
    if (!(radius > 0.0f)) throw std::invalid_argument("radius must be positive");
    const float r2 = radius * radius;
    const int reach = int(std::ceil(radius / cell_));
    const VoxelKey base = voxel_key_of(q, cell_);
    std::vector<std::pair<float, std::uint32_t>> hits;
    for (int di = -reach; di <= reach; ++di)
      for (int dj = -reach; dj <= reach; ++dj)
        for (int dk = -reach; dk <= reach; ++dk) {
          const auto it = cells_.find({base.i + di, base.j + dj, base.k + dk});
          if (it == cells_.end()) continue;
          for (std::uint32_t idx : it->second) {
            const float d2 = squared_distance(q, pts_[idx]);
            if (d2 <= r2) hits.emplace_back(d2, idx);
          }
        }
    std::sort(hits.begin(), hits.end());
    if (hits.size() > max_count) hits.resize(max_count);
    std::vector<std::uint32_t> out(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) out[i] = hits[i].second;
    return out;
  }

 private:
  const Vec3f* pts_;
  float cell_;
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> cells_;
};

/// One-shot exact kNN against a cloud (builds a tree per call; use KdTree
/// directly in loops).
inline std::vector<std::uint32_t> knn_query(const PointCloud& cloud,
                                            const Vec3f& query, std::size_t k) {
  KdTree tree(cloud.positions);
  return tree.knn(query, k);
}

/// One-shot radius query; closed ball, capped at the nearest `max_count`.
inline std::vector<std::uint32_t> radius_query(const PointCloud& cloud,
                                               const Vec3f& query, float radius,
                                               std::size_t max_count) {
  if (!(radius > 0.0f)) throw std::invalid_argument("radius must be positive");
  UniformGrid grid(cloud.positions, radius);
  return grid.radius(query, radius, max_count);
}

}  // namespace leafwood::spatial
