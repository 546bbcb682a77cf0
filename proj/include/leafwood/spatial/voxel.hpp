#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "leafwood/core/point_cloud.hpp"

namespace leafwood::spatial {

/// Integer grid cell index: key = floor(coordinate / voxel_size) per axis.
struct VoxelKey {
  std::int32_t i = 0, j = 0, k = 0;
  bool operator==(const VoxelKey&) const = default;
  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& key) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ULL;
    };
    mix(std::uint64_t(std::uint32_t(key.i)));
    mix(std::uint64_t(std::uint32_t(key.j)));
    mix(std::uint64_t(std::uint32_t(key.k)));
    return std::size_t(h);
  }
};

inline VoxelKey voxel_key_of(const Vec3f& p, float voxel_size) {
  return {std::int32_t(std::floor(p.x / voxel_size)),
          std::int32_t(std::floor(p.y / voxel_size)),
          std::int32_t(std::floor(p.z / voxel_size))};
}

/// One key per point. Points inside the same axis-aligned cube share a key.
inline std::vector<VoxelKey> voxel_keys(const PointCloud& cloud, float voxel_size) {
  if (!(voxel_size > 0.0f))
    throw std::invalid_argument("voxel_size must be positive");
  std::vector<VoxelKey> keys;
  keys.reserve(cloud.size());
  for (const Vec3f& p : cloud.positions) keys.push_back(voxel_key_of(p, voxel_size));
  return keys;
}

/// Groups point indices by voxel key, ordered by key so downstream
/// processing is deterministic.
struct VoxelGroup {
  VoxelKey key;
  std::vector<std::uint32_t> indices;
};

inline std::vector<VoxelGroup> group_by_voxel(const std::vector<Vec3f>& points,
                                              float voxel_size) {
  if (!(voxel_size > 0.0f))
    throw std::invalid_argument("voxel_size must be positive");
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> map;
  map.reserve(points.size() / 4 + 1);
  for (std::uint32_t i = 0; i < points.size(); ++i)
    map[voxel_key_of(points[i], voxel_size)].push_back(i);
  std::vector<VoxelGroup> groups;
  groups.reserve(map.size());
  for (auto& [key, idx] : map) groups.push_back({key, std::move(idx)});
  std::sort(groups.begin(), groups.end(),
            [](const VoxelGroup& a, const VoxelGroup& b) { return a.key < b.key; });
  return groups;
}

}  // namespace leafwood::spatial
