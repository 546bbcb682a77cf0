#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "leafwood/core/point_cloud.hpp"

namespace leafwood::pre {

/// Classifies ground points with a simplified cloth simulation: the cloud is
/// inverted, a particle grid settles onto it under gravity with `rigidness`
/// smoothing passes per step, and points within `threshold` of the settled
/// surface are ground. Runs a fixed 500 simulation steps.
inline std::vector<std::uint8_t> ground_mask(const PointCloud& cloud,
                                             float cloth_resolution, int rigidness,
                                             float threshold) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  if (rigidness < 1 || rigidness > 3)
    throw std::invalid_argument("rigidness must be in 1..3");
  if (!(cloth_resolution > 0.0f) || !(threshold > 0.0f))
    throw std::invalid_argument("cloth parameters must be positive");

  const float inf = std::numeric_limits<float>::infinity();
  float min_x = inf, min_y = inf, max_x = -inf, max_y = -inf;
  float min_inv = inf, max_inv = -inf;
  for (const Vec3f& p : cloud.positions) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
    min_inv = std::min(min_inv, -p.z);
    max_inv = std::max(max_inv, -p.z);
  }

  const int nx = int(std::floor((max_x - min_x) / cloth_resolution)) + 2;
  const int ny = int(std::floor((max_y - min_y) / cloth_resolution)) + 2;
  auto node_of = [&](const Vec3f& p) {
    const int i = std::clamp(int(std::lround((p.x - min_x) / cloth_resolution)), 0, nx - 1);
    const int j = std::clamp(int(std::lround((p.y - min_y) / cloth_resolution)), 0, ny - 1);
    return j * nx + i;
  };

  // In the inverted frame the original ground is the top surface, so each
  // node's collision ceiling is the maximum inverted height below it.
  std::vector<float> ceiling(std::size_t(nx) * std::size_t(ny), -inf);
  for (const Vec3f& p : cloud.positions) {
    float& c = ceiling[node_of(p)];
    c = std::max(c, -p.z);
  }

  const float start = max_inv + 1.0f;
  std::vector<float> height(ceiling.size(), start);
  std::vector<std::uint8_t> pinned(ceiling.size(), 0);

  constexpr int kSteps = 500;
  const float fall_step = std::max(0.005f, (start - min_inv) / 200.0f);
  for (int step = 0; step < kSteps; ++step) {
    for (std::size_t i = 0; i < height.size(); ++i)
      if (!pinned[i]) height[i] -= fall_step;
    for (int pass = 0; pass < rigidness; ++pass) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const std::size_t id = std::size_t(j) * nx + i;
          if (pinned[id]) continue;
          float sum = 0.0f;
          int cnt = 0;
          if (i > 0) { sum += height[id - 1]; ++cnt; }
          if (i + 1 < nx) { sum += height[id + 1]; ++cnt; }
          if (j > 0) { sum += height[id - nx]; ++cnt; }
          if (j + 1 < ny) { sum += height[id + nx]; ++cnt; }
          if (cnt > 0) height[id] += 0.5f * (sum / float(cnt) - height[id]);
        }
      }
    }
    for (std::size_t i = 0; i < height.size(); ++i) {
      if (!pinned[i] && ceiling[i] > -inf && height[i] <= ceiling[i]) {
        height[i] = ceiling[i];
        pinned[i] = 1;
      }
    }
  }

  std::vector<std::uint8_t> mask(cloud.size(), 0);
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const float cloth = height[node_of(cloud.positions[i])];
    if (std::abs(-cloud.positions[i].z - cloth) <= threshold) mask[i] = 1;
  }
  return mask;
}

/// Removes ground points. Throws when every point (or none of the input)
/// would survive, which signals unusable parameters.
inline PointCloud remove_ground(const PointCloud& cloud, float cloth_resolution,
                                int rigidness, float threshold) {
  const auto mask = ground_mask(cloud, cloth_resolution, rigidness, threshold);
  std::vector<std::uint32_t> keep;
  keep.reserve(cloud.size());
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if (!mask[i]) keep.push_back(i);
  if (keep.empty())
    throw DataError("ground removal classified every point as ground; "
                    "check cloth parameters");
  if (keep.size() == cloud.size()) return cloud;
  return cloud.subset(keep);
}

}  // namespace leafwood::pre
