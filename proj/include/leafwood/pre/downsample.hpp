#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "leafwood/core/rng.hpp"

namespace leafwood::pre {

/// Weighted sampling without replacement with probability proportional to
/// (reflectance + 1 + 1e-3); uniform when no reflectance is supplied.
/// Identity when `count <= max_points`. Returned indices are ascending.
///
/// Uses exponential keys (Efraimidis-Spirakis): drawing the `max_points`
/// smallest -log(u)/w realises the weighted draw in one O(n) selection pass.
inline std::vector<std::uint32_t> weighted_downsample(
    std::span<const float> normalized_reflectance, std::size_t count,
    std::size_t max_points, std::uint64_t rng_seed) {
  if (max_points == 0) throw std::invalid_argument("max_points must be positive");
  if (!normalized_reflectance.empty() && normalized_reflectance.size() != count)
    throw std::invalid_argument("reflectance length does not match point count");

  std::vector<std::uint32_t> indices(count);
  std::iota(indices.begin(), indices.end(), 0);
  if (count <= max_points) return indices;

  constexpr double kEpsilon = 1e-3;
  Rng rng(rng_seed);
  std::vector<std::pair<double, std::uint32_t>> keys(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double weight = normalized_reflectance.empty()
                              ? 1.0
                              : double(normalized_reflectance[i]) + 1.0 + kEpsilon;
    keys[i] = {-std::log(rng.uniform_open()) / weight, std::uint32_t(i)};
  }
  std::nth_element(keys.begin(), keys.begin() + long(max_points), keys.end());
  indices.resize(max_points);
  for (std::size_t i = 0; i < max_points; ++i) indices[i] = keys[i].second;
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace leafwood::pre
