#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "leafwood/core/point_cloud.hpp"

namespace leafwood::pre {

/// Rank-based quantile normalisation onto [-1, 1]: a value with average rank
/// r over n points maps to 2*r/(n-1) - 1, ties sharing their average rank.
/// The output depends only on the ordering of the input, so it is invariant
/// under any strictly monotone transform.
inline std::vector<float> normalize_reflectance(const std::vector<float>& values) {
  if (values.empty()) throw std::invalid_argument("empty reflectance array");
  const std::size_t n = values.size();
  if (n == 1) return {0.0f};

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return values[a] < values[b];
  });

  std::vector<float> out(n);
  const double denom = double(n - 1);
  std::size_t run_start = 0;
  while (run_start < n) {
    std::size_t run_end = run_start + 1;
    while (run_end < n && values[order[run_end]] == values[order[run_start]])
      ++run_end;
    const double avg_rank = 0.5 * (double(run_start) + double(run_end - 1));
    const float mapped = float(2.0 * avg_rank / denom - 1.0);
    for (std::size_t i = run_start; i < run_end; ++i) out[order[i]] = mapped;
    run_start = run_end;
  }
  return out;
}

/// In-place convenience: normalises the cloud's reflectance column and sets
/// the flag. Clouds without reflectance pass through untouched.
inline void normalize_cloud_reflectance(PointCloud& cloud) {
  if (!cloud.has_reflectance() || cloud.reflectance_normalized) return;
  cloud.reflectance = normalize_reflectance(cloud.reflectance);
  cloud.reflectance_normalized = true;
}

}  // namespace leafwood::pre
