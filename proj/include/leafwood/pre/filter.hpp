#pragma once

#include <vector>

#include "leafwood/core/point_cloud.hpp"
#include "leafwood/pre/config.hpp"

namespace leafwood::pre {

/// Keep-mask for the scanner-quality cuts: a point is dropped when its
/// deviation is strictly above `deviation_max` or its raw reflectance is
/// strictly below `reflectance_min`; boundary values stay. Either cut is
/// skipped when its column is absent, and the reflectance cut only applies
/// to raw (un-normalised) values.
inline std::vector<std::uint8_t> filter_mask(const PointCloud& cloud,
                                             const PreprocessConfig& cfg) {
  const bool use_deviation = cloud.has_deviation();
  const bool use_reflectance =
      cloud.has_reflectance() && !cloud.reflectance_normalized;
  std::vector<std::uint8_t> keep(cloud.size(), 1);
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    if (use_deviation && cloud.deviation[i] > cfg.deviation_max) keep[i] = 0;
    if (use_reflectance && cloud.reflectance[i] < cfg.reflectance_min) keep[i] = 0;
  }
  return keep;
}

inline PointCloud filter_points(const PointCloud& cloud, const PreprocessConfig& cfg) {
  const auto mask = filter_mask(cloud, cfg);
  std::vector<std::uint32_t> keep;
  keep.reserve(cloud.size());
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if (mask[i]) keep.push_back(i);
  if (keep.size() == cloud.size()) return cloud;
  return cloud.subset(keep);
}

}  // namespace leafwood::pre
