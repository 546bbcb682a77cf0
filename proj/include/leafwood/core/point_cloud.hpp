#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "leafwood/core/types.hpp"

namespace leafwood {

/// Columnar point store. `positions` is always present; every other column
/// is optional and, when present, has exactly one entry per point.
///
/// Columns:
///   reflectance      scanner return strength, raw or rank-normalised to
///                    [-1, 1] depending on `reflectance_normalized`
///   labels           0 = leaf, 1 = wood
///   wood_probability predicted P(wood) in [0, 1]
///   deviation        scanner noise measure (higher = less reliable)
///   tree_id          instance id (synthetic data / per-tree evaluation)
///   ground           1 where a generator or filter marked ground
struct PointCloud {
  std::vector<Vec3f> positions;
  std::vector<float> reflectance;
  std::vector<std::uint8_t> labels;
  std::vector<float> wood_probability;
  std::vector<float> deviation;
  std::vector<std::uint32_t> tree_id;
  std::vector<std::uint8_t> ground;
  bool reflectance_normalized = false;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  bool has_reflectance() const { return !reflectance.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_wood_probability() const { return !wood_probability.empty(); }
  bool has_deviation() const { return !deviation.empty(); }
  bool has_tree_id() const { return !tree_id.empty(); }
  bool has_ground() const { return !ground.empty(); }

  /// Checks the column-length and value-domain invariants; throws DataError
  /// with the first violation found.
  void validate() const {
    const std::size_t n = size();
    auto check_len = [&](std::size_t len, const char* name) {
      if (len != 0 && len != n)
        throw DataError(std::string("column '") + name + "' has " +
                        std::to_string(len) + " entries for " +
                        std::to_string(n) + " points");
    };
    check_len(reflectance.size(), "reflectance");
    check_len(labels.size(), "label");
    check_len(wood_probability.size(), "p_wood");
    check_len(deviation.size(), "deviation");
    check_len(tree_id.size(), "tree_id");
    check_len(ground.size(), "ground");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3f& p = positions[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw DataError("non-finite position at point " + std::to_string(i));
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] > 1)
        throw DataError("label out of {0,1} at point " + std::to_string(i));
    for (std::size_t i = 0; i < wood_probability.size(); ++i)
      if (!(wood_probability[i] >= 0.0f && wood_probability[i] <= 1.0f))
        throw DataError("p_wood outside [0,1] at point " + std::to_string(i));
  }

  /// Copies the selected points (all columns that exist) into a new cloud.
  PointCloud subset(const std::vector<std::uint32_t>& indices) const {
    PointCloud out;
    out.reflectance_normalized = reflectance_normalized;
    out.positions.reserve(indices.size());
    auto copy_col = [&](const auto& src, auto& dst) {
      if (src.empty()) return;
      dst.reserve(indices.size());
      for (std::uint32_t i : indices) dst.push_back(src[i]);
    };
    for (std::uint32_t i : indices) out.positions.push_back(positions[i]);
    copy_col(reflectance, out.reflectance);
    copy_col(labels, out.labels);
    copy_col(wood_probability, out.wood_probability);
    copy_col(deviation, out.deviation);
    copy_col(tree_id, out.tree_id);
    copy_col(ground, out.ground);
    return out;
  }
};

}  // namespace leafwood
