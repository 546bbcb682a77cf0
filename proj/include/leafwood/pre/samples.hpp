#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "leafwood/core/parallel.hpp"
#include "leafwood/core/point_cloud.hpp"
#include "leafwood/core/rng.hpp"
#include "leafwood/pre/config.hpp"
#include "leafwood/pre/downsample.hpp"
#include "leafwood/spatial/voxel.hpp"

namespace leafwood::pre {

enum class SampleScale : std::uint8_t { fine = 0, coarse = 1 };

/// One model-ready tile: a voxel's points, mean-centred, with reflectance in
/// [-1, 1] (zeros when the source cloud had none) and indices back into the
/// originating cloud. Capped at 16,384 points.
struct Sample {
  std::vector<Vec3f> positions;
  std::vector<float> reflectance;
  std::vector<std::uint32_t> source_indices;
  std::vector<std::uint8_t> labels;  // empty when the source is unlabeled
  SampleScale scale = SampleScale::fine;
  spatial::VoxelKey key;

  std::size_t size() const { return positions.size(); }
  bool has_labels() const { return !labels.empty(); }
};

namespace detail {

inline std::uint64_t key_tag(const spatial::VoxelKey& key) {
  return (std::uint64_t(std::uint32_t(key.i)) << 42) ^
         (std::uint64_t(std::uint32_t(key.j)) << 21) ^
         std::uint64_t(std::uint32_t(key.k));
}

inline void build_scale_samples(const PointCloud& cloud, float voxel_size,
                                SampleScale scale, std::uint32_t max_points,
                                std::uint64_t seed, unsigned threads,
                                std::vector<Sample>& out) {
  const auto groups = spatial::group_by_voxel(cloud.positions, voxel_size);
  const bool has_reflectance = cloud.has_reflectance();
  const bool has_labels = cloud.has_labels();

  const std::size_t base = out.size();
  out.resize(base + groups.size());
  auto build_one = [&](std::size_t g) {
    const auto& group = groups[g];
    std::vector<float> group_reflectance;
    if (has_reflectance) {
      group_reflectance.reserve(group.indices.size());
      for (std::uint32_t i : group.indices)
        group_reflectance.push_back(cloud.reflectance[i]);
    }
    // Per-(seed, scale, voxel) stream so the retained set does not depend on
    // the order voxels are processed in.
    const std::uint64_t voxel_seed =
        derive_seed(seed, std::uint64_t(scale), key_tag(group.key));
    const auto retained = weighted_downsample(group_reflectance,
                                              group.indices.size(), max_points,
                                              voxel_seed);

    Sample sample;
    sample.scale = scale;
    sample.key = group.key;
    sample.positions.reserve(retained.size());
    sample.reflectance.reserve(retained.size());
    sample.source_indices.reserve(retained.size());

    double mx = 0.0, my = 0.0, mz = 0.0;
    for (std::uint32_t local : retained) {
      const std::uint32_t i = group.indices[local];
      const Vec3f& p = cloud.positions[i];
      mx += p.x;
      my += p.y;
      mz += p.z;
      sample.source_indices.push_back(i);
      sample.reflectance.push_back(has_reflectance ? cloud.reflectance[i] : 0.0f);
      if (has_labels) sample.labels.push_back(cloud.labels[i]);
    }
    const double inv = 1.0 / double(retained.size());
    const Vec3f mean(float(mx * inv), float(my * inv), float(mz * inv));
    for (std::uint32_t i : sample.source_indices)
      sample.positions.push_back(cloud.positions[i] - mean);
    out[base + g] = std::move(sample);
  };
  parallel_chunks(groups.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) build_one(g);
  });
}

}  // namespace detail

/// Tiles the cloud independently at the fine and coarse voxel scales. Each
/// occupied voxel becomes one sample: reflectance-weighted downsampling to
/// `max_points`, then mean-centering. Reflectance must already be
/// rank-normalised when present.
inline std::vector<Sample> make_samples(const PointCloud& cloud,
                                        const PreprocessConfig& cfg,
                                        std::uint64_t rng_seed,
                                        unsigned threads = 1) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  cfg.validate();
  if (cloud.has_reflectance() && !cloud.reflectance_normalized)
    throw std::invalid_argument(
        "make_samples expects normalized reflectance; run "
        "normalize_cloud_reflectance first");

  std::vector<Sample> samples;
  detail::build_scale_samples(cloud, cfg.fine_voxel, SampleScale::fine,
                              cfg.max_points, rng_seed, threads, samples);
  detail::build_scale_samples(cloud, cfg.coarse_voxel, SampleScale::coarse,
                              cfg.max_points, rng_seed, threads, samples);
  return samples;
}

}  // namespace leafwood::pre
