#pragma once

#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "leafwood/core/parallel.hpp"
#include "leafwood/model/network.hpp"
#include "leafwood/pre/filter.hpp"
#include "leafwood/pre/ground.hpp"
#include "leafwood/pre/reflectance.hpp"
#include "leafwood/pre/samples.hpp"
#include "leafwood/spatial/kdtree.hpp"

namespace leafwood::infer {

struct ConsolidationConfig {
  std::size_t k = 32;
  double wood_threshold = 0.5;

  void validate() const {
    if (k < 1) throw std::invalid_argument("consolidation k must be >= 1");
    if (!(wood_threshold > 0.0 && wood_threshold < 1.0))
      throw std::invalid_argument("wood_threshold must be inside (0,1)");
  }
};

/// One per-point model output, addressed by the source-cloud index. Points
/// covered by both tiling scales receive multiple predictions.
struct Prediction {
  std::uint32_t index = 0;
  float probability = 0.0f;
};

/// Eval-mode forward over every sample; returns (source index, probability)
/// pairs. Samples too degenerate to normalise (single-point or fully
/// coincident tiles) are skipped with a warning; uncovered points surface in
/// consolidate().
inline std::vector<Prediction> predict_samples(const std::vector<pre::Sample>& samples,
                                               model::ModelWeights& weights,
                                               const model::NetworkConfig& cfg,
                                               unsigned threads = 1) {
  cfg.validate();
  if (weights.config_digest != cfg.digest())
    throw DataError("predict_samples: weights do not match the network config");
  std::vector<std::vector<Prediction>> per_sample(samples.size());
  parallel_chunks(samples.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      std::vector<float> probs;
      try {
        probs = model::predict_sample(cfg, weights, samples[s]);
      } catch (const std::invalid_argument& e) {
        std::cerr << "warning: skipping degenerate sample (" << samples[s].size()
                  << " points): " << e.what() << "\n";
        continue;
      }
      per_sample[s].reserve(probs.size());
      for (std::size_t i = 0; i < probs.size(); ++i)
        per_sample[s].push_back({samples[s].source_indices[i], probs[i]});
    }
  });
  std::vector<Prediction> predictions;
  for (const auto& chunk : per_sample)
    predictions.insert(predictions.end(), chunk.begin(), chunk.end());
  return predictions;
}

/// Merges overlapping predictions into one label and probability per point:
/// the k nearest predicted points (self included) each cast a thresholded
/// vote per prediction; majority wins, ties resolve by whether the mean
/// probability reaches the threshold, and the mean becomes the point's
/// consolidated probability.
inline PointCloud consolidate(const PointCloud& cloud,
                              const std::vector<Prediction>& predictions,
                              const ConsolidationConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw std::invalid_argument("consolidate: empty cloud");

  std::vector<std::vector<float>> per_point(cloud.size());
  for (const auto& p : predictions) {
    if (p.index >= cloud.size())
      throw std::invalid_argument("consolidate: prediction index out of range");
    per_point[p.index].push_back(p.probability);
  }

  std::vector<std::uint32_t> uncovered;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if (per_point[i].empty()) uncovered.push_back(i);
  if (!uncovered.empty()) {
    std::string msg = "consolidate: " + std::to_string(uncovered.size()) +
                      " points received no prediction; first indices:";
    for (std::size_t i = 0; i < std::min<std::size_t>(uncovered.size(), 8); ++i)
      msg += " " + std::to_string(uncovered[i]);
    throw DataError(msg);
  }

  // All points carry predictions, so the neighbour index spans the cloud.
  spatial::KdTree tree(cloud.positions);
  const std::size_t k = std::min(cfg.k, cloud.size());

  PointCloud out = cloud;
  out.labels.assign(cloud.size(), 0);
  out.wood_probability.assign(cloud.size(), 0.0f);
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const auto neighbors = tree.knn(cloud.positions[i], k);
    std::size_t wood_votes = 0, leaf_votes = 0;
    double sum = 0.0;
    std::size_t count = 0;
    for (const std::uint32_t n : neighbors) {
      for (const float p : per_point[n]) {
        if (p >= cfg.wood_threshold) ++wood_votes;
        else ++leaf_votes;
        sum += p;
        ++count;
      }
    }
    const double mean = sum / double(count);
    bool wood = wood_votes > leaf_votes;
    if (wood_votes == leaf_votes) wood = mean >= cfg.wood_threshold;
    out.labels[i] = wood;
    out.wood_probability[i] = float(mean);
  }
  return out;
}

struct SegmentationResult {
  PointCloud segmented;  // one label and probability per surviving point
  PointCloud excluded;   // filtered / ground points, unlabeled
};

/// End-to-end whole-cloud prediction: deviation/reflectance filtering,
/// optional cloth-filter ground removal, reflectance rank normalisation,
/// two-scale tiling, per-sample inference and k-NN vote consolidation.
inline SegmentationResult segment_cloud(const PointCloud& cloud,
                                        model::ModelWeights& weights,
                                        const pre::PreprocessConfig& pre_cfg,
                                        const model::NetworkConfig& net_cfg,
                                        const ConsolidationConfig& cons_cfg,
                                        std::uint64_t seed, unsigned threads = 1) {
  if (cloud.empty()) throw std::invalid_argument("segment_cloud: empty cloud");
  pre_cfg.validate();

  SegmentationResult result;
  std::vector<std::uint8_t> keep_mask = pre::filter_mask(cloud, pre_cfg);
  if (pre_cfg.ground_removal) {
    PointCloud surviving;  // ground classification runs on the filtered set
    std::vector<std::uint32_t> surviving_idx;
    for (std::uint32_t i = 0; i < cloud.size(); ++i)
      if (keep_mask[i]) surviving_idx.push_back(i);
    surviving = cloud.subset(surviving_idx);
    const auto ground =
        pre::ground_mask(surviving, pre_cfg.cloth_resolution,
                         pre_cfg.cloth_rigidness, pre_cfg.ground_threshold);
    for (std::size_t i = 0; i < surviving_idx.size(); ++i)
      if (ground[i]) keep_mask[surviving_idx[i]] = 0;
  }

  std::vector<std::uint32_t> keep, drop;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    (keep_mask[i] ? keep : drop).push_back(i);
  if (keep.empty())
    throw DataError("segment_cloud: filtering and ground removal left no points");
  result.excluded = drop.empty() ? PointCloud{} : cloud.subset(drop);
  PointCloud working = cloud.subset(keep);

  pre::normalize_cloud_reflectance(working);
  const auto samples = pre::make_samples(working, pre_cfg, seed, threads);
  const auto predictions = predict_samples(samples, weights, net_cfg, threads);
  result.segmented = consolidate(working, predictions, cons_cfg);
  return result;
}

}  // namespace leafwood::infer
