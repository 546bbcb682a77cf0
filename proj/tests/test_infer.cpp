#include <gtest/gtest.h>

#include "leafwood/infer/predict.hpp"
#include "leafwood/pre/reflectance.hpp"
#include "leafwood/synth/generator.hpp"
#include "test_support.hpp"

using namespace leafwood;
using infer::ConsolidationConfig;
using infer::Prediction;

namespace {

model::NetworkConfig small_config() {
  model::NetworkConfig cfg = model::NetworkConfig::reduced_profile();
  cfg.stages = {{0.15f, 8}, {0.4f, 16}};
  cfg.fp_channels = {8, 16};
  cfg.gate_hidden = 4;
  cfg.head_hidden = 8;
  return cfg;
}

PointCloud small_scene(std::uint64_t seed) {
  synth::PlotSpec spec;
  spec.extent_x = 7.0f;
  spec.extent_y = 7.0f;
  spec.tree_count = 1;
  spec.tree.height = 7.0f;
  spec.tree.leaf_density = 60.0f;
  spec.tree.point_spacing = 0.08f;
  spec.understory_fraction = 0.0f;
  return synth::generate_plot(spec, seed);
}

}  // namespace

TEST(PredictSamples, BothScalesCoverEveryPoint) {
  PointCloud cloud = small_scene(3);
  std::vector<std::uint32_t> keep;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if (!cloud.ground[i]) keep.push_back(i);
  cloud = cloud.subset(keep);
  {
    // Drop points alone in their fine voxel so no tile degenerates.
    const auto groups = spatial::group_by_voxel(cloud.positions, 2.0f);
    std::vector<std::uint32_t> populated;
    for (const auto& g : groups)
      if (g.indices.size() >= 2)
        populated.insert(populated.end(), g.indices.begin(), g.indices.end());
    std::sort(populated.begin(), populated.end());
    cloud = cloud.subset(populated);
  }
  pre::normalize_cloud_reflectance(cloud);
  const auto samples = pre::make_samples(cloud, {}, 5);

  const auto cfg = small_config();
  auto weights = model::init_weights<float>(cfg, 2);
  const auto predictions = infer::predict_samples(samples, weights, cfg);

  std::vector<std::size_t> counts(cloud.size(), 0);
  for (const auto& p : predictions) {
    EXPECT_GT(p.probability, 0.0f);
    EXPECT_LT(p.probability, 1.0f);
    counts[p.index] += 1;
  }
  for (std::size_t i = 0; i < counts.size(); ++i) EXPECT_GE(counts[i], 2u) << i;

  const auto again = infer::predict_samples(samples, weights, cfg);
  ASSERT_EQ(again.size(), predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    EXPECT_EQ(again[i].index, predictions[i].index);
    EXPECT_EQ(again[i].probability, predictions[i].probability);
  }
}

TEST(PredictSamples, DigestMismatchRejected) {
  const auto cfg = small_config();
  auto weights = model::init_weights<float>(cfg, 2);
  auto other = cfg;
  other.head_hidden += 1;
  EXPECT_THROW(infer::predict_samples({}, weights, other), DataError);
}

TEST(Consolidate, HandComputedVoteAndMean) {
  PointCloud cloud;
  cloud.positions.emplace_back(1.0f, 1.0f, 1.0f);
  cloud.positions.emplace_back(1.0f, 1.0f, 1.0f);  // identical position
  const std::vector<Prediction> preds{{0, 0.8f}, {1, 0.6f}};
  ConsolidationConfig cfg;
  cfg.k = 2;
  const PointCloud out = infer::consolidate(cloud, preds, cfg);
  EXPECT_EQ(out.labels[0], 1);
  EXPECT_EQ(out.labels[1], 1);
  EXPECT_FLOAT_EQ(out.wood_probability[0], 0.7f);
  EXPECT_FLOAT_EQ(out.wood_probability[1], 0.7f);
}

TEST(Consolidate, UnanimousZeroIsLeaf) {
  PointCloud cloud = testsup::random_cloud(50, 4, 2.0f);
  std::vector<Prediction> preds;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) preds.push_back({i, 0.0f});
  const PointCloud out = infer::consolidate(cloud, preds, {});
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out.labels[i], 0);
    EXPECT_EQ(out.wood_probability[i], 0.0f);
  }
}

TEST(Consolidate, KOneIsIdentityOnThresholdedLabels) {
  PointCloud cloud = testsup::random_cloud(200, 5, 5.0f);
  Rng rng(6);
  std::vector<Prediction> preds;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    preds.push_back({i, float(rng.uniform())});
  ConsolidationConfig cfg;
  cfg.k = 1;
  const PointCloud out = infer::consolidate(cloud, preds, cfg);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(out.labels[i], preds[i].probability >= 0.5f ? 1 : 0);
    EXPECT_FLOAT_EQ(out.wood_probability[i], preds[i].probability);
  }
}

TEST(Consolidate, MeanStaysWithinNeighborhoodRange) {
  PointCloud cloud = testsup::random_cloud(300, 7, 4.0f);
  Rng rng(8);
  std::vector<Prediction> preds;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    preds.push_back({i, float(rng.uniform())});
    if (rng.uniform() < 0.5) preds.push_back({i, float(rng.uniform())});
  }
  ConsolidationConfig cfg;
  cfg.k = 8;
  const PointCloud out = infer::consolidate(cloud, preds, cfg);

  spatial::KdTree tree(cloud.positions);
  std::vector<std::vector<float>> per_point(cloud.size());
  for (const auto& p : preds) per_point[p.index].push_back(p.probability);
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    float lo = 1.0f, hi = 0.0f;
    for (std::uint32_t n : tree.knn(cloud.positions[i], 8))
      for (float p : per_point[n]) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    EXPECT_GE(out.wood_probability[i], lo - 1e-6f);
    EXPECT_LE(out.wood_probability[i], hi + 1e-6f);
  }
}

TEST(Consolidate, RaisingThresholdNeverAddsWood) {
  PointCloud cloud = testsup::random_cloud(400, 9, 4.0f);
  Rng rng(10);
  std::vector<Prediction> preds;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    preds.push_back({i, float(rng.uniform())});
    preds.push_back({i, float(rng.uniform())});
  }
  std::size_t prev = cloud.size() + 1;
  for (int t = 0; t <= 10; ++t) {
    ConsolidationConfig cfg;
    cfg.k = 8;
    cfg.wood_threshold = 0.05 + 0.09 * t;
    const PointCloud out = infer::consolidate(cloud, preds, cfg);
    std::size_t wood = 0;
    for (std::uint8_t l : out.labels) wood += l;
    EXPECT_LE(wood, prev);
    prev = wood;
  }
}

TEST(Consolidate, ConservationAndCoverageError) {
  PointCloud cloud = testsup::random_cloud(64, 11, 3.0f);
  std::vector<Prediction> preds;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if (i != 10 && i != 20) preds.push_back({i, 0.4f});
  try {
    infer::consolidate(cloud, preds, {});
    FAIL() << "expected coverage error";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("10"), std::string::npos);
    EXPECT_NE(what.find("20"), std::string::npos);
  }
  preds.push_back({10, 0.4f});
  preds.push_back({20, 0.4f});
  const PointCloud out = infer::consolidate(cloud, preds, {});
  EXPECT_EQ(out.size(), cloud.size());
  EXPECT_EQ(out.labels.size(), cloud.size());
  EXPECT_EQ(out.wood_probability.size(), cloud.size());
}

TEST(SegmentCloud, ConservationAndDeterminism) {
  const PointCloud plot = small_scene(13);
  const auto cfg = small_config();
  auto weights = model::init_weights<float>(cfg, 3);
  pre::PreprocessConfig pre_cfg;
  pre_cfg.ground_removal = true;
  pre_cfg.cloth_resolution = 0.75f;
  pre_cfg.ground_threshold = 0.3f;

  const auto a = infer::segment_cloud(plot, weights, pre_cfg, cfg, {}, 17);
  const auto b = infer::segment_cloud(plot, weights, pre_cfg, cfg, {}, 17);
  EXPECT_EQ(a.segmented.size() + a.excluded.size(), plot.size());
  EXPECT_GT(a.excluded.size(), 0u);  // the generator ground plane
  ASSERT_EQ(a.segmented.size(), b.segmented.size());
  EXPECT_EQ(a.segmented.labels, b.segmented.labels);
  for (std::size_t i = 0; i < a.segmented.size(); ++i)
    EXPECT_EQ(a.segmented.wood_probability[i], b.segmented.wood_probability[i]);
}
