#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "leafwood/spatial/shortest_path.hpp"
#include "leafwood/synth/generator.hpp"
#include "test_support.hpp"

using namespace leafwood;

TEST(GenerateTree, SingleDepthNoLeavesIsACylinder) {
  synth::TreeSpec spec;
  spec.branch_depth = 1;
  spec.leaf_density = 0.0f;
  spec.height = 6.0f;
  const auto tree = synth::generate_tree(spec, {}, 3);
  ASSERT_GT(tree.cloud.size(), 100u);
  for (std::size_t i = 0; i < tree.cloud.size(); ++i) {
    EXPECT_EQ(tree.cloud.labels[i], 1);
    const Vec3f& p = tree.cloud.positions[i];
    const float radial = std::sqrt(p.x * p.x + p.y * p.y);
    EXPECT_NEAR(radial, spec.trunk_radius, spec.point_spacing);
    EXPECT_NEAR(tree.skeleton_path[i], p.z, 1e-5);
  }
}

TEST(GenerateTree, DefaultSpecIsLeafDominated) {
  const auto tree = synth::generate_tree({}, {}, 11);
  std::size_t wood = 0, leaf = 0;
  for (std::uint8_t l : tree.cloud.labels) (l ? wood : leaf) += 1;
  EXPECT_GE(double(leaf), 5.0 * double(wood));
}

TEST(GenerateTree, DeterministicPerSeed) {
  const auto a = synth::generate_tree({}, {}, 42);
  const auto b = synth::generate_tree({}, {}, 42);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    EXPECT_EQ(a.cloud.positions[i].x, b.cloud.positions[i].x);
    EXPECT_EQ(a.cloud.positions[i].z, b.cloud.positions[i].z);
    EXPECT_EQ(a.cloud.reflectance[i], b.cloud.reflectance[i]);
  }
  const auto c = synth::generate_tree({}, {}, 43);
  EXPECT_NE(a.cloud.size(), c.cloud.size());
}

TEST(GenerateTree, WoodPointsHugTheSkeleton) {
  const auto tree = synth::generate_tree({}, {}, 7);
  auto segment_distance = [](const Vec3f& p, const synth::SkeletonEdge& e) {
    const Vec3f d = e.end - e.start;
    const float len2 = d.squared_norm();
    float t = len2 > 0 ? (p - e.start).dot(d) / len2 : 0.0f;
    t = std::min(1.0f, std::max(0.0f, t));
    return (p - (e.start + d * t)).norm();
  };
  for (std::size_t i = 0; i < tree.cloud.size(); i += 7) {
    if (tree.cloud.labels[i] != 1) continue;
    float best = std::numeric_limits<float>::max();
    for (const auto& e : tree.skeleton) {
      const float excess = segment_distance(tree.cloud.positions[i], e) - e.radius;
      best = std::min(best, excess);
    }
    EXPECT_LE(best, 0.05f + 1e-4f);  // within radius + point spacing
  }
}

TEST(GenerateTree, ZeroPointSpecRejected) {
  synth::TreeSpec spec;
  spec.branch_depth = 0;
  EXPECT_THROW(synth::generate_tree(spec, {}, 1), std::invalid_argument);
}

TEST(GenerateTree, SkeletonPathMatchesCloudDijkstra) {
  synth::TreeSpec spec;
  const auto tree = synth::generate_tree(spec, {}, 19);
  const auto paths = spatial::shortest_path_lengths(tree.cloud, 8);

  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < tree.cloud.size(); ++i) {
    if (tree.cloud.labels[i] != 1) continue;
    if (tree.point_depth[i] > 1) continue;          // trunk and first order only
    if (tree.skeleton_path[i] < 2.0) continue;      // relative error needs scale
    if (!paths.reachable[i]) continue;
    const double rel =
        std::abs(paths.length[i] - tree.skeleton_path[i]) / tree.skeleton_path[i];
    worst = std::max(worst, rel);
    ++checked;
  }
  EXPECT_GT(checked, 500u);
  EXPECT_LE(worst, 0.10) << "worst relative path error " << worst;
}

TEST(GeneratePlot, PlacementAndColumns) {
  synth::PlotSpec spec;
  spec.tree_count = 5;
  const PointCloud plot = synth::generate_plot(spec, 99);
  plot.validate();

  std::set<std::uint32_t> ids;
  std::vector<Vec3f> bases(6, Vec3f(0, 0, 1e9f));
  std::size_t ground_count = 0;
  for (std::size_t i = 0; i < plot.size(); ++i) {
    ids.insert(plot.tree_id[i]);
    if (plot.tree_id[i] > 0 && plot.positions[i].z < bases[plot.tree_id[i]].z)
      bases[plot.tree_id[i]] = plot.positions[i];
    if (plot.ground[i]) {
      ++ground_count;
      EXPECT_LE(std::abs(plot.positions[i].z), spec.ground_roughness + 1e-6f);
    }
  }
  EXPECT_EQ(ids.size(), 6u);  // 5 trees + 0 for non-tree points
  EXPECT_GT(ground_count, 0u);
  for (int a = 1; a <= 5; ++a)
    for (int b = a + 1; b <= 5; ++b) {
      const float dx = bases[a].x - bases[b].x, dy = bases[a].y - bases[b].y;
      EXPECT_GE(std::sqrt(dx * dx + dy * dy), 2.0f * spec.tree.trunk_radius);
    }
}

TEST(GeneratePlot, ReflectanceSeparatesClasses) {
  const PointCloud plot = synth::generate_plot({}, 5);
  double wood_sum = 0, leaf_sum = 0;
  std::size_t wood_n = 0, leaf_n = 0;
  for (std::size_t i = 0; i < plot.size(); ++i) {
    if (plot.labels[i]) {
      wood_sum += plot.reflectance[i];
      ++wood_n;
    } else {
      leaf_sum += plot.reflectance[i];
      ++leaf_n;
    }
  }
  EXPECT_GE(wood_sum / double(wood_n) - leaf_sum / double(leaf_n), 0.5);
}

TEST(GeneratePlot, LabelsAreExhaustive) {
  const PointCloud plot = synth::generate_plot({}, 13);
  ASSERT_EQ(plot.labels.size(), plot.size());
  ASSERT_EQ(plot.ground.size(), plot.size());
  for (std::size_t i = 0; i < plot.size(); ++i)
    EXPECT_TRUE(plot.labels[i] == 0 || plot.labels[i] == 1 || plot.ground[i] == 1);
}

TEST(GeneratePlot, OverfullPlotRejected) {
  synth::PlotSpec spec;
  spec.extent_x = 5.0f;
  spec.extent_y = 5.0f;
  spec.tree_count = 60;
  EXPECT_THROW(synth::generate_plot(spec, 1), DataError);
}
