#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "leafwood/core/point_cloud.hpp"
#include "leafwood/core/rng.hpp"

namespace leafwood::synth {

/// Procedural tree recipe: a vertical tapered trunk that splits into 2-3
/// children per level, wood sampled on cylinder surfaces, leaves as small
/// Gaussian clusters on terminal branches.
struct TreeSpec {
  float height = 12.0f;           // meters
  float trunk_radius = 0.12f;     // meters
  int branch_depth = 3;           // levels including the trunk
  float branch_angle_min = 25.0f; // degrees from the parent axis
  float branch_angle_max = 50.0f;
  float taper = 0.5f;             // child radius ratio per level
  float leaf_density = 340.0f;    // leaf clusters per meter of terminal branch
  float point_spacing = 0.05f;    // meters between surface samples

  void validate() const {
    if (!(height > 0.0f)) throw std::invalid_argument("tree height must be positive");
    if (!(trunk_radius > 0.0f))
      throw std::invalid_argument("trunk radius must be positive");
    if (branch_depth < 1) throw std::invalid_argument("branch_depth must be >= 1");
    if (!(taper > 0.0f && taper < 1.0f))
      throw std::invalid_argument("taper must be in (0,1)");
    if (!(point_spacing > 0.0f))
      throw std::invalid_argument("point_spacing must be positive");
    if (leaf_density < 0.0f)
      throw std::invalid_argument("leaf_density must be non-negative");
  }
};

/// Class-conditional reflectance distributions. The defaults overlap so
/// reflectance is an informative but noisy prior rather than a giveaway.
struct ReflectanceModel {
  float wood_mean = 0.4f, wood_sd = 0.15f;
  float leaf_mean = -0.4f, leaf_sd = 0.15f;
};

struct PlotSpec {
  float extent_x = 20.0f, extent_y = 20.0f;  // meters
  int tree_count = 4;
  TreeSpec tree;
  float height_jitter = 0.2f;        // relative per-tree height variation
  float ground_roughness = 0.05f;    // meters
  float ground_spacing = 0.15f;      // meters between ground points
  float understory_fraction = 0.01f; // noise points relative to tree points
  ReflectanceModel reflectance;

  void validate() const {
    tree.validate();
    if (tree_count < 1) throw std::invalid_argument("tree_count must be >= 1");
    if (!(extent_x > 0.0f && extent_y > 0.0f))
      throw std::invalid_argument("plot extent must be positive");
    if (understory_fraction < 0.0f || understory_fraction > 1.0f)
      throw std::invalid_argument("understory_fraction must be in [0,1]");
    if (!(ground_spacing > 0.0f))
      throw std::invalid_argument("ground_spacing must be positive");
  }

  nlohmann::json to_json() const {
    return {{"extent_x", extent_x},
            {"extent_y", extent_y},
            {"tree_count", tree_count},
            {"height_jitter", height_jitter},
            {"ground_roughness", ground_roughness},
            {"ground_spacing", ground_spacing},
            {"understory_fraction", understory_fraction},
            {"tree",
             {{"height", tree.height},
              {"trunk_radius", tree.trunk_radius},
              {"branch_depth", tree.branch_depth},
              {"branch_angle_min", tree.branch_angle_min},
              {"branch_angle_max", tree.branch_angle_max},
              {"taper", tree.taper},
              {"leaf_density", tree.leaf_density},
              {"point_spacing", tree.point_spacing}}},
            {"reflectance",
             {{"wood_mean", reflectance.wood_mean},
              {"wood_sd", reflectance.wood_sd},
              {"leaf_mean", reflectance.leaf_mean},
              {"leaf_sd", reflectance.leaf_sd}}}};
  }

  static PlotSpec from_json(const nlohmann::json& j) {
    PlotSpec spec;
    spec.extent_x = j.value("extent_x", spec.extent_x);
    spec.extent_y = j.value("extent_y", spec.extent_y);
    spec.tree_count = j.value("tree_count", spec.tree_count);
    spec.height_jitter = j.value("height_jitter", spec.height_jitter);
    spec.ground_roughness = j.value("ground_roughness", spec.ground_roughness);
    spec.ground_spacing = j.value("ground_spacing", spec.ground_spacing);
    spec.understory_fraction =
        j.value("understory_fraction", spec.understory_fraction);
    if (j.contains("tree")) {
      const auto& t = j.at("tree");
      spec.tree.height = t.value("height", spec.tree.height);
      spec.tree.trunk_radius = t.value("trunk_radius", spec.tree.trunk_radius);
      spec.tree.branch_depth = t.value("branch_depth", spec.tree.branch_depth);
      spec.tree.branch_angle_min =
          t.value("branch_angle_min", spec.tree.branch_angle_min);
      spec.tree.branch_angle_max =
          t.value("branch_angle_max", spec.tree.branch_angle_max);
      spec.tree.taper = t.value("taper", spec.tree.taper);
      spec.tree.leaf_density = t.value("leaf_density", spec.tree.leaf_density);
      spec.tree.point_spacing = t.value("point_spacing", spec.tree.point_spacing);
    }
    if (j.contains("reflectance")) {
      const auto& r = j.at("reflectance");
      spec.reflectance.wood_mean = r.value("wood_mean", spec.reflectance.wood_mean);
      spec.reflectance.wood_sd = r.value("wood_sd", spec.reflectance.wood_sd);
      spec.reflectance.leaf_mean = r.value("leaf_mean", spec.reflectance.leaf_mean);
      spec.reflectance.leaf_sd = r.value("leaf_sd", spec.reflectance.leaf_sd);
    }
    spec.validate();
    return spec;
  }
};

inline PlotSpec load_plot_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return PlotSpec::from_json(j);
}

/// One skeleton segment; `base_path` is the along-skeleton distance from the
/// tree base to the segment start.
struct SkeletonEdge {
  Vec3f start, end;
  float radius = 0.0f;
  int depth = 0;
  double base_path = 0.0;
};

struct GeneratedTree {
  PointCloud cloud;  // labeled, reflectance populated
  std::vector<SkeletonEdge> skeleton;
  std::vector<double> skeleton_path;  // per point, distance to base along skeleton
  std::vector<std::int32_t> point_depth;  // branch level per point
};

namespace detail {

inline void orthonormal_frame(const Vec3f& axis, Vec3f& u, Vec3f& v) {
  const Vec3f helper = std::abs(axis.z) < 0.9f ? Vec3f{0, 0, 1} : Vec3f{1, 0, 0};
  // u = axis x helper, normalised
  Vec3f cr{axis.y * helper.z - axis.z * helper.y,
           axis.z * helper.x - axis.x * helper.z,
           axis.x * helper.y - axis.y * helper.x};
  const float n = cr.norm();
  u = cr * (1.0f / n);
  v = Vec3f{axis.y * u.z - axis.z * u.y, axis.z * u.x - axis.x * u.z,
            axis.x * u.y - axis.y * u.x};
}

struct TreeBuilder {
  const TreeSpec& spec;
  const ReflectanceModel& model;
  Rng rng;
  GeneratedTree out;

  void wood_point(const Vec3f& p, double path, int depth) {
    out.cloud.positions.push_back(p);
    out.cloud.labels.push_back(1);
    out.cloud.reflectance.push_back(
        float(rng.normal(model.wood_mean, model.wood_sd)));
    out.skeleton_path.push_back(path);
    out.point_depth.push_back(depth);
  }

  void leaf_point(const Vec3f& p, double path, int depth) {
    out.cloud.positions.push_back(p);
    out.cloud.labels.push_back(0);
    out.cloud.reflectance.push_back(
        float(rng.normal(model.leaf_mean, model.leaf_sd)));
    out.skeleton_path.push_back(path);
    out.point_depth.push_back(depth);
  }

  void sample_segment(const Vec3f& start, const Vec3f& dir, float length,
                      float radius, int depth, double base_path) {
    out.skeleton.push_back({start, start + dir * length, radius, depth, base_path});
    Vec3f u, v;
    orthonormal_frame(dir, u, v);
    const float spacing = spec.point_spacing;
    const int rings = std::max(1, int(std::floor(length / spacing)));
    const int per_ring =
        std::max(3, int(std::lround(2.0 * std::numbers::pi * radius / spacing)));
    for (int ring = 0; ring <= rings; ++ring) {
      const float t = float(ring) * spacing;
      if (t > length) break;
      const Vec3f center = start + dir * t;
      const float phase = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
      for (int s = 0; s < per_ring; ++s) {
        const float a =
            phase + float(2.0 * std::numbers::pi * double(s) / double(per_ring));
        const float jr = radius + float(rng.uniform(-0.1, 0.1)) * spacing;
        const Vec3f p = center + u * (jr * std::cos(a)) + v * (jr * std::sin(a));
        wood_point(p, base_path + t, depth);
      }
    }

    const bool terminal = depth + 1 >= spec.branch_depth;
    if (terminal) {
      const int clusters = int(std::floor(double(spec.leaf_density) * length));
      for (int c = 0; c < clusters; ++c) {
        const float t = float(rng.uniform(0.0, length));
        const Vec3f anchor = start + dir * t;
        const float az = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
        const float reach = float(rng.uniform(0.05, 0.30));
        const Vec3f center = anchor + u * (reach * std::cos(az)) +
                             v * (reach * std::sin(az));
        const int blob = 3 + int(rng.below(8));              // 3..10 points
        const float sigma = float(rng.uniform(0.015, 0.04)); // 3..8 cm extent
        for (int b = 0; b < blob; ++b) {
          const Vec3f p = center + Vec3f(float(rng.normal(0, sigma)),
                                         float(rng.normal(0, sigma)),
                                         float(rng.normal(0, sigma)));
          leaf_point(p, base_path + t, depth);
        }
      }
      return;
    }

    const int children = 2 + int(rng.below(2));  // 2..3
    const float child_length = length * 0.6f;
    const float child_radius = radius * spec.taper;
    const Vec3f tip = start + dir * length;
    const float spread_base = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
    for (int c = 0; c < children; ++c) {
      const float polar = float(
          rng.uniform(spec.branch_angle_min, spec.branch_angle_max) *
          std::numbers::pi / 180.0);
      const float azimuth =
          spread_base +
          float(2.0 * std::numbers::pi * double(c) / double(children)) +
          float(rng.uniform(-0.3, 0.3));
      const Vec3f tilted = dir * std::cos(polar) + u * (std::sin(polar) * std::cos(azimuth)) +
                           v * (std::sin(polar) * std::sin(azimuth));
      const float n = tilted.norm();
      sample_segment(tip, tilted * (1.0f / n), child_length, child_radius,
                     depth + 1, base_path + length);
    }
  }
};

}  // namespace detail

/// Generates one labeled tree rooted at the origin. Deterministic per seed.
inline GeneratedTree generate_tree(const TreeSpec& spec, const ReflectanceModel& model,
                                   std::uint64_t seed) {
  spec.validate();
  detail::TreeBuilder builder{spec, model, Rng(seed), {}};
  const float trunk_length = spec.branch_depth == 1 ? spec.height : spec.height * 0.45f;
  builder.sample_segment({0, 0, 0}, {0, 0, 1}, trunk_length, spec.trunk_radius, 0, 0.0);
  if (builder.out.cloud.empty())
    throw std::invalid_argument("tree spec produced zero points");
  return builder.out;
}

/// Generates a labeled plot: trees placed without base overlap, a rough
/// ground plane (flagged, leaf-labeled) and sparse clustered understory
/// noise. Columns: label, reflectance, tree_id (0 = not a tree), ground.
inline PointCloud generate_plot(const PlotSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0x9a0c));

  // Tree bases with bounded retries; separation covers both trunks.
  std::vector<Vec3f> bases;
  const float margin = std::max(1.0f, 8.0f * spec.tree.trunk_radius);
  int retries = 0;
  while (int(bases.size()) < spec.tree_count) {
    if (++retries > 200 * spec.tree_count)
      throw DataError("could not place " + std::to_string(spec.tree_count) +
                      " trees without overlap; enlarge the plot");
    const Vec3f candidate(float(rng.uniform(2.0, spec.extent_x - 2.0)),
                          float(rng.uniform(2.0, spec.extent_y - 2.0)), 0.0f);
    bool ok = true;
    for (const Vec3f& b : bases) {
      const float dx = candidate.x - b.x, dy = candidate.y - b.y;
      if (std::sqrt(dx * dx + dy * dy) < margin) ok = false;
    }
    if (ok) bases.push_back(candidate);
  }

  PointCloud plot;
  std::size_t tree_points = 0;
  for (int t = 0; t < spec.tree_count; ++t) {
    TreeSpec tree_spec = spec.tree;
    Rng jitter(derive_seed(seed, 0x7777, std::uint64_t(t)));
    tree_spec.height *=
        float(1.0 + spec.height_jitter * jitter.uniform(-1.0, 1.0));
    const GeneratedTree tree =
        generate_tree(tree_spec, spec.reflectance,
                      derive_seed(seed, 0x7c3e, std::uint64_t(t)));
    for (std::size_t i = 0; i < tree.cloud.size(); ++i) {
      plot.positions.push_back(tree.cloud.positions[i] + bases[std::size_t(t)]);
      plot.labels.push_back(tree.cloud.labels[i]);
      plot.reflectance.push_back(tree.cloud.reflectance[i]);
      plot.tree_id.push_back(std::uint32_t(t) + 1);
      plot.ground.push_back(0);
    }
    tree_points += tree.cloud.size();
  }

  for (float x = 0.0f; x <= spec.extent_x; x += spec.ground_spacing)
    for (float y = 0.0f; y <= spec.extent_y; y += spec.ground_spacing) {
      plot.positions.emplace_back(
          x, y, float(rng.uniform(-spec.ground_roughness, spec.ground_roughness)));
      plot.labels.push_back(0);
      plot.reflectance.push_back(
          float(rng.normal(spec.reflectance.leaf_mean, spec.reflectance.leaf_sd)));
      plot.tree_id.push_back(0);
      plot.ground.push_back(1);
    }

  // Understory noise in small clusters so no isolated singleton tiles appear.
  std::size_t noise_left =
      std::size_t(double(tree_points) * double(spec.understory_fraction));
  while (noise_left > 0) {
    const std::size_t cluster = std::min<std::size_t>(noise_left, 5 + rng.below(11));
    const Vec3f center(float(rng.uniform(0.0, spec.extent_x)),
                       float(rng.uniform(0.0, spec.extent_y)),
                       float(rng.uniform(0.1, 0.5)));
    for (std::size_t i = 0; i < cluster; ++i) {
      plot.positions.push_back(center + Vec3f(float(rng.normal(0, 0.1)),
                                              float(rng.normal(0, 0.1)),
                                              float(rng.normal(0, 0.08))));
      plot.labels.push_back(0);
      plot.reflectance.push_back(
          float(rng.normal(spec.reflectance.leaf_mean, spec.reflectance.leaf_sd)));
      plot.tree_id.push_back(0);
      plot.ground.push_back(0);
    }
    noise_left -= cluster;
  }
  return plot;
}

}  // namespace leafwood::synth
