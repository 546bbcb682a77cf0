#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "leafwood/core/rng.hpp"
#include "leafwood/model/config.hpp"
#include "leafwood/model/weights.hpp"
#include "leafwood/nn/gumbel.hpp"
#include "leafwood/nn/tensor.hpp"
#include "leafwood/pre/samples.hpp"
#include "leafwood/spatial/kdtree.hpp"
#include "leafwood/spatial/voxel.hpp"

namespace leafwood::model {

// ---------------------------------------------------------------------------
// geometry helpers (plain float, outside the differentiation graph)

struct SampleNormalization {
  std::vector<Vec3f> positions;  // max point norm exactly 1
  float scale = 0.0f;            // the divisor that was applied
};

/// Rescales a mean-centred sample by its maximum point norm. Throws when all
/// points coincide (zero norm), which also covers single-point samples.
inline SampleNormalization normalize_sample(const std::vector<Vec3f>& centered) {
  if (centered.empty()) throw std::invalid_argument("normalize_sample: empty sample");
  float max_norm = 0.0f;
  for (const Vec3f& p : centered) max_norm = std::max(max_norm, p.norm());
  if (!(max_norm > 0.0f))
    throw std::invalid_argument(
        "normalize_sample: degenerate sample, all points coincide");
  SampleNormalization out;
  out.scale = max_norm;
  out.positions.reserve(centered.size());
  const float inv = 1.0f / max_norm;
  for (const Vec3f& p : centered) out.positions.push_back(p * inv);
  return out;
}

/// Eval mode: one representative per occupied voxel, the point nearest the
/// voxel centre (ties to the lowest index), ordered by voxel key. Train
/// mode: a uniform random subset of the same cardinality, ascending.
inline std::vector<std::uint32_t> select_centroids(const std::vector<Vec3f>& points,
                                                   float voxel_size, bool training,
                                                   std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("select_centroids: empty level");
  const auto groups = spatial::group_by_voxel(points, voxel_size);
  if (!training) {
    std::vector<std::uint32_t> out;
    out.reserve(groups.size());
    for (const auto& group : groups) {
      const Vec3f center((float(group.key.i) + 0.5f) * voxel_size,
                         (float(group.key.j) + 0.5f) * voxel_size,
                         (float(group.key.k) + 0.5f) * voxel_size);
      std::uint32_t best = group.indices[0];
      float best_d2 = squared_distance(points[best], center);
      for (std::uint32_t idx : group.indices) {
        const float d2 = squared_distance(points[idx], center);
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
          best = idx;
          best_d2 = d2;
        }
      }
      out.push_back(best);
    }
    return out;
  }
  // Training replaces the grid selection with a random subset of identical
  // size, which regularises the sampling pattern.
  const std::size_t want = groups.size();
  std::vector<std::uint32_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + std::size_t(rng.below(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(want);
  std::sort(all.begin(), all.end());
  return all;
}

/// Fixed-size neighbourhoods with locally rescaled coordinates. Stage 1
/// passes a radius (ball query capped at k); later stages pass nullopt and
/// take the k nearest regardless of distance. Short neighbourhoods are
/// padded by repeating the centroid.
struct Neighborhoods {
  std::vector<std::uint32_t> indices;  // centroids * k, level-local
  std::vector<float> local_coords;     // centroids * k * 3
};

inline Neighborhoods group_neighborhoods(const std::vector<Vec3f>& points,
                                         const std::vector<std::uint32_t>& centroids,
                                         int k, std::optional<float> radius) {
  if (centroids.empty())
    throw std::invalid_argument("group_neighborhoods: no centroids");
  Neighborhoods out;
  out.indices.resize(centroids.size() * std::size_t(k));
  out.local_coords.resize(centroids.size() * std::size_t(k) * 3);

  std::optional<spatial::UniformGrid> grid;
  std::optional<spatial::KdTree> tree;
  if (radius)
    grid.emplace(points, *radius);
  else
    tree.emplace(points);

  const std::size_t knn = std::min<std::size_t>(std::size_t(k), points.size());
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const Vec3f& center = points[centroids[c]];
    std::vector<std::uint32_t> found =
        radius ? grid->radius(center, *radius, std::size_t(k))
               : tree->knn(center, knn);
    std::uint32_t* idx = out.indices.data() + c * std::size_t(k);
    for (int i = 0; i < k; ++i)
      idx[i] = i < int(found.size()) ? found[std::size_t(i)] : centroids[c];

    float max_norm = 0.0f;
    float* local = out.local_coords.data() + c * std::size_t(k) * 3;
    for (int i = 0; i < k; ++i) {
      const Vec3f d = points[idx[i]] - center;
      local[3 * i + 0] = d.x;
      local[3 * i + 1] = d.y;
      local[3 * i + 2] = d.z;
      max_norm = std::max(max_norm, d.norm());
    }
    if (max_norm > 0.0f) {
      const float inv = 1.0f / max_norm;
      for (int i = 0; i < 3 * k; ++i) local[i] *= inv;
    }
  }
  return out;
}

/// Inverse-distance weights from the (up to) 3 nearest source points; an
/// exact positional match copies that source alone. Weights sum to 1.
struct Interpolation {
  std::array<std::vector<std::uint32_t>, 3> index;
  std::array<std::vector<float>, 3> weight;
};

inline Interpolation interpolation_weights(const std::vector<Vec3f>& targets,
                                           const std::vector<Vec3f>& sources) {
  if (sources.empty())
    throw std::invalid_argument("interpolation_weights: no source points");
  Interpolation out;
  for (int j = 0; j < 3; ++j) {
    out.index[j].resize(targets.size(), 0);
    out.weight[j].resize(targets.size(), 0.0f);
  }
  spatial::KdTree tree(sources);
  const std::size_t k = std::min<std::size_t>(3, sources.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto nearest = tree.knn(targets[t], k);
    const float d0 = (sources[nearest[0]] - targets[t]).norm();
    if (d0 < 1e-10f) {
      out.index[0][t] = nearest[0];
      out.weight[0][t] = 1.0f;
      for (std::size_t j = 1; j < 3; ++j) out.index[j][t] = nearest[0];
      continue;
    }
    float total = 0.0f;
    std::array<float, 3> w{0, 0, 0};
    for (std::size_t j = 0; j < k; ++j) {
      w[j] = 1.0f / (sources[nearest[j]] - targets[t]).norm();
      total += w[j];
    }
    for (std::size_t j = 0; j < 3; ++j) {
      out.index[j][t] = nearest[std::min(j, k - 1)];
      out.weight[j][t] = j < k ? w[j] / total : 0.0f;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// parameter construction

namespace detail {

template <typename S>
void add_param(ModelWeightsT<S>& w, const std::string& name, int rows, int cols,
               double fan_in, Rng& rng) {
  std::vector<S> values(std::size_t(rows) * cols);
  const double sd = std::sqrt(2.0 / fan_in);
  for (auto& v : values) v = S(rng.normal(0.0, sd));
  nn::TensorT<S> t(rows, cols, std::move(values), true);
  t.set_name(name);
  w.params.emplace_back(name, t);
}

template <typename S>
void add_const_param(ModelWeightsT<S>& w, const std::string& name, int rows,
                     int cols, double value) {
  nn::TensorT<S> t(rows, cols, S(value), true);
  t.set_name(name);
  w.params.emplace_back(name, t);
}

template <typename S>
void add_bn(ModelWeightsT<S>& w, const std::string& prefix, int channels) {
  add_const_param(w, prefix + ".gamma", 1, channels, 1.0);
  add_const_param(w, prefix + ".beta", 1, channels, 0.0);
  w.bn_states.emplace_back(prefix, nn::BatchNormState<S>(channels));
}

}  // namespace detail

/// Input feature width of SA stage `s` (local xyz + gated reflectance +
/// previous stage features).
inline int stage_input_width(const NetworkConfig& cfg, std::size_t s) {
  return 3 + 1 + (s == 0 ? 0 : cfg.stages[s - 1].channels);
}

template <typename S>
ModelWeightsT<S> init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelWeightsT<S> w;
  w.config_digest = cfg.digest();
  Rng rng(derive_seed(seed, 0x1717));
  const std::size_t num_stages = cfg.stages.size();

  for (std::size_t s = 0; s < num_stages; ++s) {
    const std::string sa = "sa" + std::to_string(s + 1);
    const int in = stage_input_width(cfg, s);
    const int out = cfg.stages[s].channels;
    const int expanded = out * cfg.expansion_factor;
    detail::add_param(w, sa + ".pw1.w", in, expanded, in, rng);
    detail::add_const_param(w, sa + ".pw1.b", 1, expanded, 0.0);
    if (s > 0) detail::add_bn(w, sa + ".pw1.bn", expanded);
    detail::add_const_param(w, sa + ".dw.w", 1, expanded, 1.0);
    detail::add_const_param(w, sa + ".dw.b", 1, expanded, 0.0);
    detail::add_bn(w, sa + ".dw.bn", expanded);
    detail::add_param(w, sa + ".pw2.w", expanded, out, expanded, rng);
    detail::add_const_param(w, sa + ".pw2.b", 1, out, 0.0);
    detail::add_bn(w, sa + ".pw2.bn", out);
    detail::add_param(w, sa + ".skip.w", in, out, in, rng);

    const std::string gate = "gate" + std::to_string(s + 1);
    detail::add_param(w, gate + ".l1.w", 2, cfg.gate_hidden, 2, rng);
    detail::add_const_param(w, gate + ".l1.b", 1, cfg.gate_hidden, 0.0);
    detail::add_param(w, gate + ".l2.w", cfg.gate_hidden, 2, cfg.gate_hidden, rng);
    // Bias the gate toward passing reflectance at the start of training;
    // closing it on unhelpful data is the easier direction to learn.
    nn::TensorT<S> gate_bias(1, 2, std::vector<S>{S(2.0), S(-2.0)}, true);
    gate_bias.set_name(gate + ".l2.b");
    w.params.emplace_back(gate + ".l2.b", gate_bias);
  }

  for (std::size_t j = num_stages; j-- > 0;) {
    const std::string fp = "fp" + std::to_string(j);
    const int source = j + 1 == num_stages ? cfg.stages[num_stages - 1].channels
                                           : cfg.fp_channels[j + 1];
    const int global = j + 1 == num_stages ? cfg.stages[num_stages - 1].channels : 0;
    const int skip = j == 0 ? 1 : cfg.stages[j - 1].channels;
    const int in = source + global + skip;
    detail::add_param(w, fp + ".w", in, cfg.fp_channels[j], in, rng);
    detail::add_const_param(w, fp + ".b", 1, cfg.fp_channels[j], 0.0);
    detail::add_bn(w, fp + ".bn", cfg.fp_channels[j]);
  }

  detail::add_param(w, "head.l1.w", cfg.fp_channels[0], cfg.head_hidden,
                    cfg.fp_channels[0], rng);
  detail::add_const_param(w, "head.l1.b", 1, cfg.head_hidden, 0.0);
  detail::add_bn(w, "head.l1.bn", cfg.head_hidden);
  detail::add_param(w, "head.l2.w", cfg.head_hidden, 1, cfg.head_hidden, rng);
  detail::add_const_param(w, "head.l2.b", 1, 1, 0.0);
  return w;
}

// ---------------------------------------------------------------------------
// graph building blocks

/// Inverted residual bottleneck applied per neighbour row, then max-pooled
/// over each neighbourhood: pointwise expand x4, depthwise scale, pointwise
/// project, plus a linear skip from the input rows. The network's very first
/// input layer skips batch norm.
template <typename S>
nn::TensorT<S> sa_block(const nn::TensorT<S>& rows, int k, ModelWeightsT<S>& w,
                        const std::string& prefix, bool training,
                        bool first_input_layer) {
  using nn::add;
  auto h = add(nn::matmul(rows, w.param(prefix + ".pw1.w")),
               w.param(prefix + ".pw1.b"));
  if (!first_input_layer)
    h = nn::batch_norm(h, w.param(prefix + ".pw1.bn.gamma"),
                       w.param(prefix + ".pw1.bn.beta"),
                       w.bn_state(prefix + ".pw1.bn"), training);
  h = nn::relu(h);
  h = add(nn::mul(h, w.param(prefix + ".dw.w")), w.param(prefix + ".dw.b"));
  h = nn::batch_norm(h, w.param(prefix + ".dw.bn.gamma"),
                     w.param(prefix + ".dw.bn.beta"),
                     w.bn_state(prefix + ".dw.bn"), training);
  h = nn::relu(h);
  h = add(nn::matmul(h, w.param(prefix + ".pw2.w")), w.param(prefix + ".pw2.b"));
  h = nn::batch_norm(h, w.param(prefix + ".pw2.bn.gamma"),
                     w.param(prefix + ".pw2.bn.beta"),
                     w.bn_state(prefix + ".pw2.bn"), training);
  h = add(h, nn::matmul(rows, w.param(prefix + ".skip.w")));
  h = nn::relu(h);
  return nn::grouped_max(h, k);
}

/// Per-sample gate logits from the (mean, std) reflectance summary.
template <typename S>
nn::TensorT<S> gate_logits(const nn::TensorT<S>& summary, ModelWeightsT<S>& w,
                           const std::string& prefix) {
  auto h = nn::relu(nn::add(nn::matmul(summary, w.param(prefix + ".l1.w")),
                            w.param(prefix + ".l1.b")));
  return nn::add(nn::matmul(h, w.param(prefix + ".l2.w")),
                 w.param(prefix + ".l2.b"));
}

/// Feature-propagation unit: interpolated coarse features (+ optional extras
/// such as the broadcast global feature), concatenated with skips, through a
/// linear + BN + ReLU.
template <typename S>
nn::TensorT<S> fp_block(std::vector<nn::TensorT<S>> parts, ModelWeightsT<S>& w,
                        const std::string& prefix, bool training) {
  auto x = nn::concat_cols(std::move(parts));
  auto h = nn::add(nn::matmul(x, w.param(prefix + ".w")), w.param(prefix + ".b"));
  h = nn::batch_norm(h, w.param(prefix + ".bn.gamma"), w.param(prefix + ".bn.beta"),
                     w.bn_state(prefix + ".bn"), training);
  return nn::relu(h);
}

/// Applies inverse-distance interpolation as a differentiable combination of
/// row gathers.
template <typename S>
nn::TensorT<S> interpolate(const nn::TensorT<S>& source_features,
                           const Interpolation& interp) {
  nn::TensorT<S> out;
  for (int j = 0; j < 3; ++j) {
    const int rows = int(interp.weight[j].size());
    std::vector<S> w(interp.weight[j].size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = S(interp.weight[j][i]);
    auto part = nn::mul(nn::gather_rows(source_features, interp.index[j]),
                        nn::TensorT<S>(rows, 1, std::move(w)));
    out = j == 0 ? part : nn::add(out, part);
  }
  return out;
}

// ---------------------------------------------------------------------------
// full forward pass

template <typename S>
struct ForwardResult {
  nn::TensorT<S> probabilities;             // [total level-0 points, 1]
  std::vector<std::uint32_t> sample_offsets;  // batch + 1 entries
  std::vector<nn::TensorT<S>> stage_gates;  // per stage, [batch, 1] in {0,1}
};

/// Runs the encoder/decoder over a batch of samples with shared weights.
/// Training mode uses batch statistics, Gumbel noise and random centroid
/// subsets; eval mode is fully deterministic.
template <typename S>
ForwardResult<S> forward_batch(const NetworkConfig& cfg, ModelWeightsT<S>& weights,
                               const std::vector<const pre::Sample*>& samples,
                               bool training, std::uint64_t seed) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("forward_batch: empty batch");
  if (weights.config_digest != cfg.digest())
    throw DataError("forward_batch: weights do not match the network config");
  const int batch = int(samples.size());
  const std::size_t num_stages = cfg.stages.size();
  const int k = cfg.neighbor_k;

  // Per-sample, per-level geometry.
  struct Level {
    std::vector<Vec3f> positions;
    std::vector<float> reflectance;
  };
  std::vector<std::vector<Level>> levels(samples.size());
  std::vector<std::vector<Neighborhoods>> hoods(samples.size());
  std::vector<std::vector<std::vector<std::uint32_t>>> cents(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const pre::Sample& sample = *samples[b];
    levels[b].resize(num_stages + 1);
    auto norm = normalize_sample(sample.positions);
    levels[b][0].positions = std::move(norm.positions);
    levels[b][0].reflectance = sample.reflectance;
    hoods[b].resize(num_stages);
    cents[b].resize(num_stages);
    for (std::size_t s = 0; s < num_stages; ++s) {
      const auto& pts = levels[b][s].positions;
      cents[b][s] = select_centroids(pts, cfg.stages[s].centroid_voxel, training,
                                     derive_seed(seed, b, s, 0xce17));
      hoods[b][s] = group_neighborhoods(
          pts, cents[b][s], k,
          s == 0 ? std::optional<float>(cfg.stage1_radius) : std::nullopt);
      auto& next = levels[b][s + 1];
      next.positions.reserve(cents[b][s].size());
      next.reflectance.reserve(cents[b][s].size());
      for (std::uint32_t c : cents[b][s]) {
        next.positions.push_back(pts[c]);
        next.reflectance.push_back(levels[b][s].reflectance[c]);
      }
    }
  }

  // Batch-stacked row offsets per level.
  std::vector<std::vector<std::uint32_t>> offsets(num_stages + 1);
  for (std::size_t l = 0; l <= num_stages; ++l) {
    offsets[l].assign(1, 0);
    for (std::size_t b = 0; b < samples.size(); ++b)
      offsets[l].push_back(offsets[l].back() +
                           std::uint32_t(levels[b][l].positions.size()));
  }

  // Constant reflectance columns per level and sample-id row maps.
  std::vector<nn::TensorT<S>> refl(num_stages + 1);
  std::vector<std::vector<std::uint32_t>> row_sample(num_stages + 1);
  for (std::size_t l = 0; l <= num_stages; ++l) {
    std::vector<S> column;
    column.reserve(offsets[l].back());
    auto& ids = row_sample[l];
    ids.reserve(offsets[l].back());
    for (std::size_t b = 0; b < samples.size(); ++b)
      for (float r : levels[b][l].reflectance) {
        column.push_back(S(r));
        ids.push_back(std::uint32_t(b));
      }
    const int level_rows = int(column.size());
    refl[l] = nn::TensorT<S>(level_rows, 1, std::move(column));
  }

  // Per-sample reflectance summaries (mean, population std).
  std::vector<S> summary_values(samples.size() * 2);
  for (std::size_t b = 0; b < samples.size(); ++b) {
    double mean = 0.0;
    for (float r : samples[b]->reflectance) mean += r;
    mean /= double(samples[b]->reflectance.size());
    double var = 0.0;
    for (float r : samples[b]->reflectance) var += (r - mean) * (r - mean);
    var /= double(samples[b]->reflectance.size());
    summary_values[2 * b] = S(mean);
    summary_values[2 * b + 1] = S(std::sqrt(var));
  }
  nn::TensorT<S> summaries(batch, 2, std::move(summary_values));

  ForwardResult<S> result;
  result.sample_offsets = offsets[0];

  Rng gumbel_rng(derive_seed(seed, 0x6a3b));
  const nn::GumbelMode gate_mode =
      training ? nn::GumbelMode::train_hard : nn::GumbelMode::eval_hard;

  // Encoder.
  std::vector<nn::TensorT<S>> level_feats(num_stages + 1);  // [1..S] populated
  nn::TensorT<S> gated_level0;
  for (std::size_t s = 0; s < num_stages; ++s) {
    const std::string sa = "sa" + std::to_string(s + 1);
    auto logits = gate_logits(summaries, weights, "gate" + std::to_string(s + 1));
    auto gate_onehot = nn::gumbel_softmax(logits, double(cfg.gumbel_temperature),
                                          gate_mode, gumbel_rng);
    auto gate = nn::slice_cols(gate_onehot, 0, 1);  // component 0 = use reflectance
    result.stage_gates.push_back(gate);

    auto gate_rows = nn::gather_rows(gate, row_sample[s]);
    auto gated_refl = nn::mul(refl[s], gate_rows);
    if (s == 0) gated_level0 = gated_refl;

    // Stack neighbourhood rows across the batch.
    std::vector<std::uint32_t> nbr_global;
    std::vector<S> local;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const auto& hood = hoods[b][s];
      for (std::size_t i = 0; i < hood.indices.size(); ++i)
        nbr_global.push_back(offsets[s][b] + hood.indices[i]);
      for (float v : hood.local_coords) local.push_back(S(v));
    }
    nn::TensorT<S> local_coords(int(nbr_global.size()), 3, std::move(local));

    std::vector<nn::TensorT<S>> parts{local_coords,
                                      nn::gather_rows(gated_refl, nbr_global)};
    if (s > 0) parts.push_back(nn::gather_rows(level_feats[s], nbr_global));
    auto rows = nn::concat_cols(std::move(parts));
    level_feats[s + 1] = sa_block(rows, k, weights, sa, training, s == 0);
  }

  // Global max pool over the deepest level, broadcast to the level below.
  auto global_feature = nn::segment_max(level_feats[num_stages], offsets[num_stages]);

  // Decoder.
  nn::TensorT<S> decoded;
  for (std::size_t j = num_stages; j-- > 0;) {
    // Interpolate source features (level j+1) onto level j targets.
    Interpolation interp;
    for (int t = 0; t < 3; ++t) {
      interp.index[t].reserve(offsets[j].back());
      interp.weight[t].reserve(offsets[j].back());
    }
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const auto local = interpolation_weights(levels[b][j].positions,
                                               levels[b][j + 1].positions);
      for (int t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < local.index[t].size(); ++i) {
          interp.index[t].push_back(offsets[j + 1][b] + local.index[t][i]);
          interp.weight[t].push_back(local.weight[t][i]);
        }
    }
    const bool deepest = j + 1 == num_stages;
    auto source = deepest ? level_feats[num_stages] : decoded;
    std::vector<nn::TensorT<S>> parts{interpolate(source, interp)};
    if (deepest) parts.push_back(nn::gather_rows(global_feature, row_sample[j]));
    parts.push_back(j == 0 ? gated_level0 : level_feats[j]);
    decoded = fp_block(std::move(parts), weights, "fp" + std::to_string(j), training);
  }

  // Per-point head.
  auto h = nn::add(nn::matmul(decoded, weights.param("head.l1.w")),
                   weights.param("head.l1.b"));
  h = nn::batch_norm(h, weights.param("head.l1.bn.gamma"),
                     weights.param("head.l1.bn.beta"),
                     weights.bn_state("head.l1.bn"), training);
  h = nn::relu(h);
  auto logits = nn::add(nn::matmul(h, weights.param("head.l2.w")),
                        weights.param("head.l2.b"));
  result.probabilities = nn::sigmoid(logits);
  return result;
}

/// Eval-mode forward over one sample; returns plain per-point probabilities.
inline std::vector<float> predict_sample(const NetworkConfig& cfg,
                                         ModelWeights& weights,
                                         const pre::Sample& sample) {
  auto result = forward_batch<float>(cfg, weights, {&sample}, false, 0);
  return result.probabilities.values();
}

}  // namespace leafwood::model
