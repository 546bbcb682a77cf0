#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "leafwood/pre/reflectance.hpp"
#include "leafwood/synth/generator.hpp"
#include "leafwood/train/trainer.hpp"
#include "test_support.hpp"

using namespace leafwood;
using train::AugmentConfig;
using train::LossConfig;

namespace {

LossConfig plain_loss() {
  LossConfig cfg;
  cfg.label_smoothing = 0.0;
  cfg.sample_class_weights = false;
  return cfg;
}

}  // namespace

TEST(FocalLoss, ClosedFormHalfProbability) {
  const std::vector<float> p{0.5f};
  const std::vector<std::uint8_t> y{1};
  EXPECT_NEAR(train::focal_loss(p, y, plain_loss()), 0.25 * std::log(2.0), 1e-9);
}

TEST(FocalLoss, ConfidentCorrectGoesToZero) {
  const std::vector<std::uint8_t> y{1};
  double prev = 1e9;
  for (float p : {0.9f, 0.99f, 0.999f, 0.9999f}) {
    const double loss = train::focal_loss(std::vector<float>{p}, y, plain_loss());
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(FocalLoss, GammaZeroIsCrossEntropy) {
  LossConfig cfg = plain_loss();
  cfg.gamma = 0.0;
  Rng rng(3);
  std::vector<float> p(1000);
  std::vector<std::uint8_t> y(1000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = float(rng.uniform(0.01, 0.99));
    y[i] = rng.uniform() < 0.5;
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    ce += y[i] ? -std::log(double(p[i])) : -std::log(1.0 - double(p[i]));
  ce /= double(p.size());
  EXPECT_NEAR(train::focal_loss(p, y, cfg), ce, 1e-9);
}

TEST(FocalLoss, NonNegativeAndDecreasingInP) {
  const std::vector<std::uint8_t> y{1};
  double prev = 1e18;
  for (double pv = 0.02; pv < 1.0; pv += 0.02) {
    const double loss =
        train::focal_loss(std::vector<float>{float(pv)}, y, plain_loss());
    EXPECT_GE(loss, 0.0);
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(FocalLoss, FocusingUpweightsHardPoints) {
  const std::vector<std::uint8_t> y{1};
  auto ratio = [&](float p) {
    const double focal = train::focal_loss(std::vector<float>{p}, y, plain_loss());
    const double ce = -std::log(double(p));
    return focal / ce;
  };
  EXPECT_LT(ratio(0.9f), ratio(0.6f));
}

TEST(FocalLoss, BoundaryProbabilitiesClampNotThrow) {
  const std::vector<float> p{0.0f, 1.0f};
  const std::vector<std::uint8_t> y{0, 1};
  EXPECT_NO_THROW(train::focal_loss(p, y, plain_loss()));
  EXPECT_TRUE(std::isfinite(train::focal_loss(p, y, plain_loss())));
}

TEST(FocalLoss, SampleClassWeightsHandComputed) {
  // One wood, three leaf: wood weight 2, leaf weight 2/3.
  const std::vector<float> p{0.6f, 0.3f, 0.2f, 0.4f};
  const std::vector<std::uint8_t> y{1, 0, 0, 0};
  const auto w = train::inverse_class_frequency_weights(y);
  EXPECT_NEAR(w[0], 2.0, 1e-12);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-12);

  LossConfig cfg = plain_loss();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double li = y[i] ? -std::pow(1 - pi, 2.0) * std::log(pi)
                           : -std::pow(pi, 2.0) * std::log(1 - pi);
    num += w[i] * li;
    den += w[i];
  }
  EXPECT_NEAR(train::focal_loss(p, y, cfg, w), num / den, 1e-12);
}

TEST(FocalLoss, GraphMatchesReferenceAndGradchecks) {
  Rng rng(9);
  std::vector<float> p(64);
  std::vector<std::uint8_t> y(64);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = float(rng.uniform(0.05, 0.95));
    y[i] = rng.uniform() < 0.3;
  }
  LossConfig cfg;  // defaults: gamma 2, smoothing 0.1, class weights on
  const auto w = train::inverse_class_frequency_weights(y);

  nn::Tensor probs(64, 1, std::vector<float>(p.begin(), p.end()));
  const auto graph_loss = train::focal_loss_graph<float>(probs, y, cfg, w);
  EXPECT_NEAR(double(graph_loss.value()), train::focal_loss(p, y, cfg, w), 1e-5);

  // Gradient of the loss with respect to the probabilities (double).
  std::vector<double> pd(p.begin(), p.end());
  std::vector<nn::TensorT<double>> params{nn::TensorT<double>(64, 1, pd, true)};
  auto build = [&](std::vector<nn::TensorT<double>>& pr) {
    return train::focal_loss_graph<double>(pr[0], y, cfg, w);
  };
  const auto result = testsup::gradcheck(params, build);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.where;
}

TEST(Augment, FractionsAndDisjointness) {
  AugmentConfig cfg;
  Rng gen(5);
  std::size_t zeroed = 0, noised = 0, total = 0;
  for (int s = 0; s < 1000; ++s) {
    pre::Sample sample;
    const std::size_t n = 40 + gen.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      sample.positions.emplace_back(float(gen.uniform(-1, 1)),
                                    float(gen.uniform(-1, 1)),
                                    float(gen.uniform(-1, 1)));
      float r = float(gen.uniform(0.05, 1.0));  // nonzero so edits are countable
      sample.reflectance.push_back(r);
    }
    const auto out = train::augment_sample(sample, cfg, std::uint64_t(s));
    for (std::size_t i = 0; i < n; ++i) {
      if (out.reflectance[i] == 0.0f) ++zeroed;
      else if (out.reflectance[i] != sample.reflectance[i]) ++noised;
    }
    total += n;
  }
  EXPECT_NEAR(double(zeroed) / double(total), 0.25, 0.02);
  EXPECT_NEAR(double(noised) / double(total), 0.25, 0.02);
}

TEST(Augment, RotationIsIsometryAndRestArePristine) {
  AugmentConfig cfg;
  Rng gen(7);
  std::size_t rotated = 0;
  const int samples = 1000;
  for (int s = 0; s < samples; ++s) {
    pre::Sample sample;
    for (int i = 0; i < 30; ++i) {
      sample.positions.emplace_back(float(gen.uniform(-1, 1)),
                                    float(gen.uniform(-1, 1)),
                                    float(gen.uniform(-1, 1)));
      sample.reflectance.push_back(float(gen.uniform(-1, 1)));
    }
    const auto out = train::augment_sample(sample, cfg, std::uint64_t(s) + 5000);
    bool moved = false;
    for (int i = 0; i < 30; ++i)
      moved |= out.positions[i].x != sample.positions[i].x ||
               out.positions[i].y != sample.positions[i].y ||
               out.positions[i].z != sample.positions[i].z;
    if (moved) {
      ++rotated;
      for (int a = 0; a < 30; a += 5)
        for (int b = a + 1; b < 30; b += 7) {
          const float before = (sample.positions[a] - sample.positions[b]).norm();
          const float after = (out.positions[a] - out.positions[b]).norm();
          EXPECT_NEAR(before, after, 1e-5f);
        }
    } else {
      for (int i = 0; i < 30; ++i) {
        EXPECT_EQ(out.positions[i].x, sample.positions[i].x);
        EXPECT_EQ(out.positions[i].y, sample.positions[i].y);
        EXPECT_EQ(out.positions[i].z, sample.positions[i].z);
      }
    }
  }
  EXPECT_NEAR(double(rotated) / samples, 0.25, 0.05);
}

namespace {

/// Small labeled scene split into train/val tile sets.
struct TinyScene {
  std::vector<pre::Sample> train, val;
};

TinyScene tiny_scene(std::uint64_t seed) {
  synth::PlotSpec spec;
  spec.extent_x = 8.0f;
  spec.extent_y = 8.0f;
  spec.tree_count = 1;
  spec.tree.height = 9.0f;
  spec.tree.leaf_density = 120.0f;
  spec.tree.point_spacing = 0.07f;
  spec.understory_fraction = 0.0f;
  PointCloud plot = synth::generate_plot(spec, seed);

  // Drop generator ground (keeps the scene tiny), normalize reflectance.
  std::vector<std::uint32_t> keep;
  for (std::uint32_t i = 0; i < plot.size(); ++i)
    if (!plot.ground[i]) keep.push_back(i);
  PointCloud cloud = plot.subset(keep);
  pre::normalize_cloud_reflectance(cloud);

  pre::PreprocessConfig pre_cfg;
  auto samples = pre::make_samples(cloud, pre_cfg, seed + 1);
  TinyScene scene;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() < 2) continue;  // degenerate singleton tiles
    (i % 4 == 3 ? scene.val : scene.train).push_back(samples[i]);
  }
  return scene;
}

model::NetworkConfig overfit_config() {
  model::NetworkConfig cfg = model::NetworkConfig::reduced_profile();
  cfg.stages = {{0.12f, 16}, {0.35f, 32}};
  cfg.fp_channels = {16, 32};
  cfg.head_hidden = 16;
  return cfg;
}

}  // namespace

TEST(Fit, StepCountMatchesBatchArithmetic) {
  TinyScene scene = tiny_scene(11);
  // Exactly 35 training samples, batch 10 -> 4 steps per epoch.
  while (scene.train.size() > 35) scene.train.pop_back();
  while (scene.train.size() < 35) scene.train.push_back(scene.train.front());
  ASSERT_GE(scene.val.size(), 1u);

  train::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 10;
  cfg.seed = 3;
  const auto result = train::fit(scene.train, scene.val, overfit_config(), cfg,
                                 LossConfig{}, AugmentConfig{});
  EXPECT_EQ(result.optimizer_steps, 4u);
  EXPECT_EQ(result.log.size(), 1u);
}

TEST(Fit, RejectsUnlabeledSamples) {
  TinyScene scene = tiny_scene(13);
  scene.train[0].labels.clear();
  train::TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train::fit(scene.train, scene.val, overfit_config(), cfg,
                          LossConfig{}, AugmentConfig{}),
               DataError);
}

TEST(Fit, CheckpointSequenceStrictlyIncreasing) {
  TinyScene scene = tiny_scene(17);
  train::TrainConfig cfg;
  cfg.epochs = 6;
  cfg.seed = 5;
  const auto result = train::fit(scene.train, scene.val, overfit_config(), cfg,
                                 LossConfig{}, AugmentConfig{});
  ASSERT_GE(result.checkpoint_val_ba.size(), 1u);
  for (std::size_t i = 1; i < result.checkpoint_val_ba.size(); ++i)
    EXPECT_GT(result.checkpoint_val_ba[i], result.checkpoint_val_ba[i - 1]);
  EXPECT_NEAR(result.best_val_ba, result.checkpoint_val_ba.back(), 1e-15);
}

TEST(Fit, BitwiseReproducibleLog) {
  TinyScene scene = tiny_scene(19);
  train::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 21;
  const auto a = train::fit(scene.train, scene.val, overfit_config(), cfg,
                            LossConfig{}, AugmentConfig{});
  const auto b = train::fit(scene.train, scene.val, overfit_config(), cfg,
                            LossConfig{}, AugmentConfig{});
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss, b.log[i].loss);
    EXPECT_EQ(a.log[i].val_ba, b.log[i].val_ba);
    EXPECT_EQ(a.log[i].val_f1, b.log[i].val_f1);
  }
}

TEST(Fit, OverfitsTinySceneWithinFiftyEpochs) {
  TinyScene scene = tiny_scene(23);
  train::TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 5;
  cfg.max_lr = 3e-3;
  cfg.seed = 7;
  // Overfit oracle: augmentation off, loss at its defaults.
  AugmentConfig augment;
  augment.reflectance_zero_fraction = 0.0;
  augment.reflectance_noise_fraction = 0.0;
  augment.rotation_fraction = 0.0;
  const auto result = train::fit(scene.train, scene.val, overfit_config(), cfg,
                                 LossConfig{}, augment);

  // Training-tile balanced accuracy with the best checkpoint.
  auto weights = result.best_weights;
  std::vector<std::uint8_t> predicted, truth;
  for (const auto& sample : scene.train) {
    const auto probs = model::predict_sample(overfit_config(), weights, sample);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      predicted.push_back(probs[i] >= 0.5f);
      truth.push_back(sample.labels[i]);
    }
  }
  const auto metrics = eval::classification_metrics(predicted, truth);
  EXPECT_GE(metrics.balanced_accuracy, 0.95)
      << "training BA " << metrics.balanced_accuracy;
}
