#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "leafwood/eval/metrics.hpp"
#include "leafwood/model/network.hpp"
#include "leafwood/model/weights.hpp"
#include "leafwood/nn/optimizer.hpp"
#include "leafwood/nn/schedule.hpp"
#include "leafwood/train/augment.hpp"
#include "leafwood/train/loss.hpp"

namespace leafwood::train {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 10;
  double max_lr = 1e-3;
  std::uint64_t warmup_steps = 10;
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: keep the best weights in memory only
  nn::AdamWConfig adamw;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(max_lr > 0.0)) throw std::invalid_argument("max_lr must be positive");
  }
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double val_ba = 0.0;
  double val_f1 = 0.0;
};

struct FitResult {
  model::ModelWeights best_weights;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_ba = 0.0;
  std::uint64_t optimizer_steps = 0;
  std::vector<double> checkpoint_val_ba;  // strictly increasing by contract
};

inline model::ModelWeights clone_weights(const model::ModelWeights& weights) {
  model::ModelWeights out;
  out.config_digest = weights.config_digest;
  for (const auto& [name, tensor] : weights.params) {
    nn::Tensor copy(tensor.rows(), tensor.cols(), tensor.values(), true);
    copy.set_name(name);
    out.params.emplace_back(name, copy);
  }
  out.bn_states = weights.bn_states;
  return out;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Pooled eval-mode validation metrics at threshold 0.5.
inline eval::ClassificationMetrics validation_metrics(
    const model::NetworkConfig& cfg, model::ModelWeights& weights,
    const std::vector<pre::Sample>& samples) {
  std::vector<std::uint8_t> predicted, truth;
  for (const auto& sample : samples) {
    const auto probs = model::predict_sample(cfg, weights, sample);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      predicted.push_back(probs[i] >= 0.5f);
      truth.push_back(sample.labels[i]);
    }
  }
  return eval::classification_metrics(predicted, truth);
}

}  // namespace detail

/// Trains with AdamW under a one-cycle schedule stepped per batch, logging
/// one row per epoch and checkpointing whenever validation balanced accuracy
/// improves. Deterministic for a fixed seed in single-threaded runs.
inline FitResult fit(const std::vector<pre::Sample>& train_samples,
                     const std::vector<pre::Sample>& val_samples,
                     const model::NetworkConfig& net_cfg, const TrainConfig& cfg,
                     const LossConfig& loss_cfg, const AugmentConfig& augment_cfg) {
  cfg.validate();
  loss_cfg.validate();
  augment_cfg.validate();
  net_cfg.validate();
  if (train_samples.empty() || val_samples.empty())
    throw std::invalid_argument("fit: train and validation sets must be non-empty");
  for (const auto& s : train_samples)
    if (!s.has_labels())
      throw DataError("fit: unlabeled training sample encountered");
  for (const auto& s : val_samples)
    if (!s.has_labels())
      throw DataError("fit: unlabeled validation sample encountered");

  const std::uint64_t steps_per_epoch =
      (train_samples.size() + std::size_t(cfg.batch_size) - 1) /
      std::size_t(cfg.batch_size);
  nn::ScheduleConfig schedule;
  schedule.max_lr = cfg.max_lr;
  schedule.total_steps = std::uint64_t(cfg.epochs) * steps_per_epoch;
  // Short smoke runs cannot fit the full warmup; clamp instead of failing.
  schedule.warmup_steps =
      std::min<std::uint64_t>(cfg.warmup_steps, (schedule.total_steps - 1) / 2 + 1);
  if (schedule.warmup_steps >= schedule.total_steps)
    schedule.warmup_steps = schedule.total_steps - 1;

  auto weights = model::init_weights<float>(net_cfg, derive_seed(cfg.seed, 0x11));
  auto params = weights.trainable();
  nn::OptimizerState<float> optimizer;
  optimizer.config = cfg.adamw;
  optimizer.init(params);

  if (!cfg.checkpoint_dir.empty())
    std::filesystem::create_directories(cfg.checkpoint_dir);

  FitResult result;
  std::vector<std::uint32_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5f, std::uint64_t(epoch)));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + std::size_t(shuffle_rng.below(order.size() - i));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    double last_lr = 0.0;
    std::uint64_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), at + std::size_t(cfg.batch_size));
      std::vector<const pre::Sample*> batch;
      for (std::size_t i = at; i < end; ++i) batch.push_back(&train_samples[order[i]]);

      const auto augmented = augment_batch(
          batch, augment_cfg, derive_seed(cfg.seed, 0xa6, global_step));
      std::vector<const pre::Sample*> batch_ptrs;
      std::vector<std::uint8_t> labels;
      std::vector<double> point_weights;
      for (const auto& s : augmented) {
        batch_ptrs.push_back(&s);
        labels.insert(labels.end(), s.labels.begin(), s.labels.end());
        if (loss_cfg.sample_class_weights) {
          const auto w = inverse_class_frequency_weights(s.labels);
          point_weights.insert(point_weights.end(), w.begin(), w.end());
        }
      }

      auto forward = model::forward_batch<float>(
          net_cfg, weights, batch_ptrs, true, derive_seed(cfg.seed, 0xfd, global_step));
      auto loss = focal_loss_graph<float>(forward.probabilities, labels, loss_cfg,
                                          point_weights);
      for (auto& p : params) {
        p.ensure_grad();
        p.zero_grad();
      }
      loss.backward();
      last_lr = nn::one_cycle_lr(global_step, schedule);
      nn::adamw_step(params, optimizer, last_lr);
      ++global_step;
      ++batches;
      epoch_loss += double(loss.value());
    }

    const auto val = detail::validation_metrics(net_cfg, weights, val_samples);
    EpochLog row;
    row.epoch = epoch;
    row.loss = epoch_loss / double(batches);
    row.lr = last_lr;
    row.val_ba = val.balanced_accuracy;
    row.val_f1 = val.f1;
    result.log.push_back(row);

    if (val.balanced_accuracy > result.best_val_ba || result.best_epoch < 0) {
      result.best_val_ba = val.balanced_accuracy;
      result.best_epoch = epoch;
      result.best_weights = clone_weights(weights);
      result.checkpoint_val_ba.push_back(val.balanced_accuracy);
      if (!cfg.checkpoint_dir.empty()) {
        const std::string file = "checkpoint_epoch_" + std::to_string(epoch) + ".lwnw";
        model::save_weights(result.best_weights,
                            (std::filesystem::path(cfg.checkpoint_dir) / file).string());
        std::ofstream best(std::filesystem::path(cfg.checkpoint_dir) / "best.txt");
        best << file << '\n';
      }
    }
  }
  result.optimizer_steps = global_step;

  if (!cfg.checkpoint_dir.empty()) {
    std::ofstream log_file(std::filesystem::path(cfg.checkpoint_dir) /
                           "epoch_log.csv");
    log_file << "epoch,loss,lr,val_ba,val_f1\n";
    for (const auto& row : result.log)
      log_file << row.epoch << ',' << detail::fmt_double(row.loss) << ','
               << detail::fmt_double(row.lr) << ',' << detail::fmt_double(row.val_ba)
               << ',' << detail::fmt_double(row.val_f1) << '\n';
  }
  return result;
}

}  // namespace leafwood::train
