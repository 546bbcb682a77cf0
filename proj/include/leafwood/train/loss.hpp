#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "leafwood/nn/tensor.hpp"

namespace leafwood::train {

/// Focal loss settings. `alpha` (class-prior weighting) is deliberately
/// absent; class imbalance is handled by the optional per-sample inverse
/// class-frequency weights instead.
struct LossConfig {
  double gamma = 2.0;
  double label_smoothing = 0.1;
  bool sample_class_weights = true;

  void validate() const {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
      throw std::invalid_argument("label_smoothing must be in [0,1)");
  }
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Per-point weights proportional to the inverse class frequency within one
/// sample, scaled so a balanced sample gets unit weights.
inline std::vector<double> inverse_class_frequency_weights(
    std::span<const std::uint8_t> labels) {
  std::size_t wood = 0;
  for (std::uint8_t l : labels) wood += l;
  const std::size_t leaf = labels.size() - wood;
  std::vector<double> weights(labels.size(), 1.0);
  if (wood == 0 || leaf == 0) return weights;  // single class: flat weights
  const double wood_w = 0.5 * double(labels.size()) / double(wood);
  const double leaf_w = 0.5 * double(labels.size()) / double(leaf);
  for (std::size_t i = 0; i < labels.size(); ++i)
    weights[i] = labels[i] ? wood_w : leaf_w;
  return weights;
}

/// Reference focal loss in double precision, with binary label smoothing
/// (y' = y(1-a) + a/2) and optional per-point weights (weighted mean).
/// Probabilities at exactly 0 or 1 are clamped, never an error.
inline double focal_loss(std::span<const float> probabilities,
                         std::span<const std::uint8_t> labels,
                         const LossConfig& cfg,
                         std::span<const double> point_weights = {}) {
  cfg.validate();
  if (probabilities.size() != labels.size())
    throw std::invalid_argument("focal_loss: array lengths differ");
  if (probabilities.empty()) throw std::invalid_argument("focal_loss: empty input");
  if (!point_weights.empty() && point_weights.size() != labels.size())
    throw std::invalid_argument("focal_loss: weight length mismatch");

  double total = 0.0, weight_total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::min(std::max(double(probabilities[i]), kProbabilityClamp),
                              1.0 - kProbabilityClamp);
    const double y = labels[i] ? 1.0 : 0.0;
    const double target = y * (1.0 - cfg.label_smoothing) + cfg.label_smoothing / 2.0;
    const double loss = -(target * std::pow(1.0 - p, cfg.gamma) * std::log(p) +
                          (1.0 - target) * std::pow(p, cfg.gamma) * std::log(1.0 - p));
    const double w = point_weights.empty() ? 1.0 : point_weights[i];
    total += w * loss;
    weight_total += w;
  }
  return total / weight_total;
}

/// Differentiable focal loss over a [n,1] probability tensor; same formula
/// as the reference implementation, composed from tensor primitives.
template <typename S>
nn::TensorT<S> focal_loss_graph(const nn::TensorT<S>& probabilities,
                                std::span<const std::uint8_t> labels,
                                const LossConfig& cfg,
                                std::span<const double> point_weights = {}) {
  cfg.validate();
  const int n = probabilities.rows();
  if (std::size_t(n) != labels.size() || probabilities.cols() != 1)
    throw std::invalid_argument("focal_loss_graph: shape mismatch");

  std::vector<S> target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    target[i] = S((labels[i] ? 1.0 : 0.0) * (1.0 - cfg.label_smoothing) +
                  cfg.label_smoothing / 2.0);
  nn::TensorT<S> y(n, 1, std::move(target));

  auto p = nn::clamp(probabilities, kProbabilityClamp, 1.0 - kProbabilityClamp);
  auto one_minus_p = nn::add_scalar(nn::mul_scalar(p, -1.0), 1.0);
  auto pos = nn::mul(nn::mul(y, nn::pow_scalar(one_minus_p, cfg.gamma)), nn::log(p));
  auto one_minus_y = nn::add_scalar(nn::mul_scalar(y, -1.0), 1.0);
  auto neg = nn::mul(nn::mul(one_minus_y, nn::pow_scalar(p, cfg.gamma)),
                     nn::log(one_minus_p));
  auto per_point = nn::mul_scalar(nn::add(pos, neg), -1.0);

  if (point_weights.empty()) return nn::mean_all(per_point);
  std::vector<S> w(point_weights.size());
  double weight_total = 0.0;
  for (std::size_t i = 0; i < point_weights.size(); ++i) {
    w[i] = S(point_weights[i]);
    weight_total += point_weights[i];
  }
  auto weighted = nn::mul(per_point, nn::TensorT<S>(n, 1, std::move(w)));
  return nn::mul_scalar(nn::sum_all(weighted), 1.0 / weight_total);
}

}  // namespace leafwood::train
