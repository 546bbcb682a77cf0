#pragma once

#include <cmath>
#include <stdexcept>

#include "leafwood/core/rng.hpp"
#include "leafwood/nn/tensor.hpp"

namespace leafwood::nn {

enum class GumbelMode {
  train_hard,  // Gumbel noise + straight-through hard one-hot
  eval_hard,   // deterministic argmax one-hot, no noise
  soft         // noisy softmax without discretisation (probe/diagnostics)
};

/// Row-wise Gumbel-Softmax. Hard modes emit exact one-hot rows in the
/// forward pass; the backward pass always flows through the tempered softmax
/// (straight-through estimator), which keeps discrete decisions trainable.
template <typename S>
TensorT<S> gumbel_softmax(TensorT<S> logits, double temperature,
                          GumbelMode mode, Rng& rng) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  const int rows = logits.rows(), cols = logits.cols();

  // Tempered (optionally noisy) softmax per row.
  std::vector<S> soft(logits.size());
  for (int r = 0; r < rows; ++r) {
    S max_z = std::numeric_limits<S>::lowest();
    for (int c = 0; c < cols; ++c) {
      S z = logits.values()[std::size_t(r) * cols + c];
      if (mode != GumbelMode::eval_hard) {
        const double u = rng.uniform_open();
        z += S(-std::log(-std::log(u)));
      }
      z /= S(temperature);
      soft[std::size_t(r) * cols + c] = z;
      max_z = std::max(max_z, z);
    }
    S denom = S(0);
    for (int c = 0; c < cols; ++c) {
      S& z = soft[std::size_t(r) * cols + c];
      z = std::exp(z - max_z);
      denom += z;
    }
    for (int c = 0; c < cols; ++c) soft[std::size_t(r) * cols + c] /= denom;
  }

  std::vector<S> out = soft;
  if (mode != GumbelMode::soft) {
    for (int r = 0; r < rows; ++r) {
      int best = 0;
      for (int c = 1; c < cols; ++c)
        if (soft[std::size_t(r) * cols + c] > soft[std::size_t(r) * cols + best])
          best = c;
      for (int c = 0; c < cols; ++c)
        out[std::size_t(r) * cols + c] = c == best ? S(1) : S(0);
    }
  }

  return detail::make_result<S>(
      rows, cols, std::move(out), {logits},
      [logits, soft = std::move(soft), temperature, rows,
       cols](typename TensorT<S>::Node& n) mutable {
        if (!logits.requires_grad()) return;
        logits.ensure_grad();
        for (int r = 0; r < rows; ++r) {
          S dot = S(0);
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = std::size_t(r) * cols + c;
            dot += n.grad[i] * soft[i];
          }
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = std::size_t(r) * cols + c;
            logits.grad()[i] += soft[i] * (n.grad[i] - dot) / S(temperature);
          }
        }
      });
}

}  // namespace leafwood::nn
