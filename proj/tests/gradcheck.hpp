#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "leafwood/nn/tensor.hpp"

namespace testsup {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string where;
  std::size_t checked_elements = 0;
  std::size_t skipped_elements = 0;  // non-smooth within the probe step
};

/// Central finite-difference check of reverse-mode gradients. `build` must
/// deterministically construct a scalar loss from the given parameters
/// (re-seeding any internal randomness per call). Runs in the scalar type of
/// the tensors, which tests instantiate as double.
inline GradcheckResult gradcheck(
    std::vector<leafwood::nn::TensorT<double>> params,
    const std::function<leafwood::nn::TensorT<double>(
        std::vector<leafwood::nn::TensorT<double>>&)>& build,
    double step = 1e-3) {
  using leafwood::nn::TensorT;

  TensorT<double> loss = build(params);
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    p.ensure_grad();
    analytic.push_back(p.grad());
  }

  GradcheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + step;
      const double up = build(params).value();
      values[i] = keep - step;
      const double down = build(params).value();
      values[i] = keep;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[pi][i];
      const double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      ++result.checked_elements;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.where = "param " + std::to_string(pi) + " element " +
                       std::to_string(i) + " analytic " + std::to_string(an) +
                       " fd " + std::to_string(fd);
      }
    }
  }
  return result;
}

/// Variant for deep composite graphs with ReLU / max-pool kinks: central
/// differences are only a valid oracle when the loss is differentiable over
/// the whole probe window, so `build` additionally records an activation
/// signature (ReLU signs, argmax winners) into `signature` on every call.
/// Elements whose probe evaluations land in different smoothness regions are
/// skipped (counted); the rest are compared against the Richardson
/// extrapolation of steps h and h/2, which cancels the O(h^2) truncation
/// term that deep chains amplify.
inline GradcheckResult gradcheck_smooth(
    std::vector<leafwood::nn::TensorT<double>> params,
    const std::function<leafwood::nn::TensorT<double>(
        std::vector<leafwood::nn::TensorT<double>>&)>& build,
    std::vector<int>& signature, double step = 1e-3) {
  using leafwood::nn::TensorT;

  signature.clear();
  TensorT<double> loss = build(params);
  loss.backward();
  const std::vector<int> base_signature = signature;
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    p.ensure_grad();
    analytic.push_back(p.grad());
  }

  GradcheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      bool same_region = true;
      auto probe = [&](double offset) {
        values[i] = keep + offset;
        signature.clear();
        const double value = build(params).value();
        values[i] = keep;
        same_region = same_region && signature == base_signature;
        return value;
      };
      const double fd1 = (probe(step) - probe(-step)) / (2.0 * step);
      if (!same_region) {
        ++result.skipped_elements;
        continue;
      }
      const double fd2 = (probe(step / 2) - probe(-step / 2)) / step;
      const double oracle = (4.0 * fd2 - fd1) / 3.0;
      const double an = analytic[pi][i];
      const double rel =
          std::abs(an - oracle) / std::max({std::abs(an), std::abs(oracle), 1e-6});
      ++result.checked_elements;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.where = "param " + std::to_string(pi) + " element " +
                       std::to_string(i) + " analytic " + std::to_string(an) +
                       " fd " + std::to_string(oracle);
      }
    }
  }
  return result;
}

/// Signature helpers for gradcheck_smooth builders.
inline leafwood::nn::TensorT<double> signed_relu(leafwood::nn::TensorT<double> x,
                                                 std::vector<int>& signature) {
  for (double v : x.values()) signature.push_back(v > 0.0 ? 1 : 0);
  return leafwood::nn::relu(x);
}

inline leafwood::nn::TensorT<double> signed_grouped_max(
    leafwood::nn::TensorT<double> x, int k, std::vector<int>& signature) {
  const int groups = x.rows() / k, cols = x.cols();
  for (int g = 0; g < groups; ++g)
    for (int c = 0; c < cols; ++c) {
      int best = 0;
      double best_v = x.values()[std::size_t(g) * k * cols + c];
      for (int r = 1; r < k; ++r) {
        const double v = x.values()[(std::size_t(g) * k + r) * cols + c];
        if (v > best_v) {
          best_v = v;
          best = r;
        }
      }
      signature.push_back(best);
    }
  return leafwood::nn::grouped_max(x, k);
}

}  // namespace testsup
