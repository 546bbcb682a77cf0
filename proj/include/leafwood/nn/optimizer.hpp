#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "leafwood/nn/tensor.hpp"

namespace leafwood::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment estimates for one parameter list plus the shared step
/// counter.
template <typename S>
struct OptimizerState {
  AdamWConfig config;
  std::vector<std::vector<S>> m, v;
  std::uint64_t step = 0;

  void init(const std::vector<TensorT<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size(), S(0));
      v.emplace_back(p.size(), S(0));
    }
    step = 0;
  }
};

/// One AdamW update: decoupled weight decay first (p -= lr*wd*p), then the
/// bias-corrected moment step. Throws on a missing or non-finite gradient,
/// naming the parameter.
template <typename S>
void adamw_step(std::vector<TensorT<S>>& params, OptimizerState<S>& state,
                double lr) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adamw_step: optimizer state not initialised");
  state.step += 1;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double bias1 = 1.0 - std::pow(b1, double(state.step));
  const double bias2 = 1.0 - std::pow(b2, double(state.step));

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    if (!param.has_grad())
      throw std::invalid_argument("adamw_step: parameter '" + param.name() +
                                  "' has no gradient");
    auto& values = param.values();
    auto& grad = param.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = double(grad[i]);
      if (!std::isfinite(g))
        throw std::runtime_error("adamw_step: non-finite gradient in parameter '" +
                                 param.name() + "'");
      double w = double(values[i]);
      w -= lr * state.config.weight_decay * w;
      const double mi = b1 * double(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * double(v[i]) + (1.0 - b2) * g * g;
      m[i] = S(mi);
      v[i] = S(vi);
      const double m_hat = mi / bias1;
      const double v_hat = vi / bias2;
      w -= lr * m_hat / (std::sqrt(v_hat) + state.config.epsilon);
      values[i] = S(w);
    }
  }
}

}  // namespace leafwood::nn
