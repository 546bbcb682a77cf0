#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace leafwood::nn {

/// One-cycle cosine schedule: a linear ramp from max_lr/25 to max_lr over
/// `warmup_steps`, then cosine decay down to max_lr/1e4 at `total_steps`.
struct ScheduleConfig {
  double max_lr = 1e-3;
  std::uint64_t warmup_steps = 10;
  std::uint64_t total_steps = 0;

  void validate() const {
    if (!(max_lr > 0.0)) throw std::invalid_argument("max_lr must be positive");
    if (warmup_steps >= total_steps)
      throw std::invalid_argument("warmup_steps must be below total_steps");
  }
};

inline double one_cycle_lr(std::uint64_t step, const ScheduleConfig& cfg) {
  cfg.validate();
  if (step > cfg.total_steps)
    throw std::invalid_argument("one_cycle_lr: step " + std::to_string(step) +
                                " beyond total_steps " +
                                std::to_string(cfg.total_steps));
  const double start = cfg.max_lr / 25.0;
  const double floor = cfg.max_lr / 1e4;
  if (step <= cfg.warmup_steps) {
    const double f = double(step) / double(cfg.warmup_steps);
    return start * (1.0 - f) + cfg.max_lr * f;
  }
  const double t =
      double(step - cfg.warmup_steps) / double(cfg.total_steps - cfg.warmup_steps);
  return floor + (cfg.max_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace leafwood::nn
