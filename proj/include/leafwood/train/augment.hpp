#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "leafwood/core/rng.hpp"
#include "leafwood/pre/samples.hpp"

namespace leafwood::train {

/// On-the-fly augmentation: an independent quarter of each sample's
/// reflectance values is reset to the (zero) mean and a disjoint quarter gets
/// unit Gaussian noise; a quarter of samples are rigidly rotated. Positions
/// are never perturbed beyond the rotation.
struct AugmentConfig {
  double reflectance_zero_fraction = 0.25;
  double reflectance_noise_fraction = 0.25;
  double noise_mu = 0.0;
  double noise_sigma = 1.0;
  double rotation_fraction = 0.25;

  void validate() const {
    auto in01 = [](double f) { return f >= 0.0 && f <= 1.0; };
    if (!in01(reflectance_zero_fraction) || !in01(reflectance_noise_fraction) ||
        !in01(rotation_fraction))
      throw std::invalid_argument("augment fractions must be in [0,1]");
    if (reflectance_zero_fraction + reflectance_noise_fraction > 1.0)
      throw std::invalid_argument(
          "zeroed and noised reflectance fractions must fit disjointly");
  }
};

namespace detail {

/// Uniform random rotation (Shoemake's quaternion method), row-major 3x3.
inline std::array<double, 9> random_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double x = a * std::sin(2.0 * std::numbers::pi * u2);
  const double y = a * std::cos(2.0 * std::numbers::pi * u2);
  const double z = b * std::sin(2.0 * std::numbers::pi * u3);
  const double w = b * std::cos(2.0 * std::numbers::pi * u3);
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
          2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)};
}

}  // namespace detail

inline pre::Sample augment_sample(const pre::Sample& sample, const AugmentConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  pre::Sample out = sample;
  Rng rng(seed);
  const std::size_t n = sample.size();

  // Disjoint index pools via one partial shuffle.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t zero_count =
      std::size_t(std::lround(cfg.reflectance_zero_fraction * double(n)));
  const std::size_t noise_count =
      std::size_t(std::lround(cfg.reflectance_noise_fraction * double(n)));
  for (std::size_t i = 0; i < zero_count + noise_count && i < n; ++i) {
    const std::size_t j = i + std::size_t(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < zero_count; ++i) out.reflectance[order[i]] = 0.0f;
  for (std::size_t i = zero_count; i < zero_count + noise_count && i < n; ++i)
    out.reflectance[order[i]] +=
        float(rng.normal(cfg.noise_mu, cfg.noise_sigma));

  if (rng.uniform() < cfg.rotation_fraction) {
    const auto r = detail::random_rotation(rng);
    for (Vec3f& p : out.positions) {
      const double x = p.x, y = p.y, z = p.z;
      p = Vec3f(float(r[0] * x + r[1] * y + r[2] * z),
                float(r[3] * x + r[4] * y + r[5] * z),
                float(r[6] * x + r[7] * y + r[8] * z));
    }
  }
  return out;
}

inline std::vector<pre::Sample> augment_batch(
    const std::vector<const pre::Sample*>& samples, const AugmentConfig& cfg,
    std::uint64_t seed) {
  std::vector<pre::Sample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(augment_sample(*samples[i], cfg, derive_seed(seed, i)));
  return out;
}

}  // namespace leafwood::train
