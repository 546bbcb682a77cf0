#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "leafwood/core/types.hpp"

namespace leafwood::pre {

/// Figure-level preprocessing knobs. Defaults follow the acquisition
/// pipeline this project targets: Riegl-style deviation/reflectance cuts and
/// the two tiling scales of 2 m and 4 m.
struct PreprocessConfig {
  float deviation_max = 15.0f;     // remove points with deviation strictly above
  float reflectance_min = -20.0f;  // remove points with raw reflectance strictly below
  float fine_voxel = 2.0f;         // meters
  float coarse_voxel = 4.0f;       // meters
  std::uint32_t max_points = 16384;
  bool ground_removal = true;
  float cloth_resolution = 0.75f;  // meters
  int cloth_rigidness = 2;         // 1..3 smoothing passes per step
  float ground_threshold = 0.35f;  // meters from the settled cloth

  void validate() const {
    if (!(fine_voxel > 0.0f) || !(coarse_voxel > 0.0f))
      throw std::invalid_argument("voxel sizes must be positive");
    if (!(fine_voxel < coarse_voxel))
      throw std::invalid_argument("fine_voxel must be smaller than coarse_voxel");
    if (max_points == 0) throw std::invalid_argument("max_points must be positive");
    if (max_points > 16384)
      throw std::invalid_argument("max_points exceeds the 16384-point sample cap");
    if (cloth_rigidness < 1 || cloth_rigidness > 3)
      throw std::invalid_argument("cloth rigidness must be in 1..3");
    if (!(cloth_resolution > 0.0f))
      throw std::invalid_argument("cloth_resolution must be positive");
    if (!(ground_threshold > 0.0f))
      throw std::invalid_argument("ground_threshold must be positive");
  }

  nlohmann::json to_json() const {
    return {{"deviation_max", deviation_max},
            {"reflectance_min", reflectance_min},
            {"fine_voxel", fine_voxel},
            {"coarse_voxel", coarse_voxel},
            {"max_points", max_points},
            {"ground_removal", ground_removal},
            {"cloth_resolution", cloth_resolution},
            {"cloth_rigidness", cloth_rigidness},
            {"ground_threshold", ground_threshold}};
  }

  static PreprocessConfig from_json(const nlohmann::json& j) {
    PreprocessConfig cfg;
    cfg.deviation_max = j.value("deviation_max", cfg.deviation_max);
    cfg.reflectance_min = j.value("reflectance_min", cfg.reflectance_min);
    cfg.fine_voxel = j.value("fine_voxel", cfg.fine_voxel);
    cfg.coarse_voxel = j.value("coarse_voxel", cfg.coarse_voxel);
    cfg.max_points = j.value("max_points", cfg.max_points);
    cfg.ground_removal = j.value("ground_removal", cfg.ground_removal);
    cfg.cloth_resolution = j.value("cloth_resolution", cfg.cloth_resolution);
    cfg.cloth_rigidness = j.value("cloth_rigidness", cfg.cloth_rigidness);
    cfg.ground_threshold = j.value("ground_threshold", cfg.ground_threshold);
    cfg.validate();
    return cfg;
  }
};

inline PreprocessConfig load_preprocess_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return PreprocessConfig::from_json(j);
}

}  // namespace leafwood::pre
