#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leafwood/core/types.hpp"

namespace leafwood::model {

struct StageConfig {
  float centroid_voxel = 0.1f;  // normalized-coordinate units
  int channels = 64;
};

/// Architecture description. Stage geometry lives in normalized sample
/// coordinates (samples are rescaled to unit max norm on input). Only the
/// first stage constrains its neighbourhood search by a radius; later stages
/// always gather the nearest `neighbor_k` points.
struct NetworkConfig {
  std::vector<StageConfig> stages{{0.05f, 64}, {0.1f, 128}, {0.2f, 256}, {0.4f, 512}};
  std::vector<int> fp_channels{64, 128, 256, 512};
  int neighbor_k = 32;
  float stage1_radius = 0.1f;
  int expansion_factor = 4;
  int gate_hidden = 8;
  float gumbel_temperature = 1.0f;
  int head_hidden = 128;

  /// Two-stage profile for desk-scale runs and the acceptance suite.
  static NetworkConfig reduced_profile() {
    NetworkConfig cfg;
    cfg.stages = {{0.12f, 32}, {0.35f, 64}};
    cfg.fp_channels = {32, 64};
    cfg.stage1_radius = 0.25f;
    cfg.head_hidden = 32;
    return cfg;
  }

  void validate() const {
    if (stages.empty()) throw std::invalid_argument("config: no SA stages");
    if (stages.size() != fp_channels.size())
      throw std::invalid_argument("config: SA stage count must equal FP stage count");
    if (neighbor_k != 32)
      throw std::invalid_argument("config: neighbor_k is fixed at 32");
    if (expansion_factor != 4)
      throw std::invalid_argument("config: expansion_factor is fixed at 4");
    if (!(stage1_radius > 0.0f))
      throw std::invalid_argument("config: stage1_radius must be positive");
    if (!(gumbel_temperature > 0.0f))
      throw std::invalid_argument("config: gumbel_temperature must be positive");
    if (gate_hidden < 1) throw std::invalid_argument("config: gate_hidden must be >= 1");
    if (head_hidden < 1) throw std::invalid_argument("config: head_hidden must be >= 1");
    for (const auto& s : stages) {
      if (!(s.centroid_voxel > 0.0f))
        throw std::invalid_argument("config: centroid voxel sizes must be positive");
      if (s.channels < 1) throw std::invalid_argument("config: channels must be >= 1");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages)
      j["stages"].push_back({{"centroid_voxel", s.centroid_voxel},
                             {"channels", s.channels}});
    j["fp_channels"] = fp_channels;
    j["neighbor_k"] = neighbor_k;
    j["stage1_radius"] = stage1_radius;
    j["expansion_factor"] = expansion_factor;
    j["gate_hidden"] = gate_hidden;
    j["gumbel_temperature"] = gumbel_temperature;
    j["head_hidden"] = head_hidden;
    return j;
  }

  static NetworkConfig from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.stages.clear();
    for (const auto& s : j.at("stages"))
      cfg.stages.push_back(
          {s.at("centroid_voxel").get<float>(), s.at("channels").get<int>()});
    cfg.fp_channels = j.at("fp_channels").get<std::vector<int>>();
    cfg.neighbor_k = j.value("neighbor_k", 32);
    cfg.stage1_radius = j.at("stage1_radius").get<float>();
    cfg.expansion_factor = j.value("expansion_factor", 4);
    cfg.gate_hidden = j.value("gate_hidden", 8);
    cfg.gumbel_temperature = j.value("gumbel_temperature", 1.0f);
    cfg.head_hidden = j.value("head_hidden", 128);
    cfg.validate();
    return cfg;
  }

  /// FNV-1a over the canonical JSON dump; stored in weights files so a
  /// mismatched architecture is rejected at load time.
  std::uint64_t digest() const {
    const std::string dump = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

inline NetworkConfig load_network_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return NetworkConfig::from_json(j);
}

inline void save_network_config(const NetworkConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << cfg.to_json().dump(2) << '\n';
}

}  // namespace leafwood::model
