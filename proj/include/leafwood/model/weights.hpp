#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "leafwood/core/types.hpp"
#include "leafwood/model/config.hpp"
#include "leafwood/nn/tensor.hpp"

namespace leafwood::model {

/// Named parameter store for one network: trainable tensors plus batch-norm
/// running statistics, in a fixed order so optimisation and serialization
/// are deterministic.
template <typename S>
struct ModelWeightsT {
  std::vector<std::pair<std::string, nn::TensorT<S>>> params;
  std::vector<std::pair<std::string, nn::BatchNormState<S>>> bn_states;
  std::uint64_t config_digest = 0;

  nn::TensorT<S>& param(const std::string& name) {
    for (auto& [n, t] : params)
      if (n == name) return t;
    throw std::invalid_argument("unknown parameter '" + name + "'");
  }

  nn::BatchNormState<S>& bn_state(const std::string& name) {
    for (auto& [n, s] : bn_states)
      if (n == name) return s;
    throw std::invalid_argument("unknown batch-norm state '" + name + "'");
  }

  std::vector<nn::TensorT<S>> trainable() {
    std::vector<nn::TensorT<S>> out;
    out.reserve(params.size());
    for (auto& [n, t] : params) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
  }
};

using ModelWeights = ModelWeightsT<float>;

namespace detail {
constexpr char kWeightsMagic[4] = {'L', 'W', 'N', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;
}  // namespace detail

/// Versioned binary weights file: magic, version, config digest, then named
/// f32 blocks (u32 name length, name, u8 rank, u64 dims, payload), little
/// endian. Batch-norm running statistics ride along as *.running_mean /
/// *.running_var blocks.
inline void save_weights(const ModelWeights& weights, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  auto put = [&](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), std::streamsize(n));
  };
  auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto put_u64 = [&](std::uint64_t v) { put(&v, 8); };
  auto put_block = [&](const std::string& name, std::uint64_t rows,
                       std::uint64_t cols, const float* data) {
    put_u32(std::uint32_t(name.size()));
    put(name.data(), name.size());
    const std::uint8_t rank = 2;
    put(&rank, 1);
    put_u64(rows);
    put_u64(cols);
    put(data, std::size_t(rows) * cols * 4);
  };

  put(detail::kWeightsMagic, 4);
  put_u32(detail::kWeightsVersion);
  put_u64(weights.config_digest);
  put_u32(std::uint32_t(weights.params.size() + 2 * weights.bn_states.size()));
  for (const auto& [name, tensor] : weights.params)
    put_block(name, std::uint64_t(tensor.rows()), std::uint64_t(tensor.cols()),
              tensor.values().data());
  for (const auto& [name, state] : weights.bn_states) {
    put_block(name + ".running_mean", 1, state.running_mean.size(),
              state.running_mean.data());
    put_block(name + ".running_var", 1, state.running_var.size(),
              state.running_var.data());
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Loads weights saved by `save_weights` into an initialised store (the
/// store defines the expected names and shapes). Throws DataError on digest
/// or shape mismatch.
inline void load_weights(ModelWeights& weights, const std::string& path,
                         bool check_digest = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto get = [&](void* p, std::size_t n) {
    if (!in.read(static_cast<char*>(p), std::streamsize(n)))
      throw IoError("'" + path + "': truncated weights file");
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, detail::kWeightsMagic, 4) != 0)
    throw ParseError("'" + path + "': not a weights file");
  std::uint32_t version = 0;
  get(&version, 4);
  if (version != detail::kWeightsVersion)
    throw ParseError("'" + path + "': unsupported weights version " +
                     std::to_string(version));
  std::uint64_t digest = 0;
  get(&digest, 8);
  if (check_digest && digest != weights.config_digest)
    throw DataError("'" + path + "': weights were trained for a different "
                    "network configuration");

  std::uint32_t blocks = 0;
  get(&blocks, 4);
  std::map<std::string, std::vector<float>> loaded;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    std::uint32_t name_len = 0;
    get(&name_len, 4);
    std::string name(name_len, '\0');
    get(name.data(), name_len);
    std::uint8_t rank = 0;
    get(&rank, 1);
    if (rank != 2) throw ParseError("'" + path + "': unexpected block rank");
    std::uint64_t rows = 0, cols = 0;
    get(&rows, 8);
    get(&cols, 8);
    std::vector<float> data(std::size_t(rows) * cols);
    get(data.data(), data.size() * 4);
    shapes[name] = {rows, cols};
    loaded[name] = std::move(data);
  }

  auto take = [&](const std::string& name) -> std::vector<float>& {
    const auto it = loaded.find(name);
    if (it == loaded.end())
      throw DataError("'" + path + "': missing block '" + name + "'");
    return it->second;
  };
  for (auto& [name, tensor] : weights.params) {
    auto& data = take(name);
    const auto [rows, cols] = shapes[name];
    if (rows != std::uint64_t(tensor.rows()) || cols != std::uint64_t(tensor.cols()))
      throw DataError("'" + path + "': shape mismatch for '" + name + "'");
    tensor.values() = std::move(data);
  }
  for (auto& [name, state] : weights.bn_states) {
    auto& mean = take(name + ".running_mean");
    auto& var = take(name + ".running_var");
    if (mean.size() != state.running_mean.size() ||
        var.size() != state.running_var.size())
      throw DataError("'" + path + "': batch-norm width mismatch for '" + name + "'");
    state.running_mean = std::move(mean);
    state.running_var = std::move(var);
  }
}

}  // namespace leafwood::model
