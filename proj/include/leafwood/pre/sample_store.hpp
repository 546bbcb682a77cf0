#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leafwood/core/types.hpp"
#include "leafwood/pre/samples.hpp"

namespace leafwood::pre {

/// On-disk sample store: one directory per run holding `samples.bin`, a
/// concatenation of little-endian records
///   header: scale u8, count u32, voxel key 3 x i32
///   body:   count x { position 3 x f32, reflectance f32, source index u32,
///                     label u8 (255 = unlabeled) }
/// plus `manifest.json` listing every record with its byte offset and key.
inline void save_samples(const std::vector<Sample>& samples,
                         const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path bin_path = fs::path(directory) / "samples.bin";
  std::ofstream out(bin_path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + bin_path.string() + "'");

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["records"] = nlohmann::json::array();

  std::uint64_t offset = 0;
  for (const Sample& sample : samples) {
    const std::uint32_t count = std::uint32_t(sample.size());
    manifest["records"].push_back(
        {{"offset", offset},
         {"scale", sample.scale == SampleScale::fine ? "fine" : "coarse"},
         {"key", {sample.key.i, sample.key.j, sample.key.k}},
         {"count", count}});

    auto put = [&](const void* p, std::size_t n) {
      out.write(static_cast<const char*>(p), std::streamsize(n));
      offset += n;
    };
    const std::uint8_t scale = std::uint8_t(sample.scale);
    put(&scale, 1);
    put(&count, 4);
    put(&sample.key.i, 4);
    put(&sample.key.j, 4);
    put(&sample.key.k, 4);
    for (std::uint32_t p = 0; p < count; ++p) {
      put(&sample.positions[p], 12);
      put(&sample.reflectance[p], 4);
      put(&sample.source_indices[p], 4);
      const std::uint8_t label =
          sample.has_labels() ? sample.labels[p] : kLabelUnknown;
      put(&label, 1);
    }
  }
  if (!out) throw IoError("write failed for '" + bin_path.string() + "'");
  out.close();

  std::ofstream mf(fs::path(directory) / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw IoError("cannot write sample manifest in '" + directory + "'");
}

inline std::vector<Sample> load_samples(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(directory) / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open '" + manifest_path.string() + "'");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + manifest_path.string() + "': " + e.what());
  }

  const fs::path bin_path = fs::path(directory) / "samples.bin";
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + bin_path.string() + "'");

  std::vector<Sample> samples;
  for (const auto& rec : manifest.at("records")) {
    in.seekg(std::streamoff(rec.at("offset").get<std::uint64_t>()));
    Sample sample;
    std::uint8_t scale = 0;
    std::uint32_t count = 0;
    auto get = [&](void* p, std::size_t n) {
      if (!in.read(static_cast<char*>(p), std::streamsize(n)))
        throw IoError("'" + bin_path.string() + "': truncated sample record");
    };
    get(&scale, 1);
    get(&count, 4);
    get(&sample.key.i, 4);
    get(&sample.key.j, 4);
    get(&sample.key.k, 4);
    if (scale > 1)
      throw ParseError("'" + bin_path.string() + "': bad scale byte");
    if (count > 16384)
      throw ParseError("'" + bin_path.string() + "': sample record above point cap");
    sample.scale = SampleScale(scale);
    sample.positions.resize(count);
    sample.reflectance.resize(count);
    sample.source_indices.resize(count);
    std::vector<std::uint8_t> labels(count);
    bool labeled = true;
    for (std::uint32_t p = 0; p < count; ++p) {
      get(&sample.positions[p], 12);
      get(&sample.reflectance[p], 4);
      get(&sample.source_indices[p], 4);
      get(&labels[p], 1);
      if (labels[p] == kLabelUnknown) labeled = false;
      else if (labels[p] > 1)
        throw ParseError("'" + bin_path.string() + "': label byte out of domain");
    }
    if (labeled) sample.labels = std::move(labels);
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace leafwood::pre
