#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "leafwood/core/point_cloud.hpp"
#include "leafwood/io/csv.hpp"  // detail::trim

namespace leafwood::io {

static_assert(std::endian::native == std::endian::little,
              "binary PLY path assumes a little-endian host");

namespace detail {

enum class PlyType { f32, f64, u8, i8, u16, i16, u32, i32 };

inline std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::f64: return 8;
    case PlyType::f32: case PlyType::u32: case PlyType::i32: return 4;
    case PlyType::u16: case PlyType::i16: return 2;
    default: return 1;
  }
}

inline bool ply_type_from_name(const std::string& name, PlyType& out) {
  if (name == "float" || name == "float32") out = PlyType::f32;
  else if (name == "double" || name == "float64") out = PlyType::f64;
  else if (name == "uchar" || name == "uint8") out = PlyType::u8;
  else if (name == "char" || name == "int8") out = PlyType::i8;
  else if (name == "ushort" || name == "uint16") out = PlyType::u16;
  else if (name == "short" || name == "int16") out = PlyType::i16;
  else if (name == "uint" || name == "uint32") out = PlyType::u32;
  else if (name == "int" || name == "int32") out = PlyType::i32;
  else return false;
  return true;
}

inline double decode_ply_value(const char* p, PlyType t) {
  auto load = [&]<typename T>() {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return double(v);
  };
  switch (t) {
    case PlyType::f32: return load.operator()<float>();
    case PlyType::f64: return load.operator()<double>();
    case PlyType::u8: return load.operator()<std::uint8_t>();
    case PlyType::i8: return load.operator()<std::int8_t>();
    case PlyType::u16: return load.operator()<std::uint16_t>();
    case PlyType::i16: return load.operator()<std::int16_t>();
    case PlyType::u32: return load.operator()<std::uint32_t>();
    case PlyType::i32: return load.operator()<std::int32_t>();
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
};

inline void append_ply_float(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// Reads an ascii or binary_little_endian PLY point file. Recognized vertex
/// properties: x, y, z, reflectance, deviation, label, p_wood, tree_id,
/// ground. Other properties are skipped with a warning.
inline PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "ply")
    throw ParseError("'" + path + "': missing 'ply' magic line");

  bool binary = false;
  bool normalized_reflectance = false;
  std::size_t vertex_count = 0;
  std::vector<detail::PlyProperty> props;
  bool in_vertex_element = false;
  bool seen_format = false;

  while (std::getline(in, line)) {
    std::istringstream ls{std::string(detail::trim(line))};
    std::string keyword;
    ls >> keyword;
    if (keyword == "comment") {
      std::string rest;
      std::getline(ls, rest);
      if (rest.find("reflectance=normalized") != std::string::npos)
        normalized_reflectance = true;
      continue;
    }
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError("'" + path + "': unsupported PLY format '" + fmt + "'");
      seen_format = true;
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex_element = true;
      } else {
        if (vertex_count == 0 || in_vertex_element == false)
          throw ParseError("'" + path + "': element '" + name +
                           "' precedes the vertex element");
        in_vertex_element = false;  // trailing elements are ignored
      }
    } else if (keyword == "property") {
      if (!in_vertex_element) continue;
      std::string type_name, prop_name;
      ls >> type_name;
      if (type_name == "list")
        throw ParseError("'" + path + "': list properties are not supported on vertices");
      ls >> prop_name;
      detail::PlyProperty p;
      p.name = prop_name;
      if (!detail::ply_type_from_name(type_name, p.type))
        throw ParseError("'" + path + "': unknown property type '" + type_name + "'");
      props.push_back(p);
    } else if (keyword == "end_header") {
      break;
    } else if (keyword == "ply" || keyword.empty()) {
      continue;
    } else {
      throw ParseError("'" + path + "': unexpected header line '" + line + "'");
    }
  }
  if (!seen_format) throw ParseError("'" + path + "': missing format line");

  int ix = -1, iy = -1, iz = -1, irefl = -1, idev = -1, ilabel = -1, iprob = -1,
      itree = -1, iground = -1;
  for (int c = 0; c < int(props.size()); ++c) {
    const std::string& name = props[c].name;
    if (name == "x") ix = c;
    else if (name == "y") iy = c;
    else if (name == "z") iz = c;
    else if (name == "reflectance") irefl = c;
    else if (name == "deviation") idev = c;
    else if (name == "label") ilabel = c;
    else if (name == "p_wood") iprob = c;
    else if (name == "tree_id") itree = c;
    else if (name == "ground") iground = c;
    else
      std::cerr << "warning: '" << path << "': ignoring unrecognized property '"
                << name << "'\n";
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw DataError("'" + path + "': vertex element must declare x, y and z");

  PointCloud cloud;
  cloud.reflectance_normalized = normalized_reflectance;
  cloud.positions.reserve(vertex_count);

  std::vector<double> row(props.size());
  auto consume_row = [&](std::size_t r) {
    cloud.positions.emplace_back(float(row[ix]), float(row[iy]), float(row[iz]));
    if (irefl >= 0) cloud.reflectance.push_back(float(row[irefl]));
    if (idev >= 0) cloud.deviation.push_back(float(row[idev]));
    if (ilabel >= 0) {
      const double v = row[ilabel];
      if (v != 0.0 && v != 1.0)
        throw ParseError("'" + path + "': row " + std::to_string(r) +
                         ": label must be 0 or 1, got " + std::to_string(v));
      cloud.labels.push_back(std::uint8_t(v));
    }
    if (iprob >= 0) {
      const double v = row[iprob];
      if (v < 0.0 || v > 1.0)
        throw ParseError("'" + path + "': row " + std::to_string(r) +
                         ": p_wood outside [0,1]");
      cloud.wood_probability.push_back(float(v));
    }
    if (itree >= 0) cloud.tree_id.push_back(std::uint32_t(row[itree]));
    if (iground >= 0) {
      const double v = row[iground];
      if (v != 0.0 && v != 1.0)
        throw ParseError("'" + path + "': row " + std::to_string(r) +
                         ": ground must be 0 or 1");
      cloud.ground.push_back(std::uint8_t(v));
    }
  };

  if (binary) {
    std::size_t stride = 0;
    for (const auto& p : props) stride += detail::ply_type_size(p.type);
    std::vector<char> buf(stride);
    for (std::size_t r = 0; r < vertex_count; ++r) {
      if (!in.read(buf.data(), std::streamsize(stride)))
        throw IoError("'" + path + "': truncated binary payload at row " +
                      std::to_string(r));
      std::size_t off = 0;
      for (std::size_t c = 0; c < props.size(); ++c) {
        row[c] = detail::decode_ply_value(buf.data() + off, props[c].type);
        off += detail::ply_type_size(props[c].type);
      }
      consume_row(r);
    }
  } else {
    for (std::size_t r = 0; r < vertex_count; ++r) {
      if (!std::getline(in, line))
        throw IoError("'" + path + "': truncated ascii payload at row " +
                      std::to_string(r));
      std::istringstream ls{line};
      for (std::size_t c = 0; c < props.size(); ++c) {
        if (!(ls >> row[c]))
          throw ParseError("'" + path + "': row " + std::to_string(r) +
                           ": non-numeric value in property '" + props[c].name + "'");
      }
      consume_row(r);
    }
  }

  cloud.validate();
  return cloud;
}

/// Writes the cloud as PLY 1.0. Property layout is fixed:
/// x,y,z float32; reflectance/deviation/p_wood float32; label/ground uchar;
/// tree_id uint32.
inline void write_ply(const PointCloud& cloud, const std::string& path,
                      bool binary = true) {
  if (cloud.empty()) throw DataError("refusing to write an empty cloud");
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");

  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  if (cloud.reflectance_normalized) out << "comment leafwood reflectance=normalized\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_reflectance()) out << "property float reflectance\n";
  if (cloud.has_deviation()) out << "property float deviation\n";
  if (cloud.has_labels()) out << "property uchar label\n";
  if (cloud.has_wood_probability()) out << "property float p_wood\n";
  if (cloud.has_tree_id()) out << "property uint tree_id\n";
  if (cloud.has_ground()) out << "property uchar ground\n";
  out << "end_header\n";

  if (binary) {
    std::string rec;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      rec.clear();
      auto put = [&](const void* p, std::size_t n) {
        rec.append(static_cast<const char*>(p), n);
      };
      put(&cloud.positions[i], 12);
      if (cloud.has_reflectance()) put(&cloud.reflectance[i], 4);
      if (cloud.has_deviation()) put(&cloud.deviation[i], 4);
      if (cloud.has_labels()) put(&cloud.labels[i], 1);
      if (cloud.has_wood_probability()) put(&cloud.wood_probability[i], 4);
      if (cloud.has_tree_id()) put(&cloud.tree_id[i], 4);
      if (cloud.has_ground()) put(&cloud.ground[i], 1);
      out.write(rec.data(), std::streamsize(rec.size()));
    }
  } else {
    std::string line;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      line.clear();
      detail::append_ply_float(line, cloud.positions[i].x);
      line += ' ';
      detail::append_ply_float(line, cloud.positions[i].y);
      line += ' ';
      detail::append_ply_float(line, cloud.positions[i].z);
      if (cloud.has_reflectance()) {
        line += ' ';
        detail::append_ply_float(line, cloud.reflectance[i]);
      }
      if (cloud.has_deviation()) {
        line += ' ';
        detail::append_ply_float(line, cloud.deviation[i]);
      }
      if (cloud.has_labels()) {
        line += ' ';
        line += std::to_string(int(cloud.labels[i]));
      }
      if (cloud.has_wood_probability()) {
        line += ' ';
        detail::append_ply_float(line, cloud.wood_probability[i]);
      }
      if (cloud.has_tree_id()) {
        line += ' ';
        line += std::to_string(cloud.tree_id[i]);
      }
      if (cloud.has_ground()) {
        line += ' ';
        line += std::to_string(int(cloud.ground[i]));
      }
      line += '\n';
      out << line;
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace leafwood::io
