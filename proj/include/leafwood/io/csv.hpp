#pragma once

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "leafwood/core/point_cloud.hpp"

namespace leafwood::io {

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line,
                                                    std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view cell, std::size_t row, std::string_view column) {
  cell = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw ParseError("row " + std::to_string(row) + ": non-numeric value '" +
                     std::string(cell) + "' in column '" + std::string(column) + "'");
  return value;
}

/// Shortest representation that round-trips the float exactly.
inline void append_float(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// Reads a headered comma-separated point file. Columns x,y,z are required;
/// reflectance, deviation, label, p_wood, tree_id and ground are picked up
/// when present. Unknown columns are skipped with a warning on stderr.
inline PointCloud read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file, header row required");

  std::vector<std::string_view> cells;
  detail::split_csv_line(line, cells);
  int ix = -1, iy = -1, iz = -1, irefl = -1, idev = -1, ilabel = -1, iprob = -1,
      itree = -1, iground = -1;
  for (int c = 0; c < int(cells.size()); ++c) {
    const std::string_view name = detail::trim(cells[c]);
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
      std::cerr << "warning: '" << path << "': ignoring unrecognized column '"
                << name << "'\n";
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw DataError("'" + path + "': header must declare x, y and z columns");

  PointCloud cloud;
  const std::size_t columns = cells.size();
  std::size_t row = 1;  // header was row 0
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) {
      ++row;
      continue;
    }
    detail::split_csv_line(line, cells);
    if (cells.size() != columns)
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(columns) + " cells, got " +
                       std::to_string(cells.size()));
    auto num = [&](int c, std::string_view name) {
      return detail::parse_number(cells[c], row, name);
    };
    cloud.positions.emplace_back(float(num(ix, "x")), float(num(iy, "y")),
                                 float(num(iz, "z")));
    if (irefl >= 0) cloud.reflectance.push_back(float(num(irefl, "reflectance")));
    if (idev >= 0) cloud.deviation.push_back(float(num(idev, "deviation")));
    if (ilabel >= 0) {
      const double v = num(ilabel, "label");
      if (v != 0.0 && v != 1.0)
        throw ParseError("row " + std::to_string(row) + ": label must be 0 or 1, got " +
                         std::string(detail::trim(cells[ilabel])));
      cloud.labels.push_back(std::uint8_t(v));
    }
    if (iprob >= 0) {
      const double v = num(iprob, "p_wood");
      if (v < 0.0 || v > 1.0)
        throw ParseError("row " + std::to_string(row) + ": p_wood outside [0,1]");
      cloud.wood_probability.push_back(float(v));
    }
    if (itree >= 0) cloud.tree_id.push_back(std::uint32_t(num(itree, "tree_id")));
    if (iground >= 0) {
      const double v = num(iground, "ground");
      if (v != 0.0 && v != 1.0)
        throw ParseError("row " + std::to_string(row) + ": ground must be 0 or 1");
      cloud.ground.push_back(std::uint8_t(v));
    }
    ++row;
  }
  cloud.validate();
  return cloud;
}

inline void write_csv(const PointCloud& cloud, const std::string& path) {
  if (cloud.empty()) throw DataError("refusing to write an empty cloud");
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");

  std::string header = "x,y,z";
  if (cloud.has_reflectance()) header += ",reflectance";
  if (cloud.has_deviation()) header += ",deviation";
  if (cloud.has_labels()) header += ",label";
  if (cloud.has_wood_probability()) header += ",p_wood";
  if (cloud.has_tree_id()) header += ",tree_id";
  if (cloud.has_ground()) header += ",ground";
  out << header << '\n';

  std::string line;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    line.clear();
    detail::append_float(line, cloud.positions[i].x);
    line += ',';
    detail::append_float(line, cloud.positions[i].y);
    line += ',';
    detail::append_float(line, cloud.positions[i].z);
    if (cloud.has_reflectance()) {
      line += ',';
      detail::append_float(line, cloud.reflectance[i]);
    }
    if (cloud.has_deviation()) {
      line += ',';
      detail::append_float(line, cloud.deviation[i]);
    }
    if (cloud.has_labels()) {
      line += ',';
      line += std::to_string(int(cloud.labels[i]));
    }
    if (cloud.has_wood_probability()) {
      line += ',';
      detail::append_float(line, cloud.wood_probability[i]);
    }
    if (cloud.has_tree_id()) {
      line += ',';
      line += std::to_string(cloud.tree_id[i]);
    }
    if (cloud.has_ground()) {
      line += ',';
      line += std::to_string(int(cloud.ground[i]));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace leafwood::io
