#pragma once

#include <string>

#include "leafwood/io/csv.hpp"
#include "leafwood/io/ply.hpp"

namespace leafwood::io {

enum class FileFormat { ply, csv };

inline FileFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "csv" || ext == "txt") return FileFormat::csv;
  return FileFormat::ply;
}

inline PointCloud read_point_file(const std::string& path, FileFormat format) {
  return format == FileFormat::ply ? read_ply(path) : read_csv(path);
}

inline PointCloud read_point_file(const std::string& path) {
  return read_point_file(path, format_from_path(path));
}

inline void write_point_file(const PointCloud& cloud, const std::string& path,
                             FileFormat format, bool binary_ply = true) {
  if (format == FileFormat::ply)
    write_ply(cloud, path, binary_ply);
  else
    write_csv(cloud, path);
}

inline void write_point_file(const PointCloud& cloud, const std::string& path) {
  write_point_file(cloud, path, format_from_path(path));
}

}  // namespace leafwood::io
