#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace leafwood {

inline constexpr const char* kVersion = "0.1.0";

/// Raised when an input file or data array violates the expected schema or
/// value domain. CLI maps this family to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Parse failure tied to a concrete location in a file.
struct ParseError : DataError {
  explicit ParseError(const std::string& what) : DataError(what) {}
};

/// Filesystem-level failure (missing file, unwritable path, short read).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Binary class of a point. Wood is the positive/target class.
enum class ClassLabel : std::uint8_t { leaf = 0, wood = 1 };

inline constexpr std::uint8_t kLabelUnknown = 255;  // sample store sentinel

struct Vec3f {
  float x = 0.0f, y = 0.0f, z = 0.0f;

  Vec3f() = default;
  Vec3f(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}

  Vec3f operator+(const Vec3f& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3f operator-(const Vec3f& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3f operator*(float s) const { return {x * s, y * s, z * s}; }
  Vec3f& operator+=(const Vec3f& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  float dot(const Vec3f& o) const { return x * o.x + y * o.y + z * o.z; }
  float squared_norm() const { return dot(*this); }
  float norm() const { return std::sqrt(squared_norm()); }
  float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline float squared_distance(const Vec3f& a, const Vec3f& b) {
  return (a - b).squared_norm();
}

inline double distance(const Vec3f& a, const Vec3f& b) {
  const double dx = double(a.x) - double(b.x);
  const double dy = double(a.y) - double(b.y);
  const double dz = double(a.z) - double(b.z);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace leafwood
