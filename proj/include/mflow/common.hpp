#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorKind {
  InvalidArgument,
  InvalidDimension,
  IndexOutOfRange,
  DomainError,
  MultiplicityExceeded,
  DegenerateTangent,
  DegenerateMetric,
  DegeneratePatch,
  DegenerateChart,
  ZeroChord,
  PatchFit,
  MissingField,
  NotEnoughPoints,
  Usage,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can tell usage problems from numerical breakdown.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

// Diagonal of the axis-aligned bounding box.
double bbox_diagonal(const std::vector<Vec3>& points);

}  // namespace mflow
