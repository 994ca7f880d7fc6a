#include "mflow/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

#include "mflow/common.hpp"

namespace mflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::InvalidDimension: return "invalid dimension";
    case ErrorKind::IndexOutOfRange: return "index out of range";
    case ErrorKind::DomainError: return "parameter outside domain";
    case ErrorKind::MultiplicityExceeded: return "knot multiplicity exceeded";
    case ErrorKind::DegenerateTangent: return "degenerate tangent plane";
    case ErrorKind::DegenerateMetric: return "degenerate metric";
    case ErrorKind::DegeneratePatch: return "degenerate patch";
    case ErrorKind::DegenerateChart: return "degenerate chart";
    case ErrorKind::ZeroChord: return "zero chord";
    case ErrorKind::PatchFit: return "patch fit failure";
    case ErrorKind::MissingField: return "missing field";
    case ErrorKind::NotEnoughPoints: return "not enough points";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

double bbox_diagonal(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

namespace log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

Sink set_warning_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  return std::exchange(current_sink(), std::move(sink));
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (current_sink()) current_sink()(message);
}

}  // namespace log
}  // namespace mflow
