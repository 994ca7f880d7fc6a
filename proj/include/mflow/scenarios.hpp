#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "mflow/common.hpp"
#include "mflow/patching.hpp"

namespace mflow {

enum class ShapeKind { Sphere, Ellipsoid, Torus };

ShapeKind parse_shape(const std::string& name);
const char* to_string(ShapeKind kind);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  double radius = 1.0;              // sphere
  Vec3 axes = Vec3(2.0, 1.0, 1.5);  // ellipsoid semi-axes (a, b, c)
  double major = 1.0;               // torus R
  double minor = 0.3;               // torus r
  int n_points = 4890;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Fibonacci lattice, ordered from the north pole down.
PointCloud sample_sphere(int n, double r);

// Area-weighted rejection candidates thinned to n points by farthest-point
// selection, then ordered by descending z.
PointCloud sample_ellipsoid(int n, double a, double b, double c, std::uint64_t seed);

// Same construction on the torus, ordered by azimuth.
PointCloud sample_torus(int n, double R, double r, std::uint64_t seed);

PointCloud sample_shape(const ShapeSpec& shape);

// Value of the defining implicit function (0 on the surface).
double implicit_residual(const ShapeSpec& shape, const Vec3& x);

struct AnalyticReference {
  Vec3 normal;            // outward unit normal
  double mean_curvature;  // (k1 + k2) / 2, positive on convex shapes
  double k1, k2;          // principal curvatures, k1 >= k2
};

// Closed-form differential geometry of the reference shape at a surface point.
AnalyticReference analytic_reference(const ShapeSpec& shape, const Vec3& x);

// Mean distance from the points to their centroid.
double estimate_radius(const PointCloud& cloud);

enum class FieldKind { Constant, BumpOnSurface, TumorPair };

FieldKind parse_field(const std::string& name);
const char* to_string(FieldKind kind);

struct FieldProvider {
  FieldKind kind = FieldKind::Constant;
  double amplitude = 1.0;  // also the constant value
  Vec3 center = Vec3(0.0, 0.0, 1.0);  // unit direction of the bump peak
  double width = 0.5;
  double decay_time = std::numeric_limits<double>::infinity();  // t0; inf = steady
};

struct FieldValue {
  double u = 0.0;
  std::optional<double> w;
};

// Constant: amplitude. Bump: amplitude * exp(-|x/|x| - c|^2 / width^2) * exp(-t/t0).
// TumorPair: u is the bump at c, w is the negated bump at -c.
FieldValue field_value(const FieldProvider& provider, const Vec3& x, double t);

}  // namespace mflow
