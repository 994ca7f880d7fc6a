#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mflow/paramfit.hpp"
#include "mflow/spline.hpp"

namespace test {

using mflow::BSplineSurface;
using mflow::KnotVector;
using mflow::Vec2;
using mflow::Vec3;

// Textbook Cox-de Boor recursion with 0/0 = 0; the right end of the domain
// belongs to the last nonempty span.
inline double cox_de_boor(const std::vector<double>& t, int i, int p, double u) {
  if (p == 0) {
    const double end = t.back();
    if (u == end) {
      int last = static_cast<int>(t.size()) - 2;
      while (last > 0 && t[last] >= t[last + 1]) --last;
      return i == last ? 1.0 : 0.0;
    }
    return (t[i] <= u && u < t[i + 1]) ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (t[i + p] > t[i]) a = (u - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, u);
  if (t[i + p + 1] > t[i + 1]) b = (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, u);
  return a + b;
}

// Open knot vector on [0,1] with `interior` random interior knots, each of
// multiplicity at most the degree.
inline KnotVector random_knots(std::mt19937_64& rng, int degree, int interior) {
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  std::vector<double> inner;
  while (static_cast<int>(inner.size()) < interior) {
    const double x = std::round(uni(rng) * 40.0) / 40.0;  // coarse values so repeats occur
    if (std::count(inner.begin(), inner.end(), x) < degree) inner.push_back(x);
  }
  std::sort(inner.begin(), inner.end());
  std::vector<double> k(degree + 1, 0.0);
  k.insert(k.end(), inner.begin(), inner.end());
  k.insert(k.end(), degree + 1, 1.0);
  return KnotVector(k, degree);
}

inline BSplineSurface random_surface(std::mt19937_64& rng, int rows, int cols, int p, int q) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> ctrl(static_cast<std::size_t>(rows) * cols);
  for (auto& c : ctrl) c = Vec3(uni(rng), uni(rng), uni(rng));
  return BSplineSurface(mflow::make_open_uniform_knots(rows, p), mflow::make_open_uniform_knots(cols, q), ctrl);
}

// Net positioned on a grid in [0,1]^2 with the given heights (row-major).
inline BSplineSurface height_surface(int rows, int cols, int p, int q, const std::vector<double>& z) {
  const auto ku = mflow::make_open_uniform_knots(rows, p);
  const auto kv = mflow::make_open_uniform_knots(cols, q);
  const auto gu = mflow::greville_abscissae(ku);
  const auto gv = mflow::greville_abscissae(kv);
  std::vector<Vec3> ctrl;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) ctrl.emplace_back(gu[i], gv[j], z.empty() ? 0.0 : z[i * cols + j]);
  return BSplineSurface(ku, kv, ctrl);
}

inline BSplineSurface plane_surface(int rows, int cols, int p = 3) { return height_surface(rows, cols, p, p, {}); }

// Bicubic Bezier patch over [0,1]^2 with one interior control point raised by h.
inline BSplineSurface lifted_bezier(double h) {
  std::vector<double> z(16, 0.0);
  z[1 * 4 + 1] = h;
  return height_surface(4, 4, 3, 3, z);
}

// Quasi-uniform points on a spherical cap around +z.
inline std::vector<Vec3> sphere_cap(double r, double half_angle, int rings) {
  std::vector<Vec3> pts{Vec3(0, 0, r)};
  for (int k = 1; k <= rings; ++k) {
    const double th = half_angle * k / rings;
    const int m = 6 * k;
    for (int a = 0; a < m; ++a) {
      const double ph = 2.0 * M_PI * a / m + 0.3 * k;
      pts.emplace_back(r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th));
    }
  }
  return pts;
}

}  // namespace test
