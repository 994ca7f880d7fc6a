#include "mflow/diffgeo.hpp"

#include <cmath>

namespace mflow {

namespace {
constexpr double kDegenerateTol = 1e-12;
}

FundamentalForms fundamental_forms(const SurfacePartials& d) {
  const Vec3 cross = d.Su.cross(d.Sv);
  const double cn = cross.norm();
  require(cn > kDegenerateTol * d.Su.norm() * d.Sv.norm() && cn > 0.0, ErrorKind::DegenerateTangent,
          "S_u and S_v are (nearly) parallel");
  FundamentalForms f;
  f.normal = cross / cn;
  f.E = d.Su.dot(d.Su);
  f.F = d.Su.dot(d.Sv);
  f.G = d.Sv.dot(d.Sv);
  f.L = d.Suu.dot(f.normal);
  f.M = d.Suv.dot(f.normal);
  f.N = d.Svv.dot(f.normal);
  return f;
}

double mean_curvature(double E, double F, double G, double L, double M, double N) {
  const double det = E * G - F * F;
  require(E > 0.0 && G > 0.0 && det > kDegenerateTol * E * G, ErrorKind::DegenerateMetric,
          "first fundamental form is not positive definite");
  return (E * N - 2.0 * F * M + G * L) / (2.0 * det);
}

GeometricSample sample_geometry(const BSplineSurface& s, double u, double v, int orientation_sign) {
  require(orientation_sign == 1 || orientation_sign == -1, ErrorKind::InvalidArgument,
          "orientation sign must be +1 or -1");
  const SurfacePartials d = surface_partials(s, u, v);
  FundamentalForms f = fundamental_forms(d);
  const double sgn = orientation_sign;
  GeometricSample g;
  g.position = d.S;
  g.normal = sgn * f.normal;
  g.E = f.E;
  g.F = f.F;
  g.G = f.G;
  g.L = sgn * f.L;
  g.M = sgn * f.M;
  g.N = sgn * f.N;
  g.mean_curvature = mean_curvature(g.E, g.F, g.G, g.L, g.M, g.N);
  g.param = Vec2(u, v);
  return g;
}

}  // namespace mflow
