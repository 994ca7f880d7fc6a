#pragma once

#include "mflow/common.hpp"
#include "mflow/spline.hpp"

namespace mflow {

struct FundamentalForms {
  double E, F, G;
  double L, M, N;
  Vec3 normal;  // (S_u x S_v) / |S_u x S_v|
};

// Mean curvature is stored as the average of the principal curvatures,
// H = (EN - 2FM + GL) / (2(EG - F^2)), signed relative to `normal`. With an
// outward normal a sphere of radius r has H = -1/r and H*n points inward.
struct GeometricSample {
  Vec3 position;
  Vec3 normal;
  double E, F, G;
  double L, M, N;
  double mean_curvature;
  Vec2 param;

  // The mean-curvature vector 2H*n; independent of the orientation sign.
  Vec3 curvature_vector() const { return 2.0 * mean_curvature * normal; }
};

FundamentalForms fundamental_forms(const SurfacePartials& d);

double mean_curvature(double E, double F, double G, double L, double M, double N);

// orientation_sign must be +1 or -1; the normal, L, M, N and H all flip together.
GeometricSample sample_geometry(const BSplineSurface& s, double u, double v, int orientation_sign);

}  // namespace mflow
