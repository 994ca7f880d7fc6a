#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mflow/common.hpp"
#include "mflow/spline.hpp"

namespace mflow {

// A length threshold given either absolutely or as a fraction of a patch's
// bounding-box diagonal.
struct LengthTol {
  double value = 0.0;
  bool relative = true;

  double resolve(double diagonal) const { return relative ? value * diagonal : value; }
  static LengthTol absolute(double v) { return {v, false}; }
  static LengthTol fraction(double v) { return {v, true}; }
};

struct RefineConfig {
  LengthTol eps_tol = LengthTol::fraction(0.02);
  LengthTol tau = LengthTol::fraction(0.005);
  double alpha = 0.0;  // <= 0 selects the per-patch default step
  int max_refine_iters = 10;
  int max_gs_sweeps = 50;
  double d_min = 0.0;  // <= 0: derived from the initial cloud spacing
  double d_max = 0.0;
  int max_density_iters = 10;

  void validate() const;
};

struct GrevilleDeviation {
  double eps = 0.0;
  int i = 0, j = 0;
  double u = 0.0, v = 0.0;
};

// max_{i,j} |S(u_i^G, v_j^G) - P_{i,j}|; ties go to the smallest (i, j).
GrevilleDeviation greville_deviation(const BSplineSurface& s);

struct SynthesizedPoint {
  Vec3 position;
  Vec2 param;
};

struct RefineResult {
  BSplineSurface surface;
  std::vector<SynthesizedPoint> new_points;
  int iterations = 0;
  double eps = 0.0;
  bool converged = false;
};

// Inserts knots at the Greville pair of largest deviation until the
// deviation drops to eps_tol. Each insertion adds data points on the refined
// surface along the new control row and column.
RefineResult refine_until_tolerance(const BSplineSurface& s, double eps_tol, int max_iters);

double interp_error(const BSplineSurface& s, std::span<const Vec3> points, std::span<const Vec2> params);

// Largest step that still guarantees per-control-point descent:
// 1 / (2 max_{i,j} sum_l (phi_i(u_l) phi_j(v_l))^2).
double default_descent_step(const BSplineSurface& s, std::span<const Vec2> params);

struct GaussSeidelResult {
  BSplineSurface surface;
  double error = 0.0;  // interp_error after the last sweep
  int sweeps = 0;
  bool converged = false;
  double alpha = 0.0;
  std::vector<double> objective;  // sum of squared residuals, before sweep 1 then after each sweep
};

// Sequential gradient sweeps over the control net in lexicographic order;
// each update sees the control points already updated in the sweep.
GaussSeidelResult gauss_seidel_optimize(const BSplineSurface& s, std::span<const Vec3> points,
                                        std::span<const Vec2> params, double tau, double alpha,
                                        int max_sweeps);

// Pseudo-inverse of the collocation matrix of `params` in the spline space of
// `s` (rows: control points, columns: data points). Empty when the system
// has fewer data points than control points or is numerically rank deficient.
Eigen::MatrixXd least_squares_projector(const BSplineSurface& s, std::span<const Vec2> params,
                                        double rank_tol_rel = 1e-8);

// Control net minimizing sum_l |x_l - S(u_l, v_l)|^2, the fixed point of
// gauss_seidel_optimize, computed in closed form from a projector.
BSplineSurface least_squares_project(const BSplineSurface& s, const Eigen::MatrixXd& projector,
                                     std::span<const Vec3> points);

struct DensityResult {
  std::vector<int> kept;                     // indices into the input core list
  std::vector<int> removed;                  // indices into the input core list
  std::vector<SynthesizedPoint> inserted;    // new points on the surface
  int iterations = 0;
  bool satisfied = false;
  bool changed() const { return !removed.empty() || !inserted.empty(); }
};

// Spacing control for one core: d_i is the surface-space distance from each
// point's image to its nearest core neighbor. Close pairs lose their higher
// index; wide gaps get a parameter-midpoint point. Points at `ring_params`
// (the patch boundary) never move but count as neighbors in the gap test.
DensityResult manage_density(const BSplineSurface& s, std::span<const Vec2> core_params, double d_min,
                             double d_max, int max_iters = 10, std::span<const Vec2> ring_params = {});

}  // namespace mflow
