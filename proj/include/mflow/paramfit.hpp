#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mflow/common.hpp"
#include "mflow/spline.hpp"

namespace mflow {

// Local orthonormal frame from principal component analysis. Columns of
// `rotation` are e1, e2, e3 by decreasing covariance eigenvalue; e3 is the
// estimated surface normal and det(rotation) = +1.
struct PcaFrame {
  Vec3 mean;
  Mat3 rotation;
  Vec3 eigenvalues;  // decreasing
};

PcaFrame pca_frame(std::span<const Vec3> points);

// Rotate into the frame, drop the third coordinate, and min-max scale each
// axis to [0,1].
std::vector<Vec2> project_and_normalize(std::span<const Vec3> points, const PcaFrame& frame);

// Chord-length (alpha = 1) or centripetal (alpha = 0.5) parameters along a
// polyline; first value 0, last value 1.
std::vector<double> chord_length_params(std::span<const Vec3> sequence, double alpha);

struct SplineSpace {
  KnotVector knots_u;
  KnotVector knots_v;

  int rows() const { return knots_u.num_ctrl(); }
  int cols() const { return knots_v.num_ctrl(); }
  int size() const { return rows() * cols(); }
};

SplineSpace open_uniform_space(int rows, int cols, int degree_u, int degree_v);

// Collocation matrix: row r holds phi_i(u_r) * phi_j(v_r) in column i * cols + j.
Eigen::MatrixXd assemble_matrix(std::span<const Vec2> params, const KnotVector& ku, const KnotVector& kv);

// Rotate params by T(omega) about the origin, then min-max rescale each axis.
// Returns an empty vector when an axis collapses.
std::vector<Vec2> rotate_normalize(std::span<const Vec2> params, double omega);

// 2-norm condition number sigma_max / sigma_min (infinity when singular).
double condition_number(const Eigen::MatrixXd& M);

enum class SolveMode { ExactSquare, LeastSquares };

const char* to_string(SolveMode mode);

struct ConditioningReport {
  double omega_star = 0.0;
  double kappa = 1.0;
  double kappa_at_zero = 1.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  SolveMode mode = SolveMode::ExactSquare;
};

struct ConditionSearchResult {
  std::vector<Vec2> params;
  ConditioningReport report;
};

// Evaluates kappa_2(M(omega)) on omega_k = k*pi/K, k = 0..K-1, and keeps the
// smallest (ties resolved toward smaller omega). The spline space is never
// modified. Mode is LeastSquares when the system is not square or when
// sigma_min < sigma_tol_rel * sigma_max at the optimum.
ConditionSearchResult condition_search(std::span<const Vec2> params, const SplineSpace& space,
                                       int num_candidates, double sigma_tol_rel = 1e-8);

struct FitOptions {
  double sigma_tol_rel = 1e-3;  // square solves below this sigma_min/sigma_max switch to least squares
  double rank_tol_rel = 1e-8;   // least-squares grids below this are shrunk
  double ls_ratio = 0.4;  // reduced grid satisfies rows*cols <= N * ls_ratio
  int max_side = 6;       // least-squares nets never exceed max_side x max_side
};

struct FitResult {
  BSplineSurface surface;
  double residual;  // max_r |x_r - S(u_r, v_r)|
  SolveMode mode;
  double sigma_min;
  double sigma_max;
};

// Square mode solves M P = X; a numerically singular M falls back to least
// squares on a reduced grid. Least-squares mode minimizes |M P - X|_2.
FitResult fit_patch(std::span<const Vec3> points, std::span<const Vec2> params, const SplineSpace& space,
                    SolveMode mode, const FitOptions& options = {});

struct LocalFitConfig {
  int degree = 3;
  int omega_candidates = 16;
  FitOptions fit;
};

// Control-grid sizing for a patch with `num_points` points: a square grid
// when num_points is a perfect square >= (degree+1)^2, otherwise a reduced
// least-squares grid.
SplineSpace grid_for_points(int num_points, int degree, const FitOptions& options, SolveMode& mode);

struct LocalFit {
  PcaFrame frame;
  std::vector<Vec2> params;  // per input point, after the rotation search
  BSplineSurface surface;
  ConditioningReport report;
  double residual;
};

// The full per-patch chart pipeline: PCA frame, projection, conditioning
// search and solve.
LocalFit fit_local_patch(std::span<const Vec3> points, const LocalFitConfig& cfg);

}  // namespace mflow
