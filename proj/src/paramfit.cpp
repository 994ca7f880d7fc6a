#include "mflow/paramfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mflow {

PcaFrame pca_frame(std::span<const Vec3> points) {
  require(points.size() >= 3, ErrorKind::DegeneratePatch, "PCA frame needs at least 3 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 C = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    C += d * d.transpose();
  }
  C /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(C);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  require(lambda(2) > 0.0 && lambda(1) > 1e-12 * lambda(2), ErrorKind::DegeneratePatch,
          "covariance is rank deficient (collinear points)");

  PcaFrame f;
  f.mean = mean;
  f.rotation.col(0) = eig.eigenvectors().col(2);
  f.rotation.col(1) = eig.eigenvectors().col(1);
  f.rotation.col(2) = eig.eigenvectors().col(0);
  if (f.rotation.determinant() < 0.0) f.rotation.col(2) *= -1.0;
  f.eigenvalues = Vec3(lambda(2), lambda(1), lambda(0));
  return f;
}

namespace {

bool min_max_normalize(std::vector<Vec2>& q) {
  Vec2 lo = q.front(), hi = q.front();
  double scale = 0.0;
  for (const auto& x : q) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
    scale = std::max(scale, x.cwiseAbs().maxCoeff());
  }
  const Vec2 width = hi - lo;
  const double floor = 1e-14 * std::max(scale, 1e-300);
  if (!(width.x() > floor) || !(width.y() > floor)) return false;
  for (auto& x : q) {
    x = Vec2((x.x() - lo.x()) / width.x(), (x.y() - lo.y()) / width.y());
    // Guard against round-off pushing a value a hair outside [0,1].
    x = x.cwiseMax(0.0).cwiseMin(1.0);
  }
  return true;
}

}  // namespace

std::vector<Vec2> project_and_normalize(std::span<const Vec3> points, const PcaFrame& frame) {
  require(!points.empty(), ErrorKind::DegenerateChart, "no points to project");
  std::vector<Vec2> q;
  q.reserve(points.size());
  const Mat3 Rt = frame.rotation.transpose();
  for (const auto& p : points) {
    const Vec3 local = Rt * (p - frame.mean);
    q.emplace_back(local.x(), local.y());
  }
  require(min_max_normalize(q), ErrorKind::DegenerateChart, "projected points have a zero-width axis");
  return q;
}

std::vector<double> chord_length_params(std::span<const Vec3> sequence, double alpha) {
  require(sequence.size() >= 2, ErrorKind::NotEnoughPoints, "need at least two points");
  std::vector<double> chords(sequence.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k < sequence.size(); ++k) {
    const double d = (sequence[k] - sequence[k - 1]).norm();
    require(d > 0.0, ErrorKind::ZeroChord, "repeated consecutive points at index " + std::to_string(k));
    chords[k] = std::pow(d, alpha);
    total += chords[k];
  }
  std::vector<double> t(sequence.size(), 0.0);
  for (std::size_t k = 1; k < sequence.size(); ++k) t[k] = t[k - 1] + chords[k] / total;
  t.back() = 1.0;
  return t;
}

SplineSpace open_uniform_space(int rows, int cols, int degree_u, int degree_v) {
  return SplineSpace{make_open_uniform_knots(rows, degree_u), make_open_uniform_knots(cols, degree_v)};
}

Eigen::MatrixXd assemble_matrix(std::span<const Vec2> params, const KnotVector& ku, const KnotVector& kv) {
  const int m = ku.num_ctrl(), n = kv.num_ctrl();
  const int p = ku.degree(), q = kv.degree();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(params.size()), m * n);
  for (std::size_t r = 0; r < params.size(); ++r) {
    const double u = params[r].x(), v = params[r].y();
    const int su = ku.find_span(u), sv = kv.find_span(v);
    const auto Nu = basis_functions(ku, su, u);
    const auto Nv = basis_functions(kv, sv, v);
    for (int a = 0; a <= p; ++a) {
      for (int b = 0; b <= q; ++b) {
        M(static_cast<Eigen::Index>(r), (su - p + a) * n + (sv - q + b)) = Nu[a] * Nv[b];
      }
    }
  }
  return M;
}

std::vector<Vec2> rotate_normalize(std::span<const Vec2> params, double omega) {
  const double c = std::cos(omega), s = std::sin(omega);
  std::vector<Vec2> q;
  q.reserve(params.size());
  for (const auto& x : params) q.emplace_back(c * x.x() - s * x.y(), s * x.x() + c * x.y());
  if (q.empty() || !min_max_normalize(q)) return {};
  return q;
}

namespace {

// Descending singular values. Tall, well-conditioned matrices go through
// the Gram matrix, which loses about kappa^2 * eps relative accuracy in
// sigma_min; anything worse than kappa ~ 1e6 gets a full SVD.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& M) {
  if (M.rows() >= M.cols()) {
    const Eigen::MatrixXd gram = M.transpose() * M;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (ev(0) > 1e-12 * ev(ev.size() - 1)) return ev.reverse().cwiseSqrt();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues();
}

}  // namespace

double condition_number(const Eigen::MatrixXd& M) {
  const auto sv = singular_values(M);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

const char* to_string(SolveMode mode) {
  return mode == SolveMode::ExactSquare ? "exact-square" : "least-squares";
}

ConditionSearchResult condition_search(std::span<const Vec2> params, const SplineSpace& space,
                                       int num_candidates, double sigma_tol_rel) {
  require(num_candidates >= 1, ErrorKind::InvalidArgument, "need at least one rotation candidate");
  const bool square = static_cast<int>(params.size()) == space.size();

  ConditionSearchResult best;
  best.report.kappa = std::numeric_limits<double>::infinity();
  best.report.kappa_at_zero = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int k = 0; k < num_candidates; ++k) {
    const double omega = std::numbers::pi * k / num_candidates;
    auto q = rotate_normalize(params, omega);
    if (q.empty()) continue;
    const auto sv = singular_values(assemble_matrix(q, space.knots_u, space.knots_v));
    const double smax = sv(0);
    const double smin = sv(std::min<Eigen::Index>(sv.size(), static_cast<Eigen::Index>(params.size())) - 1);
    const double kappa = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (k == 0) best.report.kappa_at_zero = kappa;
    if (!found || kappa < best.report.kappa) {
      found = true;
      best.params = std::move(q);
      best.report.omega_star = omega;
      best.report.kappa = kappa;
      best.report.sigma_min = smin;
      best.report.sigma_max = smax;
    }
  }
  require(found, ErrorKind::DegenerateChart, "every rotation candidate collapses an axis");
  // Rectangular systems have fewer singular values than rows; a row-deficient
  // count is flagged through mode rather than kappa.
  const bool well_posed = best.report.sigma_min >= sigma_tol_rel * best.report.sigma_max;
  best.report.mode = (square && well_posed) ? SolveMode::ExactSquare : SolveMode::LeastSquares;
  return best;
}

namespace {

double max_residual(const BSplineSurface& s, std::span<const Vec3> points, std::span<const Vec2> params) {
  double r = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    r = std::max(r, (points[k] - surface_eval(s, params[k].x(), params[k].y())).norm());
  }
  return r;
}

std::vector<Vec3> to_ctrl(const Eigen::MatrixXd& P) {
  std::vector<Vec3> ctrl(static_cast<std::size_t>(P.rows()));
  for (Eigen::Index k = 0; k < P.rows(); ++k) ctrl[static_cast<std::size_t>(k)] = P.row(k).transpose();
  return ctrl;
}

Eigen::MatrixXd to_matrix(std::span<const Vec3> points) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t k = 0; k < points.size(); ++k) X.row(static_cast<Eigen::Index>(k)) = points[k].transpose();
  return X;
}

}  // namespace

FitResult fit_patch(std::span<const Vec3> points, std::span<const Vec2> params, const SplineSpace& space,
                    SolveMode mode, const FitOptions& options) {
  require(points.size() == params.size(), ErrorKind::InvalidArgument, "points/params size mismatch");
  const int N = static_cast<int>(points.size());
  const Eigen::MatrixXd X = to_matrix(points);
  const int p = space.knots_u.degree(), q = space.knots_v.degree();

  if (mode == SolveMode::ExactSquare) {
    require(N == space.size(), ErrorKind::InvalidDimension,
            "square mode needs N = rows*cols (" + std::to_string(N) + " vs " + std::to_string(space.size()) + ")");
    const Eigen::MatrixXd M = assemble_matrix(params, space.knots_u, space.knots_v);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) >= options.sigma_tol_rel * sv(0)) {
      BSplineSurface s(space.knots_u, space.knots_v, to_ctrl(svd.solve(X)));
      const double res = max_residual(s, points, params);
      return FitResult{std::move(s), res, SolveMode::ExactSquare, sv(sv.size() - 1), sv(0)};
    }
  }

  // Least squares, shrinking the grid until the system has full column rank.
  int rows = space.rows(), cols = space.cols();
  if (rows * cols > N * options.ls_ratio) {
    const int side = std::max({p + 1, q + 1, static_cast<int>(std::floor(std::sqrt(N * options.ls_ratio)))});
    rows = std::min(rows, side);
    cols = std::min(cols, side);
  }
  while (true) {
    require(rows * cols <= N, ErrorKind::PatchFit,
            "not enough points (" + std::to_string(N) + ") for a least-squares fit");
    const SplineSpace reduced = (rows == space.rows() && cols == space.cols())
                                    ? space
                                    : open_uniform_space(rows, cols, p, q);
    const Eigen::MatrixXd M = assemble_matrix(params, reduced.knots_u, reduced.knots_v);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin >= options.rank_tol_rel * sv(0)) {
      BSplineSurface s(reduced.knots_u, reduced.knots_v, to_ctrl(svd.solve(X)));
      const double res = max_residual(s, points, params);
      return FitResult{std::move(s), res, SolveMode::LeastSquares, smin, sv(0)};
    }
    if (rows <= p + 1 && cols <= q + 1) break;
    rows = std::max(p + 1, rows - 1);
    cols = std::max(q + 1, cols - 1);
  }
  throw Error(ErrorKind::PatchFit, "least-squares system is rank deficient at the minimal grid");
}

SplineSpace grid_for_points(int num_points, int degree, const FitOptions& options, SolveMode& mode) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(num_points))));
  if (side * side == num_points && side >= degree + 1) {
    mode = SolveMode::ExactSquare;
    return open_uniform_space(side, side, degree, degree);
  }
  mode = SolveMode::LeastSquares;
  const int fill = static_cast<int>(std::floor(std::sqrt(num_points * options.ls_ratio)));
  const int ls_side = std::max(degree + 1, std::min(options.max_side, fill));
  return open_uniform_space(ls_side, ls_side, degree, degree);
}

LocalFit fit_local_patch(std::span<const Vec3> points, const LocalFitConfig& cfg) {
  const int N = static_cast<int>(points.size());
  require(N >= (cfg.degree + 1) * (cfg.degree + 1), ErrorKind::NotEnoughPoints,
          "patch has " + std::to_string(N) + " points, fewer than (degree+1)^2");
  PcaFrame frame = pca_frame(points);
  const auto base = project_and_normalize(points, frame);

  SolveMode mode;
  const SplineSpace space = grid_for_points(N, cfg.degree, cfg.fit, mode);
  auto search = condition_search(base, space, cfg.omega_candidates, cfg.fit.sigma_tol_rel);
  FitResult fit = fit_patch(points, search.params, space, search.report.mode, cfg.fit);
  search.report.mode = fit.mode;
  return LocalFit{frame, std::move(search.params), std::move(fit.surface), search.report, fit.residual};
}

}  // namespace mflow
