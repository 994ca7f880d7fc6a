#include "mflow/adapt.hpp"

#include "mflow/log.hpp"
#include "mflow/paramfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <tuple>
#include <utility>

namespace mflow {

void RefineConfig::validate() const {
  require(eps_tol.value > 0.0 && tau.value > 0.0, ErrorKind::InvalidArgument, "tolerances must be positive");
  require(max_refine_iters >= 0 && max_gs_sweeps >= 0 && max_density_iters >= 0, ErrorKind::InvalidArgument,
          "iteration caps must be nonnegative");
  if (d_min > 0.0 && d_max > 0.0) {
    require(d_min < d_max, ErrorKind::InvalidArgument, "d_min must be smaller than d_max");
  }
}

GrevilleDeviation greville_deviation(const BSplineSurface& s) {
  const auto gu = greville_abscissae(s.knots_u());
  const auto gv = greville_abscissae(s.knots_v());
  GrevilleDeviation best;
  best.eps = -1.0;
  for (int i = 0; i < s.rows(); ++i) {
    for (int j = 0; j < s.cols(); ++j) {
      const double d = (surface_eval(s, gu[i], gv[j]) - s.at(i, j)).norm();
      if (d > best.eps) best = {d, i, j, gu[i], gv[j]};
    }
  }
  return best;
}

namespace {

// Where to put a knot aimed at `target`: the target itself when admissible,
// otherwise the midpoint of its span. Empty when neither works.
std::optional<double> admissible_knot(const KnotVector& kv, double target) {
  auto ok = [&](double x) {
    return x > kv.domain_begin() && x < kv.domain_end() && kv.multiplicity(x) + 1 <= kv.degree();
  };
  if (ok(target)) return target;
  const int span = kv.find_span(std::clamp(target, kv.domain_begin(), kv.domain_end()));
  const double mid = 0.5 * (kv[span] + kv[span + 1]);
  if (kv[span + 1] > kv[span] && ok(mid)) return mid;
  return std::nullopt;
}

int nearest_index(const std::vector<double>& values, double x) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (std::abs(values[k] - x) < std::abs(values[best] - x)) best = k;
  }
  return best;
}

}  // namespace

RefineResult refine_until_tolerance(const BSplineSurface& s, double eps_tol, int max_iters) {
  require(eps_tol > 0.0, ErrorKind::InvalidArgument, "eps_tol must be positive");
  RefineResult out{s, {}, 0, 0.0, false};
  for (;;) {
    const auto dev = greville_deviation(out.surface);
    out.eps = dev.eps;
    if (dev.eps <= eps_tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= max_iters) break;

    const auto knot_u = admissible_knot(out.surface.knots_u(), dev.u);
    const auto knot_v = admissible_knot(out.surface.knots_v(), dev.v);
    if (!knot_u && !knot_v) break;
    if (knot_u) out.surface = insert_knot(out.surface, Direction::U, *knot_u);
    if (knot_v) out.surface = insert_knot(out.surface, Direction::V, *knot_v);
    ++out.iterations;

    // New data points along the Greville row/column tied to the new knots,
    // one per added degree of freedom.
    const auto gu = greville_abscissae(out.surface.knots_u());
    const auto gv = greville_abscissae(out.surface.knots_v());
    const int inew = knot_u ? nearest_index(gu, *knot_u) : -1;
    const int jnew = knot_v ? nearest_index(gv, *knot_v) : -1;
    auto emit = [&](int i, int j) {
      out.new_points.push_back({surface_eval(out.surface, gu[i], gv[j]), Vec2(gu[i], gv[j])});
    };
    if (inew >= 0) {
      for (int j = 0; j < static_cast<int>(gv.size()); ++j) emit(inew, j);
    }
    if (jnew >= 0) {
      for (int i = 0; i < static_cast<int>(gu.size()); ++i) {
        if (i != inew) emit(i, jnew);
      }
    }
  }
  return out;
}

double interp_error(const BSplineSurface& s, std::span<const Vec3> points, std::span<const Vec2> params) {
  require(points.size() == params.size(), ErrorKind::InvalidArgument, "points/params size mismatch");
  double err = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    err = std::max(err, (points[k] - surface_eval(s, params[k].x(), params[k].y())).norm());
  }
  return err;
}

namespace {

// Local basis weights of each data point, grouped per control point.
struct Influence {
  struct Entry {
    int point;
    double w;
  };
  std::vector<std::vector<Entry>> per_ctrl;  // index i*n + j

  Influence(const BSplineSurface& s, std::span<const Vec2> params) : per_ctrl(s.ctrl().size()) {
    const int p = s.degree_u(), q = s.degree_v(), n = s.cols();
    for (int l = 0; l < static_cast<int>(params.size()); ++l) {
      const double u = params[l].x(), v = params[l].y();
      const int su = s.knots_u().find_span(u), sv = s.knots_v().find_span(v);
      const auto Nu = basis_functions(s.knots_u(), su, u);
      const auto Nv = basis_functions(s.knots_v(), sv, v);
      for (int a = 0; a <= p; ++a) {
        for (int b = 0; b <= q; ++b) {
          const double w = Nu[a] * Nv[b];
          if (w != 0.0) per_ctrl[(su - p + a) * n + (sv - q + b)].push_back({l, w});
        }
      }
    }
  }
};

std::vector<Vec3> residuals(const BSplineSurface& s, std::span<const Vec3> points, std::span<const Vec2> params) {
  std::vector<Vec3> r(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) r[k] = points[k] - surface_eval(s, params[k].x(), params[k].y());
  return r;
}

double sum_sq(const std::vector<Vec3>& r) {
  double acc = 0.0;
  for (const auto& x : r) acc += x.squaredNorm();
  return acc;
}

double max_norm(const std::vector<Vec3>& r) {
  double acc = 0.0;
  for (const auto& x : r) acc = std::max(acc, x.norm());
  return acc;
}

}  // namespace

double default_descent_step(const BSplineSurface& s, std::span<const Vec2> params) {
  const Influence inf(s, params);
  double worst = 0.0;
  for (const auto& entries : inf.per_ctrl) {
    double acc = 0.0;
    for (const auto& e : entries) acc += e.w * e.w;
    worst = std::max(worst, acc);
  }
  return worst > 0.0 ? 1.0 / (2.0 * worst) : 0.5;
}

GaussSeidelResult gauss_seidel_optimize(const BSplineSurface& s, std::span<const Vec3> points,
                                        std::span<const Vec2> params, double tau, double alpha,
                                        int max_sweeps) {
  require(points.size() == params.size(), ErrorKind::InvalidArgument, "points/params size mismatch");
  require(tau > 0.0, ErrorKind::InvalidArgument, "tau must be positive");
  const Influence inf(s, params);
  if (!(alpha > 0.0)) alpha = default_descent_step(s, params);

  GaussSeidelResult out{s, 0.0, 0, false, alpha, {}};
  BSplineSurface current = s;
  auto r = residuals(current, points, params);
  double obj = sum_sq(r);
  double err = max_norm(r);
  out.objective.push_back(obj);

  BSplineSurface best = current;
  double best_obj = obj, best_err = err;
  int rising = 0;

  while (err > tau && out.sweeps < max_sweeps) {
    for (std::size_t c = 0; c < inf.per_ctrl.size(); ++c) {
      Vec3 grad = Vec3::Zero();
      for (const auto& e : inf.per_ctrl[c]) grad -= 2.0 * e.w * r[e.point];
      const Vec3 delta = -alpha * grad;
      current.ctrl()[c] += delta;
      for (const auto& e : inf.per_ctrl[c]) r[e.point] -= e.w * delta;
    }
    ++out.sweeps;
    r = residuals(current, points, params);
    const double next = sum_sq(r);
    err = max_norm(r);
    out.objective.push_back(next);
    rising = next > obj ? rising + 1 : 0;
    obj = next;
    if (obj < best_obj) {
      best = current;
      best_obj = obj;
      best_err = err;
    }
    if (rising >= 2) {
      alpha *= 0.5;
      rising = 0;
      current = best;
      r = residuals(current, points, params);
      obj = best_obj;
      err = best_err;
      if (alpha < 1e-12) break;
    }
  }
  if (err <= tau && err < best_err) {
    best = current;
    best_err = err;
  }
  out.surface = std::move(best);
  out.error = best_err;
  out.alpha = alpha;
  out.converged = best_err <= tau;
  return out;
}

Eigen::MatrixXd least_squares_projector(const BSplineSurface& s, std::span<const Vec2> params,
                                        double rank_tol_rel) {
  const int nctrl = static_cast<int>(s.ctrl().size());
  if (static_cast<int>(params.size()) < nctrl) return {};
  const Eigen::MatrixXd M = assemble_matrix(params, s.knots_u(), s.knots_v());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) >= rank_tol_rel * sv(0))) return {};
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

BSplineSurface least_squares_project(const BSplineSurface& s, const Eigen::MatrixXd& projector,
                                     std::span<const Vec3> points) {
  require(projector.rows() == static_cast<Eigen::Index>(s.ctrl().size()) &&
              projector.cols() == static_cast<Eigen::Index>(points.size()),
          ErrorKind::InvalidDimension, "projector does not match the surface and data");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t k = 0; k < points.size(); ++k) X.row(static_cast<Eigen::Index>(k)) = points[k].transpose();
  const Eigen::MatrixXd P = projector * X;
  BSplineSurface out = s;
  for (Eigen::Index c = 0; c < P.rows(); ++c) out.ctrl()[static_cast<std::size_t>(c)] = P.row(c).transpose();
  return out;
}

DensityResult manage_density(const BSplineSurface& s, std::span<const Vec2> core_params, double d_min,
                             double d_max, int max_iters, std::span<const Vec2> ring_params) {
  require(d_min > 0.0 && d_min < d_max, ErrorKind::InvalidArgument, "need 0 < d_min < d_max");

  struct Item {
    int origin;  // index into core_params, or -1 for an inserted point
    Vec2 param;
    Vec3 image;
  };
  std::vector<Item> items;
  items.reserve(core_params.size());
  for (int k = 0; k < static_cast<int>(core_params.size()); ++k) {
    items.push_back({k, core_params[k], surface_eval(s, core_params[k].x(), core_params[k].y())});
  }

  std::vector<Vec3> ring;
  ring.reserve(ring_params.size());
  for (const auto& q : ring_params) ring.push_back(surface_eval(s, q.x(), q.y()));

  DensityResult out;
  std::vector<int> removed_origin;
  for (;;) {
    const int n = static_cast<int>(items.size());
    std::vector<int> nn(n, -1);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        const double d = (items[a].image - items[b].image).norm();
        if (d < dist[a]) {
          dist[a] = d;
          nn[a] = b;
        }
      }
    }
    // Gaps are judged against the ring as well, so a point on the rim of
    // the core is not mistaken for an isolated one.
    std::vector<double> reach = dist;
    for (int a = 0; a < n; ++a) {
      for (const auto& r : ring) reach[a] = std::min(reach[a], (items[a].image - r).norm());
    }
    bool ok = true;
    for (int a = 0; a < n; ++a) {
      if (nn[a] >= 0 && (dist[a] < d_min || reach[a] > d_max)) ok = false;
    }
    if (ok) {
      out.satisfied = true;
      break;
    }
    if (out.iterations >= max_iters) break;
    ++out.iterations;

    // Items are kept in order, originals before insertions, so a smaller
    // position means a lower index.
    std::vector<std::tuple<double, int, int>> close;
    for (int a = 0; a < n; ++a) {
      if (nn[a] >= 0 && dist[a] < d_min) close.emplace_back(dist[a], std::min(a, nn[a]), std::max(a, nn[a]));
    }
    std::sort(close.begin(), close.end());
    if (!close.empty()) {
      std::vector<char> drop(n, 0);
      for (const auto& [d, lo, hi] : close) {
        if (drop[lo] || drop[hi]) continue;
        drop[hi] = 1;
      }
      std::vector<Item> next;
      for (int a = 0; a < n; ++a) {
        if (!drop[a]) {
          next.push_back(items[a]);
        } else if (items[a].origin >= 0) {
          removed_origin.push_back(items[a].origin);
        }
      }
      items = std::move(next);
      continue;
    }

    std::set<std::pair<int, int>> gaps;
    for (int a = 0; a < n; ++a) {
      if (nn[a] >= 0 && reach[a] > d_max) gaps.insert({std::min(a, nn[a]), std::max(a, nn[a])});
    }
    for (const auto& [a, b] : gaps) {
      const Vec2 mid = 0.5 * (items[a].param + items[b].param);
      items.push_back({-1, mid, surface_eval(s, mid.x(), mid.y())});
    }
  }

  for (const auto& it : items) {
    if (it.origin >= 0) {
      out.kept.push_back(it.origin);
    } else {
      out.inserted.push_back({it.image, it.param});
    }
  }
  std::sort(out.kept.begin(), out.kept.end());
  std::sort(removed_origin.begin(), removed_origin.end());
  out.removed = std::move(removed_origin);
  if (!out.satisfied) log::warn("density management stopped at the iteration cap");
  return out;
}

}  // namespace mflow
