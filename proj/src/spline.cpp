#include "mflow/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mflow {

KnotVector::KnotVector(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
  require(degree_ >= 0, ErrorKind::InvalidDimension, "negative degree");
  require(knots_.size() >= static_cast<std::size_t>(2 * degree_ + 2), ErrorKind::InvalidDimension,
          "knot vector too short for degree " + std::to_string(degree_));
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    require(std::isfinite(knots_[k]), ErrorKind::InvalidArgument, "non-finite knot");
    if (k > 0) require(knots_[k] >= knots_[k - 1], ErrorKind::InvalidArgument, "knots must be nondecreasing");
  }
  require(domain_end() > domain_begin(), ErrorKind::InvalidArgument, "empty parameter domain");
}

int KnotVector::find_span(double u) const {
  const int n = num_ctrl();
  require(u >= domain_begin() && u <= domain_end(), ErrorKind::DomainError,
          "u = " + std::to_string(u) + " outside knot domain");
  if (u >= knots_[n]) {
    int s = n - 1;
    while (s > degree_ && knots_[s] >= knots_[s + 1]) --s;
    return s;
  }
  // upper_bound gives the first knot > u; the span starts one before it.
  auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, u);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int KnotVector::multiplicity(double u) const {
  return static_cast<int>(std::count(knots_.begin(), knots_.end(), u));
}

bool KnotVector::is_open() const {
  const int n = num_ctrl();
  for (int k = 0; k <= degree_; ++k) {
    if (knots_[k] != knots_[0] || knots_[n + k] != knots_.back()) return false;
  }
  return true;
}

KnotVector make_open_uniform_knots(int num_ctrl, int degree) {
  require(degree >= 0, ErrorKind::InvalidDimension, "negative degree");
  require(num_ctrl >= degree + 1, ErrorKind::InvalidDimension,
          "need at least degree+1 control points, got " + std::to_string(num_ctrl));
  std::vector<double> knots;
  knots.reserve(num_ctrl + degree + 1);
  knots.insert(knots.end(), degree + 1, 0.0);
  const int segments = num_ctrl - degree;
  for (int k = 1; k < segments; ++k) knots.push_back(static_cast<double>(k) / segments);
  knots.insert(knots.end(), degree + 1, 1.0);
  return KnotVector(std::move(knots), degree);
}

std::vector<double> basis_functions(const KnotVector& kv, int span, double u) {
  const int p = kv.degree();
  std::vector<double> N(p + 1), left(p + 1), right(p + 1);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - kv[span + 1 - j];
    right[j] = kv[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  return N;
}

std::vector<std::vector<double>> basis_function_derivatives(const KnotVector& kv, int span,
                                                            double u, int max_order) {
  const int p = kv.degree();
  const int n = std::min(max_order, p);
  std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> left(p + 1), right(p + 1);
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - kv[span + 1 - j];
    right[j] = kv[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[j][r] != 0.0 ? ndu[r][j - 1] / ndu[j][r] : 0.0;
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  std::vector<std::vector<double>> ders(max_order + 1, std::vector<double>(p + 1, 0.0));
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

  std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = ndu[pk + 1][rk] != 0.0 ? a[s1][0] / ndu[pk + 1][rk] : 0.0;
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = ndu[pk + 1][rk + j] != 0.0 ? (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j] : 0.0;
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = ndu[pk + 1][r] != 0.0 ? -a[s1][k - 1] / ndu[pk + 1][r] : 0.0;
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
    factor *= (p - k);
  }
  return ders;
}

double basis_value(const KnotVector& kv, int i, double u) {
  require(i >= 0 && i < kv.num_ctrl(), ErrorKind::IndexOutOfRange,
          "basis index " + std::to_string(i) + " out of range");
  const int span = kv.find_span(u);
  const int first = span - kv.degree();
  if (i < first || i > span) return 0.0;
  return basis_functions(kv, span, u)[i - first];
}

double basis_derivative(const KnotVector& kv, int i, double u, int order) {
  require(order == 1 || order == 2, ErrorKind::InvalidArgument, "derivative order must be 1 or 2");
  require(i >= 0 && i < kv.num_ctrl(), ErrorKind::IndexOutOfRange,
          "basis index " + std::to_string(i) + " out of range");
  const int span = kv.find_span(u);
  if (order > kv.degree()) return 0.0;
  const int first = span - kv.degree();
  if (i < first || i > span) return 0.0;
  return basis_function_derivatives(kv, span, u, order)[order][i - first];
}

std::vector<double> greville_abscissae(const KnotVector& kv) {
  const int p = kv.degree();
  require(p > 0, ErrorKind::InvalidDimension, "Greville abscissae undefined for degree 0");
  std::vector<double> g(kv.num_ctrl());
  for (int i = 0; i < kv.num_ctrl(); ++i) {
    double sum = 0.0;
    for (int k = 1; k <= p; ++k) sum += kv[i + k];
    g[i] = sum / p;
  }
  return g;
}

BSplineSurface::BSplineSurface(KnotVector knots_u, KnotVector knots_v, std::vector<Vec3> ctrl)
    : ku_(std::move(knots_u)), kv_(std::move(knots_v)), ctrl_(std::move(ctrl)) {
  require(rows() >= degree_u() + 1 && cols() >= degree_v() + 1, ErrorKind::InvalidDimension,
          "control grid smaller than degree+1");
  require(ctrl_.size() == static_cast<std::size_t>(rows()) * cols(), ErrorKind::InvalidDimension,
          "control net has " + std::to_string(ctrl_.size()) + " points, expected " +
              std::to_string(rows() * cols()));
}

Vec3 surface_eval(const BSplineSurface& s, double u, double v) {
  const int p = s.degree_u(), q = s.degree_v();
  const int su = s.knots_u().find_span(u);
  const int sv = s.knots_v().find_span(v);
  const auto Nu = basis_functions(s.knots_u(), su, u);
  const auto Nv = basis_functions(s.knots_v(), sv, v);
  Vec3 out = Vec3::Zero();
  for (int a = 0; a <= p; ++a) {
    Vec3 row = Vec3::Zero();
    for (int b = 0; b <= q; ++b) row += Nv[b] * s.at(su - p + a, sv - q + b);
    out += Nu[a] * row;
  }
  return out;
}

SurfacePartials surface_partials(const BSplineSurface& s, double u, double v) {
  const int p = s.degree_u(), q = s.degree_v();
  require(p >= 2 && q >= 2, ErrorKind::InvalidDimension,
          "second partials need degree >= 2 in both directions");
  const int su = s.knots_u().find_span(u);
  const int sv = s.knots_v().find_span(v);
  const auto Du = basis_function_derivatives(s.knots_u(), su, u, 2);
  const auto Dv = basis_function_derivatives(s.knots_v(), sv, v, 2);

  SurfacePartials d{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  for (int a = 0; a <= p; ++a) {
    Vec3 c0 = Vec3::Zero(), c1 = Vec3::Zero(), c2 = Vec3::Zero();
    for (int b = 0; b <= q; ++b) {
      const Vec3& P = s.at(su - p + a, sv - q + b);
      c0 += Dv[0][b] * P;
      c1 += Dv[1][b] * P;
      c2 += Dv[2][b] * P;
    }
    d.S += Du[0][a] * c0;
    d.Su += Du[1][a] * c0;
    d.Suu += Du[2][a] * c0;
    d.Sv += Du[0][a] * c1;
    d.Suv += Du[1][a] * c1;
    d.Svv += Du[0][a] * c2;
  }
  return d;
}

namespace {

// Boehm insertion of a single knot into one control polygon.
std::vector<Vec3> insert_into_polygon(const KnotVector& kv, const std::vector<Vec3>& P, double value,
                                      int span, int mult) {
  const int p = kv.degree();
  const int n = static_cast<int>(P.size());
  std::vector<Vec3> Q(n + 1);
  for (int i = 0; i <= span - p; ++i) Q[i] = P[i];
  for (int i = span - p + 1; i <= span - mult; ++i) {
    const double alpha = (value - kv[i]) / (kv[i + p] - kv[i]);
    Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1];
  }
  for (int i = span - mult + 1; i <= n; ++i) Q[i] = P[i - 1];
  return Q;
}

}  // namespace

BSplineSurface insert_knot(const BSplineSurface& s, Direction dir, double value) {
  const KnotVector& kv = dir == Direction::U ? s.knots_u() : s.knots_v();
  require(value > kv.domain_begin() && value < kv.domain_end(), ErrorKind::DomainError,
          "inserted knot must lie strictly inside the domain");
  const int mult = kv.multiplicity(value);
  require(mult + 1 <= kv.degree(), ErrorKind::MultiplicityExceeded,
          "knot " + std::to_string(value) + " already has multiplicity " + std::to_string(mult));
  const int span = kv.find_span(value);

  std::vector<double> knots = kv.knots();
  knots.insert(knots.begin() + span + 1, value);
  KnotVector refined(std::move(knots), kv.degree());

  const int m = s.rows(), n = s.cols();
  if (dir == Direction::U) {
    std::vector<Vec3> ctrl(static_cast<std::size_t>(m + 1) * n);
    std::vector<Vec3> column(m);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) column[i] = s.at(i, j);
      const auto Q = insert_into_polygon(kv, column, value, span, mult);
      for (int i = 0; i <= m; ++i) ctrl[static_cast<std::size_t>(i) * n + j] = Q[i];
    }
    return BSplineSurface(std::move(refined), s.knots_v(), std::move(ctrl));
  }
  std::vector<Vec3> ctrl(static_cast<std::size_t>(m) * (n + 1));
  std::vector<Vec3> row(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) row[j] = s.at(i, j);
    const auto Q = insert_into_polygon(kv, row, value, span, mult);
    for (int j = 0; j <= n; ++j) ctrl[static_cast<std::size_t>(i) * (n + 1) + j] = Q[j];
  }
  return BSplineSurface(s.knots_u(), std::move(refined), std::move(ctrl));
}

}  // namespace mflow
