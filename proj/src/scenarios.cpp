#include "mflow/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace mflow {

ShapeKind parse_shape(const std::string& name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "ellipsoid") return ShapeKind::Ellipsoid;
  if (name == "torus") return ShapeKind::Torus;
  throw Error(ErrorKind::Usage, "unknown shape '" + name + "'");
}

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Ellipsoid: return "ellipsoid";
    case ShapeKind::Torus: return "torus";
  }
  return "?";
}

void ShapeSpec::validate() const {
  require(n_points >= 4, ErrorKind::InvalidArgument, "need at least 4 points");
  switch (kind) {
    case ShapeKind::Sphere:
      require(radius > 0.0, ErrorKind::InvalidArgument, "sphere radius must be positive");
      break;
    case ShapeKind::Ellipsoid:
      require(axes.minCoeff() > 0.0, ErrorKind::InvalidArgument, "ellipsoid semi-axes must be positive");
      break;
    case ShapeKind::Torus:
      require(minor > 0.0 && major > minor, ErrorKind::InvalidArgument, "torus needs R > r > 0");
      break;
  }
}

PointCloud sample_sphere(int n, double r) {
  require(n >= 4, ErrorKind::InvalidArgument, "sphere sampling needs n >= 4");
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  PointCloud cloud;
  cloud.positions.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    Vec3 d(rho * std::cos(phi), rho * std::sin(phi), z);
    cloud.positions.push_back(r * d.normalized());
  }
  cloud.core_of.assign(n, -1);
  return cloud;
}

namespace {

// Greedy farthest-point selection of n candidates, starting at candidate 0.
std::vector<Vec3> farthest_point_thinning(const std::vector<Vec3>& cand, int n) {
  std::vector<double> d(cand.size(), std::numeric_limits<double>::infinity());
  std::vector<Vec3> out;
  out.reserve(n);
  std::size_t pick = 0;
  for (int k = 0; k < n; ++k) {
    out.push_back(cand[pick]);
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      d[c] = std::min(d[c], (cand[c] - cand[pick]).squaredNorm());
      if (d[c] > far) {
        far = d[c];
        next = c;
      }
    }
    pick = next;
  }
  return out;
}

constexpr int kOversample = 8;

}  // namespace

PointCloud sample_ellipsoid(int n, double a, double b, double c, std::uint64_t seed) {
  require(n >= 4, ErrorKind::InvalidArgument, "ellipsoid sampling needs n >= 4");
  require(a > 0.0 && b > 0.0 && c > 0.0, ErrorKind::InvalidArgument, "semi-axes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Area of the ellipsoid image of a unit-sphere patch scales with
  // abc * sqrt(dx^2/a^2 + dy^2/b^2 + dz^2/c^2).
  const double gmax = 1.0 / std::min({a, b, c});
  std::vector<Vec3> cand;
  cand.reserve(static_cast<std::size_t>(kOversample) * n);
  while (static_cast<int>(cand.size()) < kOversample * n) {
    Vec3 d(gauss(rng), gauss(rng), gauss(rng));
    if (d.squaredNorm() == 0.0) continue;
    d.normalize();
    const double g = std::sqrt(d.x() * d.x() / (a * a) + d.y() * d.y() / (b * b) + d.z() * d.z() / (c * c));
    if (unif(rng) * gmax <= g) cand.emplace_back(a * d.x(), b * d.y(), c * d.z());
  }
  auto pts = farthest_point_thinning(cand, n);
  std::stable_sort(pts.begin(), pts.end(), [](const Vec3& p, const Vec3& q) { return p.z() > q.z(); });
  PointCloud cloud;
  cloud.positions = std::move(pts);
  cloud.core_of.assign(n, -1);
  return cloud;
}

PointCloud sample_torus(int n, double R, double r, std::uint64_t seed) {
  require(n >= 4, ErrorKind::InvalidArgument, "torus sampling needs n >= 4");
  require(r > 0.0 && R > r, ErrorKind::InvalidArgument, "torus needs R > r > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec3> cand;
  cand.reserve(static_cast<std::size_t>(kOversample) * n);
  while (static_cast<int>(cand.size()) < kOversample * n) {
    const double theta = 2.0 * std::numbers::pi * unif(rng);
    const double phi = 2.0 * std::numbers::pi * unif(rng);
    if (unif(rng) * (R + r) > R + r * std::cos(theta)) continue;
    const double rho = R + r * std::cos(theta);
    cand.emplace_back(rho * std::cos(phi), rho * std::sin(phi), r * std::sin(theta));
  }
  auto pts = farthest_point_thinning(cand, n);
  std::stable_sort(pts.begin(), pts.end(), [](const Vec3& p, const Vec3& q) {
    return std::atan2(p.y(), p.x()) < std::atan2(q.y(), q.x());
  });
  PointCloud cloud;
  cloud.positions = std::move(pts);
  cloud.core_of.assign(n, -1);
  return cloud;
}

PointCloud sample_shape(const ShapeSpec& shape) {
  shape.validate();
  switch (shape.kind) {
    case ShapeKind::Sphere: return sample_sphere(shape.n_points, shape.radius);
    case ShapeKind::Ellipsoid:
      return sample_ellipsoid(shape.n_points, shape.axes.x(), shape.axes.y(), shape.axes.z(), shape.rng_seed);
    case ShapeKind::Torus: return sample_torus(shape.n_points, shape.major, shape.minor, shape.rng_seed);
  }
  return {};
}

double implicit_residual(const ShapeSpec& shape, const Vec3& x) {
  switch (shape.kind) {
    case ShapeKind::Sphere: return x.squaredNorm() / (shape.radius * shape.radius) - 1.0;
    case ShapeKind::Ellipsoid: return x.cwiseQuotient(shape.axes).squaredNorm() - 1.0;
    case ShapeKind::Torus: {
      const double rho = std::hypot(x.x(), x.y());
      return (shape.major - rho) * (shape.major - rho) + x.z() * x.z() - shape.minor * shape.minor;
    }
  }
  return 0.0;
}

namespace {

// Curvature of the level set {F = 0} from the gradient and Hessian of F,
// with the normal along grad F.
AnalyticReference implicit_curvature(const Vec3& g, const Mat3& Hm) {
  const double gn = g.norm();
  require(gn > 0.0, ErrorKind::DegenerateMetric, "vanishing implicit gradient");
  AnalyticReference ref;
  ref.normal = g / gn;
  ref.mean_curvature = (gn * gn * Hm.trace() - g.dot(Hm * g)) / (2.0 * gn * gn * gn);
  Mat3 adj;
  adj << Hm(1, 1) * Hm(2, 2) - Hm(1, 2) * Hm(2, 1), Hm(0, 2) * Hm(2, 1) - Hm(0, 1) * Hm(2, 2),
      Hm(0, 1) * Hm(1, 2) - Hm(0, 2) * Hm(1, 1), Hm(1, 2) * Hm(2, 0) - Hm(1, 0) * Hm(2, 2),
      Hm(0, 0) * Hm(2, 2) - Hm(0, 2) * Hm(2, 0), Hm(0, 2) * Hm(1, 0) - Hm(0, 0) * Hm(1, 2),
      Hm(1, 0) * Hm(2, 1) - Hm(1, 1) * Hm(2, 0), Hm(0, 1) * Hm(2, 0) - Hm(0, 0) * Hm(2, 1),
      Hm(0, 0) * Hm(1, 1) - Hm(0, 1) * Hm(1, 0);
  const double K = g.dot(adj * g) / (gn * gn * gn * gn);
  const double disc = std::sqrt(std::max(0.0, ref.mean_curvature * ref.mean_curvature - K));
  ref.k1 = ref.mean_curvature + disc;
  ref.k2 = ref.mean_curvature - disc;
  return ref;
}

}  // namespace

AnalyticReference analytic_reference(const ShapeSpec& shape, const Vec3& x) {
  const double scale = shape.kind == ShapeKind::Torus ? shape.minor * shape.minor : 1.0;
  require(std::abs(implicit_residual(shape, x)) <= 1e-6 * std::max(scale, 1e-300), ErrorKind::DomainError,
          "point is not on the reference shape");
  switch (shape.kind) {
    case ShapeKind::Sphere: {
      const double k = 1.0 / shape.radius;
      return AnalyticReference{x.normalized(), k, k, k};
    }
    case ShapeKind::Ellipsoid: {
      const Vec3 inv2 = shape.axes.cwiseProduct(shape.axes).cwiseInverse();
      const Vec3 g = 2.0 * x.cwiseProduct(inv2);
      const Mat3 Hm = (2.0 * inv2).asDiagonal();
      return implicit_curvature(g, Hm);
    }
    case ShapeKind::Torus: {
      const double rho = std::hypot(x.x(), x.y());
      const double phi = std::atan2(x.y(), x.x());
      const double theta = std::atan2(x.z(), rho - shape.major);
      const double ct = std::cos(theta);
      AnalyticReference ref;
      ref.normal = Vec3(ct * std::cos(phi), ct * std::sin(phi), std::sin(theta));
      const double tube = 1.0 / shape.minor;
      const double ring = ct / (shape.major + shape.minor * ct);
      ref.k1 = std::max(tube, ring);
      ref.k2 = std::min(tube, ring);
      ref.mean_curvature = 0.5 * (tube + ring);
      return ref;
    }
  }
  return {};
}

double estimate_radius(const PointCloud& cloud) {
  require(cloud.size() > 0, ErrorKind::NotEnoughPoints, "empty cloud");
  const Vec3 c = cloud.centroid();
  double acc = 0.0;
  for (const auto& p : cloud.positions) acc += (p - c).norm();
  return acc / cloud.size();
}

FieldKind parse_field(const std::string& name) {
  if (name == "constant") return FieldKind::Constant;
  if (name == "bump") return FieldKind::BumpOnSurface;
  if (name == "tumor") return FieldKind::TumorPair;
  throw Error(ErrorKind::Usage, "unknown field '" + name + "'");
}

const char* to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::Constant: return "constant";
    case FieldKind::BumpOnSurface: return "bump";
    case FieldKind::TumorPair: return "tumor";
  }
  return "?";
}

namespace {

double bump(const FieldProvider& f, const Vec3& x, const Vec3& center, double t) {
  const double n = x.norm();
  const Vec3 dir = n > 0.0 ? Vec3(x / n) : Vec3::Zero();
  const double decay = std::isfinite(f.decay_time) ? std::exp(-t / f.decay_time) : 1.0;
  return f.amplitude * std::exp(-(dir - center).squaredNorm() / (f.width * f.width)) * decay;
}

}  // namespace

FieldValue field_value(const FieldProvider& provider, const Vec3& x, double t) {
  switch (provider.kind) {
    case FieldKind::Constant: return {provider.amplitude, std::nullopt};
    case FieldKind::BumpOnSurface: return {bump(provider, x, provider.center.normalized(), t), std::nullopt};
    case FieldKind::TumorPair: {
      const Vec3 c = provider.center.normalized();
      return {bump(provider, x, c, t), -bump(provider, x, -c, t)};
    }
  }
  return {};
}

}  // namespace mflow
