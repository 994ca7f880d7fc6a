#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mflow/common.hpp"

namespace mflow {

// Nondecreasing knot sequence of a univariate B-spline space. Indices are
// zero-based throughout: basis i is supported on [knots[i], knots[i+degree+1]].
class KnotVector {
 public:
  KnotVector(std::vector<double> knots, int degree);

  int degree() const noexcept { return degree_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  int num_ctrl() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }
  double operator[](std::size_t k) const { return knots_[k]; }

  double domain_begin() const { return knots_[degree_]; }
  double domain_end() const { return knots_[num_ctrl()]; }

  // Span index s with knots[s] <= u < knots[s+1]; the last nonempty span is
  // closed on the right so u == domain_end() is valid.
  int find_span(double u) const;
  int multiplicity(double u) const;
  bool is_open() const;

  bool operator==(const KnotVector& other) const = default;

 private:
  std::vector<double> knots_;
  int degree_;
};

KnotVector make_open_uniform_knots(int num_ctrl, int degree);

// The degree+1 nonzero basis values on `span`, ordered from index span-degree.
std::vector<double> basis_functions(const KnotVector& kv, int span, double u);

// ders[k][r] = k-th derivative of basis (span-degree+r), k = 0..max_order.
// Orders above the degree are zero.
std::vector<std::vector<double>> basis_function_derivatives(const KnotVector& kv, int span,
                                                            double u, int max_order);

double basis_value(const KnotVector& kv, int i, double u);
double basis_derivative(const KnotVector& kv, int i, double u, int order);

std::vector<double> greville_abscissae(const KnotVector& kv);

enum class Direction { U, V };

class BSplineSurface {
 public:
  // ctrl is row-major: ctrl[i * n + j] = P_{i,j}, i along u, j along v.
  BSplineSurface(KnotVector knots_u, KnotVector knots_v, std::vector<Vec3> ctrl);

  const KnotVector& knots_u() const noexcept { return ku_; }
  const KnotVector& knots_v() const noexcept { return kv_; }
  int degree_u() const noexcept { return ku_.degree(); }
  int degree_v() const noexcept { return kv_.degree(); }
  int rows() const noexcept { return ku_.num_ctrl(); }
  int cols() const noexcept { return kv_.num_ctrl(); }

  const Vec3& at(int i, int j) const { return ctrl_[static_cast<std::size_t>(i) * cols() + j]; }
  Vec3& at(int i, int j) { return ctrl_[static_cast<std::size_t>(i) * cols() + j]; }
  const std::vector<Vec3>& ctrl() const noexcept { return ctrl_; }
  std::vector<Vec3>& ctrl() noexcept { return ctrl_; }

  double control_diameter() const { return bbox_diagonal(ctrl_); }

 private:
  KnotVector ku_;
  KnotVector kv_;
  std::vector<Vec3> ctrl_;
};

struct SurfacePartials {
  Vec3 S, Su, Sv, Suu, Suv, Svv;
};

Vec3 surface_eval(const BSplineSurface& s, double u, double v);

// Analytic first and second partials. Both degrees must be at least 2.
SurfacePartials surface_partials(const BSplineSurface& s, double u, double v);

// Inserts one knot; the returned surface has the same image with one more
// control row (U) or column (V).
BSplineSurface insert_knot(const BSplineSurface& s, Direction dir, double value);

}  // namespace mflow
