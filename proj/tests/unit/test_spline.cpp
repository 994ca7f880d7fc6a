#include <doctest.h>

#include <cmath>
#include <random>

#include "mflow/spline.hpp"
#include "support.hpp"

using namespace mflow;

TEST_SUITE("splinecore") {

TEST_CASE("open uniform knot vectors") {
  CHECK(make_open_uniform_knots(4, 3).knots() == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(make_open_uniform_knots(5, 3).knots() == std::vector<double>{0, 0, 0, 0, 0.5, 1, 1, 1, 1});
  CHECK(make_open_uniform_knots(6, 2).knots() == std::vector<double>{0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1});
  const auto kv = make_open_uniform_knots(7, 3);
  CHECK(kv.is_open());
  CHECK(kv.num_ctrl() == 7);
  CHECK(kv.knots().size() == 11u);
  CHECK_THROWS_AS(make_open_uniform_knots(3, 3), Error);
}

TEST_CASE("knot vector validation") {
  CHECK_THROWS_AS(KnotVector({0, 0, 1, 0.5, 1, 1}, 1), Error);
  CHECK_THROWS_AS(KnotVector({0, 0, 0, 1}, 2), Error);
  CHECK_THROWS_AS(KnotVector({0, 0, 0, 0, 0, 0}, 2), Error);
  const auto kv = make_open_uniform_knots(5, 3);
  CHECK_THROWS_AS(kv.find_span(1.5), Error);
  CHECK(kv.find_span(1.0) == 4);
  CHECK(kv.find_span(0.0) == 3);
  CHECK(kv.find_span(0.5) == 4);
  CHECK(kv.multiplicity(0.0) == 4);
}

TEST_CASE("basis values against the recursion") {
  const KnotVector step({0, 0.5, 1}, 0);
  CHECK(basis_value(step, 1, 0.25) == 0.0);
  CHECK(basis_value(step, 0, 0.25) == 1.0);
  CHECK(basis_value(KnotVector({0, 0.5, 1}, 0), 1, 0.75) == 1.0);

  const auto bez = make_open_uniform_knots(4, 3);
  CHECK(basis_value(bez, 0, 0.0) == 1.0);
  for (int i = 1; i < 4; ++i) CHECK(basis_value(bez, i, 0.0) == 0.0);
  const double expect[4] = {0.125, 0.375, 0.375, 0.125};
  for (int i = 0; i < 4; ++i) CHECK(basis_value(bez, i, 0.5) == doctest::Approx(expect[i]).epsilon(1e-15));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 1 + trial % 4;
    const auto kv = test::random_knots(rng, p, 1 + trial % 6);
    for (int s = 0; s < 25; ++s) {
      const double u = s == 0 ? 1.0 : uni(rng);
      for (int i = 0; i < kv.num_ctrl(); ++i)
        CHECK(std::abs(basis_value(kv, i, u) - test::cox_de_boor(kv.knots(), i, p, u)) <= 1e-13);
    }
  }
}

TEST_CASE("partition of unity and nonnegativity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto kv = test::random_knots(rng, 1 + trial % 4, trial % 8);
    for (int s = 0; s < 50; ++s) {
      const double u = uni(rng);
      double sum = 0.0;
      for (int i = 0; i < kv.num_ctrl(); ++i) {
        const double b = basis_value(kv, i, u);
        CHECK(b >= 0.0);
        sum += b;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("basis derivatives") {
  CHECK(basis_derivative(KnotVector({0, 0.5, 1}, 0), 0, 0.25, 1) == 0.0);
  const auto bez = make_open_uniform_knots(4, 3);
  CHECK(basis_derivative(bez, 1, 0.0, 1) == doctest::Approx(3.0));
  CHECK(basis_derivative(bez, 0, 0.0, 1) == doctest::Approx(-3.0));
  CHECK_THROWS_AS(basis_derivative(bez, 0, 0.5, 3), Error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const auto kv = test::random_knots(rng, 3, 3);
    for (int s = 0; s < 20; ++s) {
      const double u = uni(rng);
      // Finite differences are meaningless across a knot.
      bool near_knot = false;
      for (double k : kv.knots()) near_knot |= std::abs(k - u) < 3 * h;
      if (near_knot) continue;
      for (int i = 0; i < kv.num_ctrl(); ++i) {
        const double fd1 = (basis_value(kv, i, u + h) - basis_value(kv, i, u - h)) / (2 * h);
        const double d1 = basis_derivative(kv, i, u, 1);
        CHECK(std::abs(d1 - fd1) <= 1e-6 * std::max(1.0, std::abs(d1)));
        const double fd2 = (basis_derivative(kv, i, u + h, 1) - basis_derivative(kv, i, u - h, 1)) / (2 * h);
        const double d2 = basis_derivative(kv, i, u, 2);
        CHECK(std::abs(d2 - fd2) <= 1e-5 * std::max(1.0, std::abs(d2)));
      }
    }
  }
}

TEST_CASE("surface evaluation") {
  std::mt19937_64 rng(5);
  const auto s = test::random_surface(rng, 4, 4, 3, 3);
  CHECK((surface_eval(s, 0, 0) - s.at(0, 0)).norm() == 0.0);
  CHECK((surface_eval(s, 1, 1) - s.at(3, 3)).norm() == 0.0);
  CHECK((surface_eval(s, 1, 0) - s.at(3, 0)).norm() == 0.0);

  Vec3 naive = Vec3::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      naive += s.at(i, j) * test::cox_de_boor(s.knots_u().knots(), i, 3, 0.3) *
               test::cox_de_boor(s.knots_v().knots(), j, 3, 0.7);
  CHECK((surface_eval(s, 0.3, 0.7) - naive).norm() <= 1e-14);

  std::vector<Vec3> same(30, Vec3(1.5, -2.0, 0.25));
  const BSplineSurface c(make_open_uniform_knots(6, 3), make_open_uniform_knots(5, 2), same);
  CHECK((surface_eval(c, 0.37, 0.91) - Vec3(1.5, -2.0, 0.25)).norm() <= 1e-14);
  CHECK_THROWS_AS(surface_eval(c, 1.2, 0.5), Error);
  CHECK_THROWS_AS(BSplineSurface(make_open_uniform_knots(4, 3), make_open_uniform_knots(4, 3), same), Error);
}

TEST_CASE("surface partials") {
  const auto plane = test::plane_surface(5, 6);
  const auto d = surface_partials(plane, 0.4, 0.55);
  CHECK(d.Su.z() == 0.0);
  CHECK(d.Sv.z() == 0.0);
  CHECK(d.Suu.z() == 0.0);

  // A net sampled from the bilinear map (u, v, u*v) reproduces it, so S_uv is constant.
  std::vector<double> z;
  const auto g = greville_abscissae(make_open_uniform_knots(6, 3));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) z.push_back(g[i] * g[j]);
  const auto bil = test::height_surface(6, 6, 3, 3, z);
  for (double u : {0.1, 0.45, 0.8})
    for (double v : {0.2, 0.6, 0.95}) CHECK((surface_partials(bil, u, v).Suv - Vec3(0, 0, 1)).norm() <= 1e-12);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  const auto s = test::random_surface(rng, 4, 4, 3, 3);  // Bezier: smooth everywhere
  const double h = 1e-5;
  for (int k = 0; k < 100; ++k) {
    const double u = uni(rng), v = uni(rng);
    const auto p = surface_partials(s, u, v);
    CHECK((p.S - surface_eval(s, u, v)).norm() <= 1e-14);
    auto rel = [](const Vec3& a, const Vec3& b) { return (a - b).norm() / std::max(1.0, a.norm()); };
    const Vec3 fu = (surface_eval(s, u + h, v) - surface_eval(s, u - h, v)) / (2 * h);
    const Vec3 fv = (surface_eval(s, u, v + h) - surface_eval(s, u, v - h)) / (2 * h);
    CHECK(rel(p.Su, fu) <= 1e-5);
    CHECK(rel(p.Sv, fv) <= 1e-5);
    const Vec3 fuu = (surface_partials(s, u + h, v).Su - surface_partials(s, u - h, v).Su) / (2 * h);
    const Vec3 fuv = (surface_partials(s, u, v + h).Su - surface_partials(s, u, v - h).Su) / (2 * h);
    const Vec3 fvv = (surface_partials(s, u, v + h).Sv - surface_partials(s, u, v - h).Sv) / (2 * h);
    CHECK(rel(p.Suu, fuu) <= 1e-5);
    CHECK(rel(p.Suv, fuv) <= 1e-5);
    CHECK(rel(p.Svv, fvv) <= 1e-5);
  }
  const BSplineSurface linear(make_open_uniform_knots(3, 1), make_open_uniform_knots(3, 1), std::vector<Vec3>(9));
  CHECK_THROWS_AS(surface_partials(linear, 0.5, 0.5), Error);
}

TEST_CASE("greville abscissae") {
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::abs(a[k] - b[k]) > 1e-15) return false;
    return true;
  };
  CHECK(close(greville_abscissae(make_open_uniform_knots(4, 3)), {0, 1.0 / 3, 2.0 / 3, 1}));
  CHECK(close(greville_abscissae(make_open_uniform_knots(5, 3)), {0, 1.0 / 6, 0.5, 5.0 / 6, 1}));
  CHECK_THROWS_AS(greville_abscissae(KnotVector({0, 0.5, 1}, 0)), Error);

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 1 + trial % 4;
    const auto kv = test::random_knots(rng, p, trial % 7);
    const auto g = greville_abscissae(kv);
    REQUIRE(static_cast<int>(g.size()) == kv.num_ctrl());
    for (int i = 0; i < kv.num_ctrl(); ++i) {
      double acc = 0.0;
      for (int k = 1; k <= p; ++k) acc += kv[i + k];
      CHECK(g[i] == acc / p);
      if (i > 0) CHECK(g[i] >= g[i - 1]);
    }
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
  }
}

TEST_CASE("knot insertion keeps the image") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = test::random_surface(rng, 5 + trial % 3, 4 + trial % 2, 3, 2 + trial % 2);
    const auto dir = trial % 2 ? Direction::V : Direction::U;
    const auto r = insert_knot(s, dir, 0.1 + 0.8 * uni(rng));
    CHECK(r.rows() == s.rows() + (dir == Direction::U));
    CHECK(r.cols() == s.cols() + (dir == Direction::V));
    const double diam = s.control_diameter();
    for (int k = 0; k < 200; ++k) {
      const double u = uni(rng), v = uni(rng);
      CHECK((surface_eval(s, u, v) - surface_eval(r, u, v)).norm() <= 1e-10 * diam);
    }
  }
  const auto s = test::random_surface(rng, 4, 4, 3, 3);
  CHECK_THROWS_AS(insert_knot(s, Direction::U, 0.0), Error);
  auto t = insert_knot(insert_knot(insert_knot(s, Direction::U, 0.5), Direction::U, 0.5), Direction::U, 0.5);
  CHECK_THROWS_AS(insert_knot(t, Direction::U, 0.5), Error);
}

TEST_CASE("midpoint insertion matches de Casteljau subdivision") {
  std::vector<Vec3> row{Vec3(0, 0, 0), Vec3(1, 2, 0), Vec3(3, 2, 1), Vec3(4, 0, 0)};
  std::vector<Vec3> ctrl;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ctrl.push_back(row[i] + Vec3(0, 0, j));
  const BSplineSurface s(make_open_uniform_knots(4, 3), make_open_uniform_knots(4, 3), ctrl);
  const auto r = insert_knot(s, Direction::U, 0.5);
  const Vec3 m01 = 0.5 * (row[0] + row[1]), m12 = 0.5 * (row[1] + row[2]), m23 = 0.5 * (row[2] + row[3]);
  const Vec3 once[5] = {row[0], m01, m12, m23, row[3]};
  for (int i = 0; i < 5; ++i) CHECK((r.at(i, 0) - once[i]).norm() <= 1e-14);

  // Full multiplicity splits the curve into its two de Casteljau halves.
  const auto f = insert_knot(insert_knot(r, Direction::U, 0.5), Direction::U, 0.5);
  const Vec3 m012 = 0.5 * (m01 + m12), m123 = 0.5 * (m12 + m23), mid = 0.5 * (m012 + m123);
  const Vec3 split[7] = {row[0], m01, m012, mid, m123, m23, row[3]};
  for (int i = 0; i < 7; ++i) CHECK((f.at(i, 0) - split[i]).norm() <= 1e-14);
}

}  // TEST_SUITE
