#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mflow/diffgeo.hpp"
#include "mflow/flows.hpp"
#include "mflow/log.hpp"
#include "mflow/patching.hpp"
#include "mflow/scenarios.hpp"

using namespace mflow;

namespace {

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(uni(rng), uni(rng), uni(rng));
  return p;
}

bool is_partition(const std::vector<std::vector<int>>& cores, int n) {
  std::vector<int> seen(n, 0);
  for (const auto& c : cores)
    for (int i : c) ++seen[i];
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace

TEST_SUITE("patching") {

TEST_CASE("knn against a linear scan") {
  const auto pts = random_points(1000, 1);
  CHECK(knn(pts, pts[17], 1) == std::vector<int>{17});
  const auto qs = random_points(100, 2);
  for (const auto& q : qs) {
    const auto got = knn(pts, q, 12);
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < 1000; ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    for (int r = 0; r < 12; ++r) CHECK(got[r] == all[r].second);
    for (int r = 1; r < 12; ++r) CHECK((pts[got[r]] - q).norm() >= (pts[got[r - 1]] - q).norm());
  }
  const auto odd = knn(pts, Vec3::Zero(), 5, [](int i) { return i % 2 == 1; });
  for (int i : odd) CHECK(i % 2 == 1);
  CHECK_THROWS_AS(knn(pts, Vec3::Zero(), 1001), Error);
}

TEST_CASE("core decomposition partitions the cloud") {
  const auto pts = random_points(100, 3);
  const auto cores = build_core_patches(pts, 25, 16);
  CHECK(cores.size() == 4u);
  CHECK(is_partition(cores, 100));

  const auto sphere = sample_sphere(948, 1.0).positions;
  const auto c948 = build_core_patches(sphere, 25, 16);
  CHECK(c948.size() == 38u);  // 37 full cores and a remainder of 23
  CHECK(is_partition(c948, 948));

  // A remainder below the minimum is spread over the other cores.
  const auto c110 = build_core_patches(random_points(110, 4), 25, 16);
  CHECK(c110.size() == 4u);
  CHECK(is_partition(c110, 110));
  CHECK_THROWS_AS(build_core_patches(random_points(10, 5), 25, 16), Error);
}

TEST_CASE("compaction keeps the partition and removes far outliers") {
  auto pts = sample_sphere(948, 1.0).positions;
  auto cores = build_core_patches(pts, 25, 16);
  // Plant a far member in the first core.
  auto& far = cores[cores.size() / 2];
  const int stray = far.front();
  far.erase(far.begin());
  cores[0].push_back(stray);
  const int moved = compact_cores(pts, cores, 16);
  CHECK(moved >= 1);
  CHECK(is_partition(cores, 948));
  for (const auto& c : cores) CHECK(c.size() >= 16u);
  CHECK(std::find(cores[0].begin(), cores[0].end(), stray) == cores[0].end());
}

TEST_CASE("patch center") {
  const std::vector<Vec3> square{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)};
  CHECK(patch_center(square, std::vector<int>{3, 1, 2, 0}) == 0);
  CHECK(patch_center(square, std::vector<int>{2}) == 2);
  const auto pts = random_points(200, 6);
  std::vector<int> core;
  for (int i = 0; i < 25; ++i) core.push_back(i * 7);
  Vec3 c = Vec3::Zero();
  for (int i : core) c += pts[i];
  c /= 25.0;
  int best = core[0];
  for (int i : core)
    if ((pts[i] - c).norm() < (pts[best] - c).norm()) best = i;
  CHECK(patch_center(pts, core) == best);
}

TEST_CASE("patch extension") {
  const auto pts = sample_sphere(500, 1.0).positions;
  std::vector<int> core = knn(pts, pts[40], 25);
  const int center = patch_center(pts, core);
  const auto none = extend_patch(pts, center, core, 0);
  CHECK(none.bdy_idx.empty());
  const auto p = extend_patch(pts, center, core, 12);
  CHECK(p.bdy_idx.size() == 12u);
  std::set<int> cs(core.begin(), core.end());
  for (int i : p.bdy_idx) CHECK(cs.count(i) == 0);
  CHECK(cs.count(p.center_idx) == 1);
  const auto oracle = knn(pts, pts[center], 12, [&](int i) { return cs.count(i) == 0; });
  CHECK(p.bdy_idx == oracle);
  CHECK(p.size() == 37);
  CHECK(p.global_index(0) == core[0]);
  CHECK(p.global_index(25) == p.bdy_idx[0]);
  std::vector<std::string> warnings;
  const auto previous = log::set_warning_sink([&](const std::string& w) { warnings.push_back(w); });
  const auto clamped = extend_patch(std::vector<Vec3>(pts.begin(), pts.begin() + 30), 0, {0, 1, 2}, 40);
  log::set_warning_sink(previous);
  CHECK(clamped.bdy_idx.size() == 27u);
  REQUIRE(warnings.size() == 1u);
  CHECK(warnings[0].find("clamped") != std::string::npos);
  CHECK_THROWS_AS(extend_patch(pts, center, core, -1), Error);
}

TEST_CASE("fitted sphere patches") {
  PointCloud cloud = sample_sphere(948, 1.0);
  const PatchingConfig cfg;
  const auto patches = build_fitted_patches(cloud, cfg);
  for (int i = 0; i < cloud.size(); ++i) CHECK(cloud.core_of[i] >= 0);
  std::vector<int> covered(cloud.size(), 0);
  for (const auto& p : patches) {
    CHECK(p.size() == static_cast<int>(p.core_idx.size()) + cfg.m_b);
    CHECK(p.params.size() == static_cast<std::size_t>(p.size()));
    for (const auto& q : p.params) {
      CHECK(q.minCoeff() >= 0.0);
      CHECK(q.maxCoeff() <= 1.0);
    }
    CHECK(p.report.kappa <= p.report.kappa_at_zero);
    for (int l = 0; l < p.size(); ++l) covered[p.global_index(l)] = 1;
  }
  CHECK(std::count(covered.begin(), covered.end(), 1) == cloud.size());

  const auto adj = build_adjacency(patches, cloud.size());
  CHECK(!adj.edges.empty());
  for (const auto& e : adj.edges) {
    CHECK(e.a < e.b);
    CHECK(!e.shared.empty());
  }

  // Outward orientation everywhere.
  const auto geo = sample_point_geometry(cloud, patches);
  for (int i = 0; i < cloud.size(); ++i) CHECK(geo.normals[i].dot(cloud.positions[i]) > 0.0);

  OrientOptions flip;
  flip.flip_seeds = true;
  const auto signs = orient_patches(patches, cloud);
  const auto flipped = orient_patches(patches, cloud, flip);
  for (std::size_t k = 0; k < patches.size(); ++k) CHECK(signs[k] == -flipped[k]);
}

TEST_CASE("torus orientation") {
  ShapeSpec torus;
  torus.kind = ShapeKind::Torus;
  torus.n_points = 2400;
  PointCloud cloud = sample_shape(torus);
  const auto patches = build_fitted_patches(cloud, PatchingConfig{});
  const auto geo = sample_point_geometry(cloud, patches);
  int agree = 0;
  for (int i = 0; i < cloud.size(); ++i)
    agree += geo.normals[i].dot(analytic_reference(torus, cloud.positions[i]).normal) > 0.0;
  CHECK(agree >= 0.99 * cloud.size());
}

TEST_CASE("median spacing") {
  std::vector<Vec3> line;
  for (int k = 0; k < 11; ++k) line.emplace_back(0.1 * k, 0, 0);
  CHECK(median_nn_spacing(line) == doctest::Approx(0.1));
  CHECK_THROWS_AS(median_nn_spacing(std::vector<Vec3>(1)), Error);
}

}  // TEST_SUITE
