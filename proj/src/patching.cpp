#include "mflow/patching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "mflow/diffgeo.hpp"
#include "mflow/log.hpp"
#include "mflow/parallel.hpp"

namespace mflow {

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : positions) c += p;
  return positions.empty() ? c : Vec3(c / static_cast<double>(positions.size()));
}

const BSplineSurface& Patch::fitted() const {
  require(surface.has_value(), ErrorKind::PatchFit, "patch has no fitted surface");
  return *surface;
}

std::vector<int> knn(std::span<const Vec3> points, const Vec3& query, int k, const PointFilter& keep) {
  require(k >= 0, ErrorKind::InvalidArgument, "negative k");
  std::vector<std::pair<double, int>> cand;
  cand.reserve(points.size());
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    if (keep && !keep(i)) continue;
    cand.emplace_back((points[i] - query).squaredNorm(), i);
  }
  require(k <= static_cast<int>(cand.size()), ErrorKind::NotEnoughPoints,
          "k = " + std::to_string(k) + " exceeds " + std::to_string(cand.size()) + " candidates");
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  std::vector<int> out(k);
  for (int r = 0; r < k; ++r) out[r] = cand[r].second;
  return out;
}

namespace {

Vec3 centroid_of(std::span<const Vec3> points, std::span<const int> idx) {
  Vec3 c = Vec3::Zero();
  for (int i : idx) c += points[i];
  return c / static_cast<double>(idx.size());
}

}  // namespace

std::vector<std::vector<int>> build_core_patches(std::span<const Vec3> points, int m_c, int min_core) {
  const int N = static_cast<int>(points.size());
  require(m_c >= 1, ErrorKind::InvalidArgument, "m_c must be positive");
  require(N >= std::max(min_core, 1), ErrorKind::NotEnoughPoints,
          "cloud of " + std::to_string(N) + " points is smaller than one feasible core");
  std::vector<char> assigned(N, 0);
  std::vector<std::vector<int>> cores;
  int remaining = N;
  int next_seed = 0;
  while (remaining > 0) {
    while (assigned[next_seed]) ++next_seed;
    const int k = std::min(m_c, remaining);
    auto core = knn(points, points[next_seed], k, [&](int i) { return !assigned[i]; });
    for (int i : core) assigned[i] = 1;
    remaining -= k;
    cores.push_back(std::move(core));
  }

  // A short trailing core is usually made of scattered leftovers, so its
  // points are handed out one by one to the core with the nearest center.
  if (cores.size() > 1 && static_cast<int>(cores.back().size()) < min_core) {
    std::vector<int> tail = std::move(cores.back());
    cores.pop_back();
    std::vector<int> centers;
    for (const auto& core : cores) centers.push_back(patch_center(points, core));
    for (int i : tail) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cores.size(); ++k) {
        const double d = (points[centers[k]] - points[i]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      cores[best].push_back(i);
    }
  }
  return cores;
}

int compact_cores(std::span<const Vec3> points, std::vector<std::vector<int>>& cores, int min_core, double spread) {
  if (cores.size() < 2) return 0;
  std::vector<Vec3> centers;
  std::vector<double> radii;
  for (const auto& core : cores) {
    const Vec3 c = points[patch_center(points, core)];
    double r = 0.0;
    for (int i : core) r = std::max(r, (points[i] - c).norm());
    centers.push_back(c);
    radii.push_back(r);
  }
  std::vector<double> sorted = radii;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double limit = spread * sorted[sorted.size() / 2];

  std::vector<char> alive(cores.size(), 1);
  auto nearest_core = [&](const Vec3& x, std::size_t exclude) {
    std::size_t best = exclude;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cores.size(); ++k) {
      if (k == exclude || !alive[k]) continue;
      const double d = (centers[k] - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };

  std::vector<std::pair<int, std::size_t>> moves;  // (point, from)
  for (std::size_t k = 0; k < cores.size(); ++k) {
    for (int i : cores[k]) {
      if ((points[i] - centers[k]).norm() > limit) moves.push_back({i, k});
    }
  }
  std::vector<std::size_t> target(moves.size());
  for (std::size_t m = 0; m < moves.size(); ++m) target[m] = nearest_core(points[moves[m].first], moves[m].second);
  int moved = 0;
  for (std::size_t m = 0; m < moves.size(); ++m) {
    const auto [i, from] = moves[m];
    if (target[m] == from) continue;
    auto& src = cores[from];
    src.erase(std::find(src.begin(), src.end(), i));
    cores[target[m]].push_back(i);
    ++moved;
  }

  for (std::size_t k = 0; k < cores.size(); ++k) {
    if (static_cast<int>(cores[k].size()) >= min_core) continue;
    alive[k] = 0;
    for (int i : cores[k]) {
      cores[nearest_core(points[i], k)].push_back(i);
      ++moved;
    }
    cores[k].clear();
  }
  std::erase_if(cores, [](const std::vector<int>& c) { return c.empty(); });
  return moved;
}

int patch_center(std::span<const Vec3> points, std::span<const int> core_idx) {
  require(!core_idx.empty(), ErrorKind::InvalidArgument, "empty core");
  const Vec3 c = centroid_of(points, core_idx);
  int best = core_idx.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (int i : core_idx) {
    const double d = (points[i] - c).squaredNorm();
    if (d < best_d || (d == best_d && i < best)) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Patch extend_patch(std::span<const Vec3> points, int center_idx, std::vector<int> core_idx, int m_b) {
  require(m_b >= 0, ErrorKind::InvalidArgument, "m_b must be nonnegative");
  std::vector<char> in_core(points.size(), 0);
  for (int i : core_idx) in_core[i] = 1;
  const int complement = static_cast<int>(points.size()) - static_cast<int>(core_idx.size());
  if (m_b > complement) {
    log::warn("boundary size " + std::to_string(m_b) + " clamped to " + std::to_string(complement));
    m_b = complement;
  }
  Patch patch;
  patch.center_idx = center_idx;
  patch.bdy_idx = knn(points, points[center_idx], m_b, [&](int i) { return !in_core[i]; });
  patch.core_idx = std::move(core_idx);
  return patch;
}

PatchAdjacency build_adjacency(std::span<const Patch> patches, int num_points) {
  std::vector<std::vector<int>> owners(num_points);
  for (int k = 0; k < static_cast<int>(patches.size()); ++k) {
    for (int l = 0; l < patches[k].size(); ++l) owners[patches[k].global_index(l)].push_back(k);
  }
  std::vector<std::pair<std::pair<int, int>, int>> pairs;
  for (int i = 0; i < num_points; ++i) {
    const auto& o = owners[i];
    for (std::size_t x = 0; x < o.size(); ++x) {
      for (std::size_t y = x + 1; y < o.size(); ++y) {
        pairs.push_back({{std::min(o[x], o[y]), std::max(o[x], o[y])}, i});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  PatchAdjacency adj;
  for (const auto& [ab, i] : pairs) {
    if (adj.edges.empty() || adj.edges.back().a != ab.first || adj.edges.back().b != ab.second) {
      adj.edges.push_back({ab.first, ab.second, {}});
    }
    adj.edges.back().shared.push_back(i);
  }
  return adj;
}

namespace {

std::optional<Vec3> normal_at_point(const Patch& patch, int global) {
  for (int l = 0; l < patch.size(); ++l) {
    if (patch.global_index(l) != global) continue;
    try {
      const auto g = sample_geometry(patch.fitted(), patch.params[l].x(), patch.params[l].y(), 1);
      return g.normal;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// +1 when the raw normals of the two patches agree at most shared points.
int relative_sign(const Patch& a, const Patch& b, std::span<const int> shared) {
  int agree = 0, valid = 0;
  double dot_sum = 0.0;
  for (int i : shared) {
    const auto na = normal_at_point(a, i);
    const auto nb = normal_at_point(b, i);
    if (!na || !nb) continue;
    const double d = na->dot(*nb);
    ++valid;
    if (d > 0.0) ++agree;
    dot_sum += d;
  }
  if (2 * agree != valid) return 2 * agree > valid ? 1 : -1;
  return dot_sum >= 0.0 ? 1 : -1;
}

}  // namespace

std::vector<int> orient_patches(std::span<const Patch> patches, const PointCloud& cloud,
                                const OrientOptions& options) {
  const int P = static_cast<int>(patches.size());
  const auto adj = build_adjacency(patches, cloud.size());

  std::vector<std::vector<std::pair<int, int>>> nbrs(P);  // (neighbor, edge index)
  for (int e = 0; e < static_cast<int>(adj.edges.size()); ++e) {
    nbrs[adj.edges[e].a].push_back({adj.edges[e].b, e});
    nbrs[adj.edges[e].b].push_back({adj.edges[e].a, e});
  }

  const Vec3 centroid = cloud.centroid();
  std::vector<int> sign(P, 0);
  std::vector<int> component(P, -1);
  int ncomp = 0;
  for (int start = 0; start < P; ++start) {
    if (component[start] >= 0) continue;
    std::vector<int> members{start};
    component[start] = ncomp;
    for (std::size_t h = 0; h < members.size(); ++h) {
      for (auto [nb, e] : nbrs[members[h]]) {
        if (component[nb] < 0) {
          component[nb] = ncomp;
          members.push_back(nb);
        }
      }
    }
    ++ncomp;

    // The point farthest from any fixed interior or exterior point has its
    // outward normal pointing away from it.
    int seed = members.front();
    double far = -1.0;
    for (int k : members) {
      const double d = (cloud.positions[patches[k].center_idx] - centroid).squaredNorm();
      if (d > far) {
        far = d;
        seed = k;
      }
    }
    const auto& sp = patches[seed];
    const auto n = normal_at_point(sp, sp.center_idx);
    int s = 1;
    if (n && n->dot(cloud.positions[sp.center_idx] - centroid) < 0.0) s = -1;
    if (options.flip_seeds) s = -s;
    sign[seed] = s;

    // Prim's algorithm on shared-point counts (maximum spanning tree).
    std::vector<char> in_tree(P, 0);
    in_tree[seed] = 1;
    std::vector<std::pair<int, int>> best(P, {-1, -1});  // (weight, edge)
    auto relax = [&](int k) {
      for (auto [nb, e] : nbrs[k]) {
        const int w = static_cast<int>(adj.edges[e].shared.size());
        if (!in_tree[nb] && w > best[nb].first) best[nb] = {w, e};
      }
    };
    relax(seed);
    for (std::size_t added = 1; added < members.size(); ++added) {
      int pick = -1;
      for (int k : members) {
        if (in_tree[k] || best[k].second < 0) continue;
        if (pick < 0 || best[k].first > best[pick].first) pick = k;
      }
      if (pick < 0) break;
      const auto& edge = adj.edges[best[pick].second];
      const int parent = edge.a == pick ? edge.b : edge.a;
      sign[pick] = sign[parent] * relative_sign(patches[parent], patches[pick], edge.shared);
      in_tree[pick] = 1;
      relax(pick);
    }
  }
  for (int k = 0; k < P; ++k) {
    if (sign[k] == 0) sign[k] = 1;
  }
  return sign;
}

std::vector<Vec3> patch_points(const Patch& patch, std::span<const Vec3> positions) {
  std::vector<Vec3> pts(patch.size());
  for (int l = 0; l < patch.size(); ++l) pts[l] = positions[patch.global_index(l)];
  return pts;
}

std::vector<Patch> build_fitted_patches(PointCloud& cloud, const PatchingConfig& cfg) {
  const int p = cfg.fit.degree;
  auto cores = build_core_patches(cloud.positions, cfg.m_c, (p + 1) * (p + 1));
  compact_cores(cloud.positions, cores, (p + 1) * (p + 1));
  std::vector<Patch> patches;
  patches.reserve(cores.size());
  cloud.core_of.assign(cloud.size(), -1);
  for (int k = 0; k < static_cast<int>(cores.size()); ++k) {
    for (int i : cores[k]) cloud.core_of[i] = k;
    const int center = patch_center(cloud.positions, cores[k]);
    patches.push_back(extend_patch(cloud.positions, center, std::move(cores[k]), cfg.m_b));
  }

  parallel_for(static_cast<int>(patches.size()), [&](int k) {
    auto& patch = patches[k];
    const auto pts = patch_points(patch, cloud.positions);
    try {
      auto fit = fit_local_patch(pts, cfg.fit);
      patch.frame = fit.frame;
      patch.params = std::move(fit.params);
      patch.surface = std::move(fit.surface);
      patch.report = fit.report;
    } catch (const Error& e) {
      throw Error(ErrorKind::PatchFit, "patch " + std::to_string(k) + ": " + e.what());
    }
  });

  const auto signs = orient_patches(patches, cloud, cfg.orient);
  for (std::size_t k = 0; k < patches.size(); ++k) patches[k].orientation_sign = signs[k];
  return patches;
}

double median_nn_spacing(std::span<const Vec3> points) {
  const int N = static_cast<int>(points.size());
  require(N >= 2, ErrorKind::NotEnoughPoints, "spacing needs two points");
  std::vector<double> nn(N, std::numeric_limits<double>::infinity());
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double d = (points[i] - points[j]).squaredNorm();
      nn[i] = std::min(nn[i], d);
      nn[j] = std::min(nn[j], d);
    }
  }
  std::nth_element(nn.begin(), nn.begin() + N / 2, nn.end());
  return std::sqrt(nn[N / 2]);
}

}  // namespace mflow
