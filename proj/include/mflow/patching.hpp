#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mflow/common.hpp"
#include "mflow/paramfit.hpp"
#include "mflow/spline.hpp"

namespace mflow {

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<double> field_u;  // empty when no field is attached
  std::vector<double> field_w;
  std::vector<int> core_of;     // patch index per point, -1 before decomposition
  double time = 0.0;

  int size() const { return static_cast<int>(positions.size()); }
  Vec3 centroid() const;
};

// One overlapping patch. `params` is laid out core-first: params[l] belongs
// to core_idx[l] for l < core_idx.size(), then to bdy_idx in order.
struct Patch {
  std::vector<int> core_idx;
  std::vector<int> bdy_idx;
  int center_idx = -1;
  PcaFrame frame{};
  std::vector<Vec2> params;
  std::optional<BSplineSurface> surface;
  ConditioningReport report{};
  int orientation_sign = 1;

  int size() const { return static_cast<int>(core_idx.size() + bdy_idx.size()); }
  int global_index(int local) const {
    const int nc = static_cast<int>(core_idx.size());
    return local < nc ? core_idx[local] : bdy_idx[local - nc];
  }
  const BSplineSurface& fitted() const;
};

// Candidate filter for knn: return true to keep point index i.
using PointFilter = std::function<bool(int)>;

// The k nearest points to `query` among those passing `keep`, ordered by
// (distance, index).
std::vector<int> knn(std::span<const Vec3> points, const Vec3& query, int k, const PointFilter& keep = {});

// Disjoint cores built by repeatedly seeding at the lowest unassigned index.
// Points of a trailing core smaller than `min_core` each join the core whose
// center is nearest to them.
std::vector<std::vector<int>> build_core_patches(std::span<const Vec3> points, int m_c, int min_core);

// Late seeds can collect leftovers from far apart. Core points farther than
// `spread` times the median core radius from their center move to the core
// with the nearest center; cores left below `min_core` are dissolved the
// same way. Returns the number of points moved.
int compact_cores(std::span<const Vec3> points, std::vector<std::vector<int>>& cores, int min_core,
                  double spread = 2.0);

int patch_center(std::span<const Vec3> points, std::span<const int> core_idx);

// Patch skeleton: bdy_idx = the m_b nearest non-core points to the center.
Patch extend_patch(std::span<const Vec3> points, int center_idx, std::vector<int> core_idx, int m_b);

// Pairwise shared-point counts of overlapping patches.
struct PatchAdjacency {
  struct Edge {
    int a, b;
    std::vector<int> shared;  // global point indices in both patches
  };
  std::vector<Edge> edges;
};

PatchAdjacency build_adjacency(std::span<const Patch> patches, int num_points);

struct OrientOptions {
  bool flip_seeds = false;  // orient every seed inward instead of outward
};

// Consistent orientation signs for fitted patches: each connected component
// is seeded at the patch whose center is farthest from the cloud centroid,
// oriented outward, and propagated along a maximum spanning tree of the
// shared-point counts.
std::vector<int> orient_patches(std::span<const Patch> patches, const PointCloud& cloud,
                                const OrientOptions& options = {});

struct PatchingConfig {
  int m_c = 25;
  // 99-point patches fitted by least squares on a 6x6 net. Smaller rings
  // leave core points near the chart edge, where the curvature velocity
  // amplifies noise instead of damping it.
  int m_b = 74;
  LocalFitConfig fit;
  OrientOptions orient;
};

// Decomposes the cloud, extends, fits and orients every patch, and rewrites
// cloud.core_of. Throws PatchFit when any patch cannot be fitted.
std::vector<Patch> build_fitted_patches(PointCloud& cloud, const PatchingConfig& cfg);

// Positions of a patch's points in local (core-first) order.
std::vector<Vec3> patch_points(const Patch& patch, std::span<const Vec3> positions);

// Median over points of the distance to their nearest neighbor.
double median_nn_spacing(std::span<const Vec3> points);

}  // namespace mflow
