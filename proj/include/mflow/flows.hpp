#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mflow/adapt.hpp"
#include "mflow/common.hpp"
#include "mflow/diffgeo.hpp"
#include "mflow/patching.hpp"
#include "mflow/scenarios.hpp"

namespace mflow {

enum class LawKind { MCF, Coupled };

// MCF moves with the mean-curvature vector 2H*n. Coupled moves with
// (epsilon*2H + delta*u)*n where u comes from a field provider.
struct VelocityLaw {
  LawKind kind = LawKind::MCF;
  double epsilon = 1.0;
  double delta = 0.0;
};

Vec3 velocity_at(const GeometricSample& sample, std::optional<double> field, const VelocityLaw& law);

// Forward Euler: x + dt * v.
std::vector<Vec3> advance_points(std::span<const Vec3> points, std::span<const Vec3> velocities, double dt);

// Moves each control point with the surface velocity at its Greville pair.
// A pair with degenerate geometry borrows the velocity of the nearest valid
// pair (in index distance) and logs a warning. `field` is required for the
// coupled law.
BSplineSurface advance_control_points(const BSplineSurface& s, const VelocityLaw& law, const FieldProvider* field,
                                      double t, double dt, int orientation_sign);

enum class RepatchPolicy { OnDensityChange, EveryKSteps };

struct EvolutionConfig {
  double dt = 1e-3;
  double t_final = 0.0;
  RefineConfig refine;
  VelocityLaw law;
  int snapshot_every = 0;  // 0: only the initial and final states
  RepatchPolicy repatch_policy = RepatchPolicy::OnDensityChange;
  int repatch_every = 0;  // used with EveryKSteps
  PatchingConfig patching;
  bool adapt_refine = true;
  bool adapt_density = true;
  // Replace each advanced control net by the least-squares fit to its moved
  // data before the Gauss-Seidel check; the Greville update alone lets edge
  // rows drift.
  bool project_nets = true;
  // Move core points onto their corrected patch surface. Without it, data
  // noise the fit cannot see is passed between neighboring patches through
  // their boundary rings and grows.
  bool snap_core = true;
  double extinction_factor = 10.0;  // stop once diameter < factor * d_min
  // Also stop once the cloud has fewer than this many patches' worth of
  // points; charts that large wrap around a small closed surface.
  double resolution_factor = 3.0;

  void validate() const;
};

struct PatchDiagnostics {
  double kappa = 0.0;
  double kappa_at_zero = 0.0;  // condition number of the unrotated chart
  double interp_error = 0.0;
  double eps_tilde = 0.0;
  int points = 0;
};

struct Snapshot {
  int step = 0;
  double time = 0.0;
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<double> field_u;
  std::vector<double> field_w;
  std::vector<PatchDiagnostics> patches;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double radius = 0.0;
  int points = 0;
  int patches = 0;
  int gs_runs = 0;
  int gs_failures = 0;  // patches left above tau after optimization
  int refinements = 0;
  bool repatched = false;
  double seconds = 0.0;
};

enum class Termination { Completed, Extinction, NumericalFailure };

const char* to_string(Termination t);

struct EvolutionResult {
  std::vector<Snapshot> snapshots;
  std::vector<StepRecord> steps;  // one per completed step, plus step 0
  Termination termination = Termination::Completed;
  std::string diagnostic;
  double d_min = 0.0;
  double d_max = 0.0;
  int repatches = 0;
};

// Per-point geometry of every point sampled on its own core patch.
struct PointGeometry {
  std::vector<Vec3> normals;
  std::vector<double> mean_curvature;  // average convention, relative to the oriented normal
};

PointGeometry sample_point_geometry(const PointCloud& cloud, std::span<const Patch> patches);

// Time integration of a point cloud. The cloud is decomposed and fitted
// first. `field` may be null for MCF.
EvolutionResult evolve(PointCloud cloud, const EvolutionConfig& cfg, const FieldProvider* field);

}  // namespace mflow
