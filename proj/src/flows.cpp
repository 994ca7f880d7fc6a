#include "mflow/flows.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "mflow/log.hpp"
#include "mflow/parallel.hpp"

namespace mflow {

Vec3 velocity_at(const GeometricSample& sample, std::optional<double> field, const VelocityLaw& law) {
  const double curvature_speed = 2.0 * sample.mean_curvature;
  if (law.kind == LawKind::MCF) return curvature_speed * sample.normal;
  require(field.has_value(), ErrorKind::MissingField, "coupled velocity needs a field value");
  return (law.epsilon * curvature_speed + law.delta * *field) * sample.normal;
}

std::vector<Vec3> advance_points(std::span<const Vec3> points, std::span<const Vec3> velocities, double dt) {
  require(points.size() == velocities.size(), ErrorKind::InvalidArgument, "points/velocities size mismatch");
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = points[i] + dt * velocities[i];
  return out;
}

namespace {

std::optional<double> field_at(const FieldProvider* field, const Vec3& x, double t) {
  if (!field) return std::nullopt;
  return field_value(*field, x, t).u;
}

}  // namespace

BSplineSurface advance_control_points(const BSplineSurface& s, const VelocityLaw& law, const FieldProvider* field,
                                      double t, double dt, int orientation_sign) {
  const auto gu = greville_abscissae(s.knots_u());
  const auto gv = greville_abscissae(s.knots_v());
  const int m = s.rows(), n = s.cols();
  std::vector<std::optional<Vec3>> vel(static_cast<std::size_t>(m) * n);
  int missing = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      try {
        const auto g = sample_geometry(s, gu[i], gv[j], orientation_sign);
        vel[i * n + j] = velocity_at(g, field_at(field, g.position, t), law);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateTangent && e.kind() != ErrorKind::DegenerateMetric) throw;
        ++missing;
      }
    }
  }
  require(missing < m * n, ErrorKind::DegenerateMetric, "no Greville pair has valid geometry");
  if (missing > 0) log::warn(std::to_string(missing) + " degenerate Greville pair(s); borrowing neighbor velocity");

  BSplineSurface out = s;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec3 v;
      if (vel[i * n + j]) {
        v = *vel[i * n + j];
      } else {
        int best = -1, best_d = std::numeric_limits<int>::max();
        for (int a = 0; a < m; ++a) {
          for (int b = 0; b < n; ++b) {
            const int d = std::abs(a - i) + std::abs(b - j);
            if (vel[a * n + b] && d < best_d) {
              best_d = d;
              best = a * n + b;
            }
          }
        }
        v = *vel[best];
      }
      out.at(i, j) += dt * v;
    }
  }
  return out;
}

void EvolutionConfig::validate() const {
  require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  require(t_final >= 0.0, ErrorKind::InvalidArgument, "t_final must be nonnegative");
  require(snapshot_every >= 0, ErrorKind::InvalidArgument, "snapshot_every must be nonnegative");
  require(extinction_factor >= 0.0 && resolution_factor >= 0.0, ErrorKind::InvalidArgument,
          "guard factors must be nonnegative");
  require(repatch_policy != RepatchPolicy::EveryKSteps || repatch_every > 0, ErrorKind::InvalidArgument,
          "every-k-steps repatching needs repatch_every > 0");
  refine.validate();
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Extinction: return "extinction";
    case Termination::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

PointGeometry sample_point_geometry(const PointCloud& cloud, std::span<const Patch> patches) {
  PointGeometry out;
  out.normals.assign(cloud.size(), Vec3::Zero());
  out.mean_curvature.assign(cloud.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<int>(patches.size()), [&](int k) {
    const auto& patch = patches[k];
    for (std::size_t l = 0; l < patch.core_idx.size(); ++l) {
      const int i = patch.core_idx[l];
      try {
        const auto g = sample_geometry(patch.fitted(), patch.params[l].x(), patch.params[l].y(),
                                       patch.orientation_sign);
        out.normals[i] = g.normal;
        out.mean_curvature[i] = g.mean_curvature;
      } catch (const Error&) {
        // left as NaN / zero normal
      }
    }
  });
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

// Core-point velocities from the start-of-step geometry of each point's own
// patch. A point whose geometry is degenerate takes the velocity of the
// nearest (in parameter space) valid core point of the same patch.
std::vector<Vec3> core_velocities(const PointCloud& cloud, std::span<const Patch> patches, const VelocityLaw& law,
                                  const FieldProvider* field, double t) {
  std::vector<Vec3> vel(cloud.size(), Vec3::Zero());
  parallel_for(static_cast<int>(patches.size()), [&](int k) {
    const auto& patch = patches[k];
    const int nc = static_cast<int>(patch.core_idx.size());
    std::vector<char> valid(nc, 0);
    for (int l = 0; l < nc; ++l) {
      const int i = patch.core_idx[l];
      try {
        const auto g = sample_geometry(patch.fitted(), patch.params[l].x(), patch.params[l].y(),
                                       patch.orientation_sign);
        vel[i] = velocity_at(g, field_at(field, cloud.positions[i], t), law);
        valid[l] = 1;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateTangent && e.kind() != ErrorKind::DegenerateMetric) throw;
      }
    }
    const int nvalid = static_cast<int>(std::count(valid.begin(), valid.end(), 1));
    require(nvalid > 0, ErrorKind::DegenerateMetric, "patch " + std::to_string(k) + " has no valid geometry");
    if (nvalid == nc) return;
    log::warn("patch " + std::to_string(k) + ": " + std::to_string(nc - nvalid) +
              " degenerate point(s); borrowing neighbor velocity");
    for (int l = 0; l < nc; ++l) {
      if (valid[l]) continue;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int o = 0; o < nc; ++o) {
        if (!valid[o]) continue;
        const double d = (patch.params[o] - patch.params[l]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = o;
        }
      }
      vel[patch.core_idx[l]] = vel[patch.core_idx[best]];
    }
  });
  return vel;
}

void refresh_fields(PointCloud& cloud, const FieldProvider* field) {
  if (!field) return;
  cloud.field_u.resize(cloud.size());
  if (field->kind == FieldKind::TumorPair) {
    cloud.field_w.resize(cloud.size());
  } else {
    cloud.field_w.clear();
  }
  for (int i = 0; i < cloud.size(); ++i) {
    const auto f = field_value(*field, cloud.positions[i], cloud.time);
    cloud.field_u[i] = f.u;
    if (f.w) cloud.field_w[i] = *f.w;
  }
}

Snapshot take_snapshot(int step, const PointCloud& cloud, std::span<const Patch> patches,
                       const std::vector<PatchDiagnostics>& diag) {
  Snapshot s;
  s.step = step;
  s.time = cloud.time;
  s.positions = cloud.positions;
  s.normals = sample_point_geometry(cloud, patches).normals;
  s.field_u = cloud.field_u;
  s.field_w = cloud.field_w;
  s.patches = diag;
  return s;
}

std::vector<PatchDiagnostics> diagnose(const PointCloud& cloud, std::span<const Patch> patches) {
  std::vector<PatchDiagnostics> out(patches.size());
  parallel_for(static_cast<int>(patches.size()), [&](int k) {
    const auto& patch = patches[k];
    const auto pts = patch_points(patch, cloud.positions);
    out[k].kappa = patch.report.kappa;
    out[k].kappa_at_zero = patch.report.kappa_at_zero;
    out[k].interp_error = interp_error(patch.fitted(), pts, patch.params);
    out[k].eps_tilde = greville_deviation(patch.fitted()).eps;
    out[k].points = patch.size();
  });
  return out;
}

// Diameter below `limit`? Uses the radius about the centroid to avoid the
// quadratic scan when the answer is clear.
bool diameter_below(const std::vector<Vec3>& pts, double limit) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double R = 0.0;
  for (const auto& p : pts) R = std::max(R, (p - c).norm());
  if (2.0 * R < limit) return true;
  if (R >= limit) return false;
  double d2 = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) d2 = std::max(d2, (pts[a] - pts[b]).squaredNorm());
  }
  return std::sqrt(d2) < limit;
}

struct PatchOutcome {
  bool gs_run = false;
  bool gs_failed = false;
  bool refined = false;
  std::vector<Vec3> snapped;  // core positions on the corrected surface
  std::vector<SynthesizedPoint> new_points;
};

}  // namespace

EvolutionResult evolve(PointCloud cloud, const EvolutionConfig& cfg, const FieldProvider* field) {
  cfg.validate();
  require(cfg.law.kind == LawKind::MCF || field != nullptr, ErrorKind::MissingField,
          "coupled evolution needs a field provider");

  EvolutionResult result;
  std::vector<Patch> patches = build_fitted_patches(cloud, cfg.patching);
  const double spacing = median_nn_spacing(cloud.positions);
  result.d_min = cfg.refine.d_min > 0.0 ? cfg.refine.d_min : 0.5 * spacing;
  result.d_max = cfg.refine.d_max > 0.0 ? cfg.refine.d_max : 2.0 * spacing;
  require(result.d_min < result.d_max, ErrorKind::InvalidArgument, "d_min must be smaller than d_max");

  std::vector<Eigen::MatrixXd> projectors(patches.size());
  refresh_fields(cloud, field);
  const int nsteps = static_cast<int>(std::ceil(cfg.t_final / cfg.dt - 1e-9));
  const double t_start = cloud.time;

  auto record = [&](int step, const StepRecord& base) {
    StepRecord r = base;
    r.step = step;
    r.time = cloud.time;
    r.radius = estimate_radius(cloud);
    r.points = cloud.size();
    r.patches = static_cast<int>(patches.size());
    result.steps.push_back(r);
  };
  record(0, {});
  result.snapshots.push_back(take_snapshot(0, cloud, patches, diagnose(cloud, patches)));

  for (int step = 1; step <= nsteps; ++step) {
    const PointCloud good_cloud = cloud;
    const std::vector<Patch> good_patches = patches;
    try {
      const auto started = Clock::now();
      StepRecord rec;
      const double t_prev = cloud.time;

      // Jacobi-style: points and control nets both move with start-of-step geometry.
      const auto vel = core_velocities(cloud, patches, cfg.law, field, t_prev);
      std::vector<BSplineSurface> moved(patches.size(), patches.front().fitted());
      parallel_for(static_cast<int>(patches.size()), [&](int k) {
        moved[k] = advance_control_points(patches[k].fitted(), cfg.law, field, t_prev, cfg.dt,
                                          patches[k].orientation_sign);
      });
      cloud.positions = advance_points(cloud.positions, vel, cfg.dt);
      for (std::size_t k = 0; k < patches.size(); ++k) patches[k].surface = std::move(moved[k]);
      cloud.time = t_start + step * cfg.dt;

      // Per-patch optimization and refinement against the moved data.
      std::vector<PatchOutcome> outcome(patches.size());
      parallel_for(static_cast<int>(patches.size()), [&](int k) {
        auto& patch = patches[k];
        const auto pts = patch_points(patch, cloud.positions);
        const double diag = bbox_diagonal(pts);
        const double tau = cfg.refine.tau.resolve(diag);
        if (cfg.project_nets) {
          if (projectors[k].size() == 0) projectors[k] = least_squares_projector(patch.fitted(), patch.params);
          if (projectors[k].size() > 0) patch.surface = least_squares_project(patch.fitted(), projectors[k], pts);
        }
        if (interp_error(patch.fitted(), pts, patch.params) > tau) {
          auto gs = gauss_seidel_optimize(patch.fitted(), pts, patch.params, tau, cfg.refine.alpha,
                                          cfg.refine.max_gs_sweeps);
          patch.surface = std::move(gs.surface);
          outcome[k].gs_run = true;
          outcome[k].gs_failed = !gs.converged;
        }
        if (cfg.snap_core) {
          auto& snapped = outcome[k].snapped;
          snapped.reserve(patch.core_idx.size());
          for (std::size_t l = 0; l < patch.core_idx.size(); ++l) {
            snapped.push_back(surface_eval(patch.fitted(), patch.params[l].x(), patch.params[l].y()));
          }
        }
        if (!cfg.adapt_refine) return;
        const double eps_tol = cfg.refine.eps_tol.resolve(diag);
        if (greville_deviation(patch.fitted()).eps > eps_tol) {
          auto ref = refine_until_tolerance(patch.fitted(), eps_tol, cfg.refine.max_refine_iters);
          if (ref.iterations > 0) {
            patch.surface = std::move(ref.surface);
            projectors[k].resize(0, 0);
            outcome[k].refined = true;
            // Only points inside the core's parameter box join the core; the
            // rest of a new row or column lies over the boundary ring or
            // beyond the data. Points closer than d_min to the patch data
            // are dropped too, since density control would remove them again.
            Vec2 lo = patch.params.front(), hi = lo;
            for (std::size_t l = 0; l < patch.core_idx.size(); ++l) {
              lo = lo.cwiseMin(patch.params[l]);
              hi = hi.cwiseMax(patch.params[l]);
            }
            auto crowded = [&](const Vec3& x) {
              auto near = [&](const Vec3& y) { return (x - y).norm() < result.d_min; };
              return std::any_of(pts.begin(), pts.end(), near) ||
                     std::any_of(outcome[k].new_points.begin(), outcome[k].new_points.end(),
                                 [&](const SynthesizedPoint& o) { return near(o.position); });
            };
            for (auto& sp : ref.new_points) {
              const bool inside = (sp.param.array() >= lo.array()).all() && (sp.param.array() <= hi.array()).all();
              if (inside && !crowded(sp.position)) outcome[k].new_points.push_back(std::move(sp));
            }
          }
        }
      });

      // Synthesized points join their patch's core, in patch order.
      for (std::size_t k = 0; k < patches.size(); ++k) {
        const auto& o = outcome[k];
        for (std::size_t l = 0; l < o.snapped.size(); ++l) cloud.positions[patches[k].core_idx[l]] = o.snapped[l];
        rec.gs_runs += o.gs_run;
        rec.gs_failures += o.gs_failed;
        rec.refinements += o.refined;
        if (o.new_points.empty()) continue;
        auto& patch = patches[k];
        const auto nc = static_cast<std::ptrdiff_t>(patch.core_idx.size());
        std::vector<Vec2> new_params;
        for (const auto& sp : o.new_points) {
          patch.core_idx.push_back(cloud.size());
          cloud.positions.push_back(sp.position);
          cloud.core_of.push_back(static_cast<int>(k));
          new_params.push_back(sp.param);
        }
        patch.params.insert(patch.params.begin() + nc, new_params.begin(), new_params.end());
        projectors[k].resize(0, 0);
      }
      if (rec.refinements > 0) refresh_fields(cloud, field);

      bool repatch = cfg.repatch_policy == RepatchPolicy::EveryKSteps && step % cfg.repatch_every == 0;
      std::vector<char> drop;
      std::vector<Vec3> inserted;
      if (cfg.adapt_density) {
        std::vector<DensityResult> dens(patches.size());
        parallel_for(static_cast<int>(patches.size()), [&](int k) {
          const auto& patch = patches[k];
          const std::span<const Vec2> core_params(patch.params.data(), patch.core_idx.size());
          const std::span<const Vec2> ring_params(patch.params.data() + patch.core_idx.size(), patch.bdy_idx.size());
          dens[k] = manage_density(patch.fitted(), core_params, result.d_min, result.d_max,
                                   cfg.refine.max_density_iters, ring_params);
        });
        drop.assign(cloud.size(), 0);
        for (std::size_t k = 0; k < patches.size(); ++k) {
          for (int l : dens[k].removed) drop[patches[k].core_idx[l]] = 1;
          for (const auto& sp : dens[k].inserted) inserted.push_back(sp.position);
          if (dens[k].changed() && cfg.repatch_policy == RepatchPolicy::OnDensityChange) repatch = true;
        }
      }

      if (repatch) {
        PointCloud next;
        next.time = cloud.time;
        for (int i = 0; i < cloud.size(); ++i) {
          if (drop.empty() || !drop[i]) next.positions.push_back(cloud.positions[i]);
        }
        next.positions.insert(next.positions.end(), inserted.begin(), inserted.end());
        auto rebuilt = build_fitted_patches(next, cfg.patching);
        cloud = std::move(next);
        patches = std::move(rebuilt);
        projectors.assign(patches.size(), Eigen::MatrixXd());
        refresh_fields(cloud, field);
        rec.repatched = true;
        ++result.repatches;
      }

      rec.seconds = std::chrono::duration<double>(Clock::now() - started).count();
      record(step, rec);

      const double patch_points_target = cfg.patching.m_c + cfg.patching.m_b;
      const bool collapsed = diameter_below(cloud.positions, cfg.extinction_factor * result.d_min);
      const bool unresolved = cloud.size() < cfg.resolution_factor * patch_points_target;
      const bool extinct = collapsed || unresolved;
      const bool last = step == nsteps || extinct;
      if (last || (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0)) {
        result.snapshots.push_back(take_snapshot(step, cloud, patches, diagnose(cloud, patches)));
      }
      if (extinct) {
        result.termination = Termination::Extinction;
        std::ostringstream why;
        if (collapsed) {
          why << "cloud diameter fell below " << cfg.extinction_factor << " * d_min";
        } else {
          why << "cloud of " << cloud.size() << " points is below " << cfg.resolution_factor << " patch sizes";
        }
        why << " at t = " << cloud.time;
        result.diagnostic = why.str();
        return result;
      }
    } catch (const Error& e) {
      result.termination = Termination::NumericalFailure;
      result.diagnostic = "step " + std::to_string(step) + " failed: " + e.what();
      result.snapshots.push_back(
          take_snapshot(step - 1, good_cloud, good_patches, diagnose(good_cloud, good_patches)));
      return result;
    }
  }
  return result;
}

}  // namespace mflow
