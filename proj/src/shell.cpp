#include "mflow/shell.hpp"

#include <openssl/sha.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace mflow {

namespace fs = std::filesystem;

std::string content_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + std::string(1, '\0') + bytes;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::ostringstream hex;
  for (unsigned char c : digest) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
  return hex.str();
}

std::string config_hash(const nlohmann::json& config) { return content_hash(config.dump()); }

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  require(out.good(), ErrorKind::Usage, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_snapshot_csv(const fs::path& path, const Snapshot& snap, const std::string& hash) {
  auto out = open_out(path);
  const bool has_u = !snap.field_u.empty(), has_w = !snap.field_w.empty();
  out << "# manifest " << hash << " step " << snap.step << " t " << snap.time << "\n";
  out << "x,y,z" << (has_u ? ",u" : "") << (has_w ? ",w" : "") << "\n";
  for (std::size_t i = 0; i < snap.positions.size(); ++i) {
    const auto& p = snap.positions[i];
    out << p.x() << ',' << p.y() << ',' << p.z();
    if (has_u) out << ',' << snap.field_u[i];
    if (has_w) out << ',' << snap.field_w[i];
    out << '\n';
  }
}

void write_snapshot_ply(const fs::path& path, const Snapshot& snap, const std::string& hash) {
  static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");
  auto out = open_out(path, true);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "comment manifest " << hash << "\n";
  out << "element vertex " << snap.positions.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz"}) out << "property float " << name << "\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < snap.positions.size(); ++i) {
    const Vec3 n = i < snap.normals.size() ? snap.normals[i] : Vec3::Zero();
    const float v[6] = {float(snap.positions[i].x()), float(snap.positions[i].y()), float(snap.positions[i].z()),
                        float(n.x()), float(n.y()), float(n.z())};
    out.write(reinterpret_cast<const char*>(v), sizeof v);
  }
}

void write_patch_csv(const fs::path& path, const Snapshot& snap, const std::string& hash) {
  auto out = open_out(path);
  out << "# manifest " << hash << " step " << snap.step << " t " << snap.time << "\n";
  out << "patch,kappa,interp_error,eps_tilde,points\n";
  for (std::size_t k = 0; k < snap.patches.size(); ++k) {
    const auto& d = snap.patches[k];
    out << k << ',' << d.kappa << ',' << d.interp_error << ',' << d.eps_tilde << ',' << d.points << '\n';
  }
}

void write_radius_csv(const fs::path& path, const std::vector<StepRecord>& steps, std::optional<double> sphere_r0,
                      const std::string& hash) {
  auto out = open_out(path);
  out << "# manifest " << hash << "\n";
  out << "t,r_numeric,r_analytic\n";
  for (const auto& s : steps) {
    out << s.time << ',' << s.radius << ',';
    const double r2 = sphere_r0 ? *sphere_r0 * *sphere_r0 - 4.0 * s.time : -1.0;
    if (r2 >= 0.0) {
      out << std::sqrt(r2);
    } else {
      out << "nan";
    }
    out << '\n';
  }
}

FitErrors measure_fit_errors(const ShapeSpec& shape, const PatchingConfig& cfg) {
  PointCloud cloud = sample_shape(shape);
  const auto patches = build_fitted_patches(cloud, cfg);
  const auto geo = sample_point_geometry(cloud, patches);
  FitErrors out;
  out.n_points = cloud.size();
  out.m_c = cfg.m_c;
  out.patches = static_cast<int>(patches.size());
  double sn = 0.0, sh = 0.0;
  for (int i = 0; i < cloud.size(); ++i) {
    const auto ref = analytic_reference(shape, cloud.positions[i]);
    // The estimate is signed against the outward normal, so a convex
    // surface has negative H; the reference is positive there.
    sn += (geo.normals[i] - ref.normal).squaredNorm();
    const double dh = -geo.mean_curvature[i] - ref.mean_curvature;
    sh += dh * dh;
  }
  out.err_normal = std::sqrt(sn / cloud.size());
  out.err_H = std::sqrt(sh / cloud.size());
  for (const auto& p : patches) out.worse_kappa += p.report.kappa > p.report.kappa_at_zero;
  return out;
}

void write_fit_csv(const fs::path& path, const std::vector<FitErrors>& rows, const std::string& hash) {
  auto out = open_out(path);
  out << "# manifest " << hash << "\n";
  out << "N,m_c,err_normal,err_H\n";
  for (const auto& r : rows) out << r.n_points << ',' << r.m_c << ',' << r.err_normal << ',' << r.err_H << '\n';
}

double anisotropy_ratio(const std::vector<Vec3>& points) {
  require(points.size() >= 3, ErrorKind::NotEnoughPoints, "anisotropy needs at least 3 points");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - c) * (p - c).transpose();
  const Mat3 axes = Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvectors();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& p : points) {
    const Vec3 q = axes.transpose() * (p - c);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const Vec3 extent = hi - lo;
  require(extent.minCoeff() > 0.0, ErrorKind::DegeneratePatch, "flat cloud");
  return extent.maxCoeff() / extent.minCoeff();
}

nlohmann::json to_json(const RunSpec& spec) {
  const auto& e = spec.evolution;
  const auto& r = e.refine;
  auto tol = [](const LengthTol& t) {
    return nlohmann::json{{"value", t.value}, {"relative_to_patch_diagonal", t.relative}};
  };
  nlohmann::json j;
  j["command"] = spec.command;
  j["shape"] = {{"kind", to_string(spec.shape.kind)},
                {"n_points", spec.shape.n_points},
                {"seed", spec.shape.rng_seed}};
  switch (spec.shape.kind) {
    case ShapeKind::Sphere: j["shape"]["radius"] = spec.shape.radius; break;
    case ShapeKind::Ellipsoid:
      j["shape"]["axes"] = {spec.shape.axes.x(), spec.shape.axes.y(), spec.shape.axes.z()};
      break;
    case ShapeKind::Torus:
      j["shape"]["major"] = spec.shape.major;
      j["shape"]["minor"] = spec.shape.minor;
      break;
  }
  j["evolution"] = {{"dt", e.dt},
                    {"t_final", e.t_final},
                    {"snapshot_every", e.snapshot_every},
                    {"law", e.law.kind == LawKind::MCF ? "mcf" : "coupled"},
                    {"epsilon", e.law.epsilon},
                    {"delta", e.law.delta},
                    {"repatch_policy", e.repatch_policy == RepatchPolicy::OnDensityChange ? "on-density-change"
                                                                                           : "every-k-steps"},
                    {"repatch_every", e.repatch_every},
                    {"extinction_factor", e.extinction_factor},
                    {"resolution_factor", e.resolution_factor},
                    {"project_nets", e.project_nets},
                    {"snap_core", e.snap_core}};
  j["patching"] = {{"m_c", e.patching.m_c},
                   {"m_b", e.patching.m_b},
                   {"degree", e.patching.fit.degree},
                   {"omega_candidates", e.patching.fit.omega_candidates},
                   {"sigma_tol_rel", e.patching.fit.fit.sigma_tol_rel},
                   {"rank_tol_rel", e.patching.fit.fit.rank_tol_rel},
                   {"ls_ratio", e.patching.fit.fit.ls_ratio},
                   {"max_side", e.patching.fit.fit.max_side},
                   {"flip_orientation", e.patching.orient.flip_seeds}};
  j["refine"] = {{"eps_tol", tol(r.eps_tol)},
                 {"tau", tol(r.tau)},
                 {"alpha", r.alpha},
                 {"max_refine_iters", r.max_refine_iters},
                 {"max_gs_sweeps", r.max_gs_sweeps},
                 {"d_min", r.d_min},
                 {"d_max", r.d_max},
                 {"max_density_iters", r.max_density_iters}};
  if (spec.field) {
    const auto& f = *spec.field;
    j["field"] = {{"kind", to_string(f.kind)},
                  {"amplitude", f.amplitude},
                  {"center", {f.center.x(), f.center.y(), f.center.z()}},
                  {"width", f.width},
                  {"decay_time", std::isfinite(f.decay_time) ? nlohmann::json(f.decay_time) : nlohmann::json()}};
  }
  j["outputs"] = {{"ply", spec.write_ply}};
  return j;
}

RunReport run_and_write(const RunSpec& spec) {
  const auto started = std::chrono::steady_clock::now();
  const nlohmann::json config = to_json(spec);
  RunReport report;
  report.hash = config_hash(config);

  PointCloud cloud = sample_shape(spec.shape);
  report.result = evolve(std::move(cloud), spec.evolution, spec.field ? &*spec.field : nullptr);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const auto& res = report.result;
  fs::create_directories(spec.out_dir);
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : res.snapshots) {
    std::ostringstream stem;
    stem << "snapshot_" << std::setw(6) << std::setfill('0') << s.step;
    write_snapshot_csv(spec.out_dir / (stem.str() + ".csv"), s, report.hash);
    write_patch_csv(spec.out_dir / (stem.str() + "_patches.csv"), s, report.hash);
    if (spec.write_ply) write_snapshot_ply(spec.out_dir / (stem.str() + ".ply"), s, report.hash);
    snaps.push_back({{"step", s.step}, {"t", s.time}, {"points", s.positions.size()}, {"file", stem.str() + ".csv"}});
  }
  std::optional<double> r0;
  if (spec.shape.kind == ShapeKind::Sphere) r0 = spec.shape.radius;
  write_radius_csv(spec.out_dir / "radius.csv", res.steps, r0, report.hash);

  nlohmann::json timings = nlohmann::json::array();
  for (const auto& s : res.steps) {
    if (s.step > 0) timings.push_back(s.seconds);
  }
  nlohmann::json manifest;
  manifest["hash"] = report.hash;
  manifest["config"] = config;
  manifest["termination"] = to_string(res.termination);
  manifest["diagnostic"] = res.diagnostic;
  manifest["d_min"] = res.d_min;
  manifest["d_max"] = res.d_max;
  manifest["repatches"] = res.repatches;
  manifest["final_time"] = res.steps.empty() ? 0.0 : res.steps.back().time;
  manifest["snapshots"] = snaps;
  manifest["step_seconds"] = timings;
  manifest["wall_seconds"] = report.seconds;
  auto out = open_out(spec.out_dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  return report;
}

}  // namespace mflow
