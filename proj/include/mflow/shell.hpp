#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mflow/flows.hpp"
#include "mflow/scenarios.hpp"

namespace mflow {

// Git blob hash: SHA-1 over "blob <size>\0" followed by the bytes, as 40 hex digits.
std::string content_hash(const std::string& bytes);

// Hash of the canonical (sorted-key, compact) serialization of a configuration.
std::string config_hash(const nlohmann::json& config);

// Snapshot CSV: "# manifest <hash>" line, then a header row
// x,y,z[,u][,w] and one row per point.
void write_snapshot_csv(const std::filesystem::path& path, const Snapshot& snap, const std::string& hash);

// Binary little-endian PLY with float x y z nx ny nz per vertex.
void write_snapshot_ply(const std::filesystem::path& path, const Snapshot& snap, const std::string& hash);

// Per-patch diagnostics: patch,kappa,interp_error,eps_tilde,points.
void write_patch_csv(const std::filesystem::path& path, const Snapshot& snap, const std::string& hash);

// Columns t,r_numeric,r_analytic; r_analytic is "nan" when no closed form applies.
void write_radius_csv(const std::filesystem::path& path, const std::vector<StepRecord>& steps,
                      std::optional<double> sphere_r0, const std::string& hash);

struct FitErrors {
  int n_points = 0;
  int m_c = 0;
  double err_normal = 0.0;  // RMS of |n_est - n_exact| over points
  double err_H = 0.0;       // RMS of |H_est - H_exact| over points, average convention
  int patches = 0;
  int worse_kappa = 0;      // patches with kappa(omega*) > kappa(0); expected 0
};

// Static accuracy of the patch pipeline at t = 0 against the analytic shape.
FitErrors measure_fit_errors(const ShapeSpec& shape, const PatchingConfig& cfg);

void write_fit_csv(const std::filesystem::path& path, const std::vector<FitErrors>& rows, const std::string& hash);

// Max/min extent of a cloud along its principal (covariance) axes. Extents
// do not depend on how densely each region is sampled.
double anisotropy_ratio(const std::vector<Vec3>& points);

struct RunSpec {
  std::string command;
  ShapeSpec shape;
  EvolutionConfig evolution;
  std::optional<FieldProvider> field;
  bool write_ply = false;
  std::filesystem::path out_dir = "out";
};

nlohmann::json to_json(const RunSpec& spec);

struct RunReport {
  EvolutionResult result;
  std::string hash;
  double seconds = 0.0;
};

// Samples the shape, evolves it and writes snapshots, patch diagnostics, the
// radius series and manifest.json into out_dir.
RunReport run_and_write(const RunSpec& spec);

}  // namespace mflow
