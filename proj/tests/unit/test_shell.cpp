#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mflow/shell.hpp"

using namespace mflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mflow_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("shell") {

TEST_CASE("content hashes match git blob ids") {
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  const nlohmann::json a = {{"b", 1}, {"a", {1, 2}}};
  nlohmann::json b;
  b["a"] = {1, 2};
  b["b"] = 1;
  CHECK(config_hash(a) == config_hash(b));
  b["b"] = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("snapshot writers") {
  const auto dir = scratch("writers");
  Snapshot s;
  s.step = 3;
  s.time = 0.003;
  s.positions = {Vec3(1, 2, 3), Vec3(-0.5, 0.25, 0)};
  s.normals = {Vec3(0, 0, 1), Vec3(1, 0, 0)};
  s.field_u = {0.5, 0.25};
  s.patches = {PatchDiagnostics{.kappa = 2.0, .kappa_at_zero = 3.0, .interp_error = 1e-3, .eps_tilde = 1e-2, .points = 99}};
  write_snapshot_csv(dir / "s.csv", s, "abc");
  std::istringstream csv(slurp(dir / "s.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# manifest abc", 0) == 0);
  std::getline(csv, line);
  CHECK(line == "x,y,z,u");
  std::getline(csv, line);
  CHECK(line == "1,2,3,0.5");

  write_snapshot_ply(dir / "s.ply", s, "abc");
  const auto ply = slurp(dir / "s.ply");
  const auto end = ply.find("end_header\n");
  REQUIRE(end != std::string::npos);
  CHECK(ply.find("comment manifest abc") < end);
  CHECK(ply.find("format binary_little_endian 1.0") < end);
  CHECK(ply.size() - (end + 11) == 2 * 6 * sizeof(float));

  write_patch_csv(dir / "p.csv", s, "abc");
  std::istringstream pc(slurp(dir / "p.csv"));
  std::getline(pc, line);
  std::getline(pc, line);
  CHECK(line == "patch,kappa,interp_error,eps_tilde,points");
  std::getline(pc, line);
  CHECK(line == "0,2,0.001,0.01,99");

  std::vector<StepRecord> steps(2);
  steps[0].radius = 1.0;
  steps[1].time = 0.3;
  steps[1].radius = 0.1;
  write_radius_csv(dir / "r.csv", steps, 1.0, "abc");
  std::istringstream rc(slurp(dir / "r.csv"));
  std::getline(rc, line);
  CHECK(line == "# manifest abc");
  std::getline(rc, line);
  CHECK(line == "t,r_numeric,r_analytic");
  std::getline(rc, line);
  CHECK(line == "0,1,1");
  std::getline(rc, line);
  CHECK(line == "0.29999999999999999,0.10000000000000001,nan");
  fs::remove_all(dir);
}

TEST_CASE("anisotropy by principal extents") {
  ShapeSpec e;
  e.kind = ShapeKind::Ellipsoid;
  e.n_points = 3000;
  CHECK(anisotropy_ratio(sample_shape(e).positions) == doctest::Approx(2.0).epsilon(5e-3));
  // Oversampling one end moves the covariance but not the extents.
  std::vector<Vec3> box;
  for (int i = 0; i <= 10; ++i) box.emplace_back(0.4 * i, (i % 2) * 1.0, (i % 3 == 0) * 2.0);
  for (int k = 0; k < 50; ++k) box.emplace_back(0.0, 0.5, 1.0);
  const double r = anisotropy_ratio(box);
  CHECK(r >= 1.0);
  CHECK_THROWS_AS(anisotropy_ratio(std::vector<Vec3>(2)), Error);
  CHECK_THROWS_AS(anisotropy_ratio({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}), Error);
}

TEST_CASE("fit errors shrink with resolution") {
  ShapeSpec s;
  PatchingConfig cfg;
  s.n_points = 948;
  const auto coarse = measure_fit_errors(s, cfg);
  s.n_points = 1806;
  const auto fine = measure_fit_errors(s, cfg);
  CHECK(coarse.err_normal > fine.err_normal);
  CHECK(coarse.err_H > fine.err_H);
  CHECK(std::isfinite(fine.err_H));
  CHECK(fine.worse_kappa == 0);
}

TEST_CASE("runs are deterministic and carry the manifest hash") {
  RunSpec spec;
  spec.command = "evolve";
  spec.shape.n_points = 948;
  spec.evolution.t_final = 3e-3;
  spec.evolution.snapshot_every = 1;
  spec.write_ply = true;
  const auto dir_a = scratch("run_a"), dir_b = scratch("run_b");
  spec.out_dir = dir_a;
  const auto a = run_and_write(spec);
  spec.out_dir = dir_b;
  const auto b = run_and_write(spec);
  CHECK(a.hash == b.hash);
  CHECK(a.hash == config_hash(to_json(spec)));
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const auto name = entry.path().filename();
    const auto other = dir_b / name;
    REQUIRE(fs::exists(other));
    if (name == "manifest.json") continue;  // wall-clock timings differ
    ++files;
    const auto text = slurp(entry.path());
    CHECK(text == slurp(other));
    CHECK(text.find(a.hash) != std::string::npos);
  }
  CHECK(files == 4 * 3 + 1);
  const auto manifest = nlohmann::json::parse(slurp(dir_b / "manifest.json"));
  CHECK(manifest["hash"] == a.hash);
  CHECK(manifest["snapshots"].size() == 4u);
  CHECK(manifest["termination"] == "completed");
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

}  // TEST_SUITE
