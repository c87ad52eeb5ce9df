#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ductwave/dataset.hpp"
#include "ductwave/pipeline.hpp"

using namespace ductwave;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineConfig small_config(const std::string& name, std::size_t jobs) {
  PipelineConfig c;
  c.workspace = fs::temp_directory_path() / name;
  fs::remove_all(c.workspace);
  c.profile_count = 6;
  c.jobs = jobs;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("stage names") {
  for (auto s : {Stage::GenProfiles, Stage::Simulate, Stage::BuildDataset, Stage::Evaluate, Stage::Compare,
                 Stage::Report, Stage::All}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
  CHECK(parse_stage("gen-profiles") == Stage::GenProfiles);
  CHECK_THROWS_AS(parse_stage("train"), ConfigurationError);
}

TEST_CASE("config parsing") {
  PipelineConfig base;
  const auto j = pipeline_config_to_json(base);
  CHECK(pipeline_config_to_json(pipeline_config_from_json(j)) == j);
  CHECK_THROWS_AS(pipeline_config_from_json({{"sead", 4}}), ConfigurationError);
  auto bad = pipeline_config_from_json({{"fdb_factor", 15}});
  bad.workspace = "/tmp/ws";
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  bad = pipeline_config_from_json({{"experiments", {7}}, {"high_bands_hz", {10e9}}});
  bad.workspace = "/tmp/ws";
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  const auto patched = pipeline_config_from_json({{"solver", {{"range_step_m", 50.0}}}});
  CHECK(patched.solver.range_step_m == 50.0);
  CHECK(patched.solver.max_range_m == base.solver.max_range_m);

  auto other = base;
  other.jobs = 7;
  other.workspace = "/elsewhere";
  CHECK(provenance(other)["config_hash"] == provenance(base)["config_hash"]);
  other.seed = 2;
  CHECK(provenance(other)["config_hash"] != provenance(base)["config_hash"]);
  for (const char* key : {"seed", "tool_version", "solver_version", "config_hash"}) CHECK(provenance(base).contains(key));
}

TEST_CASE("stage ordering") {
  const auto c = small_config("ductwave_pipeline_order", 1);
  CHECK_THROWS_AS(run_pipeline(c, Stage::Evaluate), StageDependencyError);
  try {
    run_pipeline(c, Stage::Simulate);
    FAIL("expected a dependency error");
  } catch (const StageDependencyError& e) {
    CHECK(std::string(e.what()).find("gen-profiles") != std::string::npos);
  }
}

TEST_CASE("full pipeline is deterministic across job counts") {
  const auto a = small_config("ductwave_pipeline_a", 1);
  const auto b = small_config("ductwave_pipeline_b", 2);
  const auto ra = run_pipeline(a, Stage::All);
  run_pipeline(b, Stage::All);
  CHECK(ra.stages.size() == 6);

  for (const char* ds : {"F-30m", "F_dB-30m", "F-300m", "F_dB-300m"}) {
    const auto rel = fs::path("datasets") / ds / "manifest.json";
    REQUIRE(fs::exists(a.workspace / rel));
    CHECK(slurp(a.workspace / rel) == slurp(b.workspace / rel));
    const auto m = load_manifest(a.workspace / rel);
    CHECK(m.cases.size() == m.train.size() + m.test.size());
    for (const char* key : {"seed", "tool_version", "config_hash"}) CHECK(m.provenance.contains(key));
  }
  CHECK(load_manifest(a.workspace / "datasets/F-30m/manifest.json").cases.size() == 12);
  CHECK(load_manifest(a.workspace / "datasets/F-300m/manifest.json").cases.size() == 6);
  CHECK(slurp(a.workspace / "reports/summary.json") == slurp(b.workspace / "reports/summary.json"));
  CHECK(slurp(a.workspace / "reports/tables.txt") == slurp(b.workspace / "reports/tables.txt"));

  const auto report = nlohmann::json::parse(slurp(a.workspace / "reports/exp1/perfect/report.json"));
  CHECK(report["means"]["mse"] == 0.0);
  CHECK(report["means"]["ssim"] == 1.0);
  CHECK(fs::exists(a.workspace / "reports/compare/index.json"));
}
