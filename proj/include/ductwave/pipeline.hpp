#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ductwave/errors.hpp"
#include "ductwave/pe_solver.hpp"
#include "ductwave/refractivity.hpp"

namespace ductwave {

inline constexpr std::string_view kToolVersion = "ductwave 1.0.0";

enum class Stage { GenProfiles, Simulate, BuildDataset, Evaluate, Compare, Report, All };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

/// A module error raised inside a stage; the original is nested.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message);
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct PipelineConfig {
  std::filesystem::path workspace;
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0: all available cores

  std::size_t profile_count = 50;
  /// Relative weights per family name; counts use largest remainders.
  std::map<std::string, double> family_mix = {
      {"evaporation", 0.5}, {"surface_trilinear", 0.2}, {"elevated", 0.2}, {"standard", 0.1}};
  /// Base solver settings; frequency and output ceiling are set per run.
  SolverConfig solver;
  double output_dz_low_m = 0.2;
  double output_dz_high_m = 1.0;
  std::vector<double> bands_hz = {3e9, 10e9};
  /// Bands simulated for the 300 m domain.
  std::vector<double> high_bands_hz = {3e9};

  double split_fraction = 0.824;
  double fdb_factor = 10.0;
  std::vector<int> experiments = {1, 2, 3, 4, 5, 6, 7, 8};
  std::uint64_t feature_bank_seed = 20240521;

  std::filesystem::path profiles_dir() const { return workspace / "profiles"; }
  std::filesystem::path domains_dir() const { return workspace / "domains"; }
  std::filesystem::path datasets_dir() const { return workspace / "datasets"; }
  std::filesystem::path predictions_dir() const { return workspace / "predictions"; }
  std::filesystem::path reports_dir() const { return workspace / "reports"; }

  /// Throws ConfigurationError on inconsistent values.
  void validate() const;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
/// Keys missing from `j` keep their defaults; unknown keys are an error.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// {seed, tool_version, config_hash}; the hash excludes workspace and jobs,
/// which do not change outputs.
nlohmann::json provenance(const PipelineConfig& config);

/// Dataset directory name for a variable and altitude, e.g. "F_dB-30m".
std::string dataset_name(std::string_view variable, int altitude_m);

struct PipelineResult {
  std::vector<Stage> stages;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs one stage, or every stage in order for Stage::All. Missing inputs
/// raise StageDependencyError naming the stage that produces them; other
/// module errors arrive as StageError with the original nested.
PipelineResult run_pipeline(const PipelineConfig& config, Stage stage);

}  // namespace ductwave
