// Command-line driver for the profile -> simulation -> dataset -> evaluation
// pipeline.

#include <CLI11.hpp>
#include <cstdlib>
#include <exception>
#include <iostream>

#include "ductwave/pipeline.hpp"

namespace {

void print_error(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_error(inner, depth + 1);
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refractivity scenarios, split-step PE propagation fields, image dataset and surrogate evaluation"};
  std::string config_path;
  std::string stage_name = "all";
  std::string workspace;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  int experiment = 0;
  double fdb_factor = 0.0;

  app.add_option("--config", config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--stage", stage_name, "gen-profiles, simulate, build-dataset, evaluate, compare, report or all")
      ->check(CLI::IsMember({"gen-profiles", "simulate", "build-dataset", "evaluate", "compare", "report", "all"}));
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
  auto* exp_opt = app.add_option("--experiment", experiment, "Restrict evaluation to one experiment")
                      ->check(CLI::Range(1, 8));
  auto* fdb_opt = app.add_option("--fdb-factor", fdb_factor, "Multiplier of log10 F in the dB conversion")
                      ->check(CLI::IsMember({10.0, 20.0}));
  auto* ws_opt = app.add_option("--workspace", workspace, "Workspace directory (default: $DUCTWAVE_WORKSPACE)");
  CLI11_PARSE(app, argc, argv);

  try {
    ductwave::PipelineConfig config;
    if (!config_path.empty()) config = ductwave::load_pipeline_config(config_path);
    if (*ws_opt) {
      config.workspace = workspace;
    } else if (config.workspace.empty()) {
      if (const char* env = std::getenv("DUCTWAVE_WORKSPACE")) config.workspace = env;
    }
    if (config.workspace.empty()) {
      std::cerr << "error: no workspace; pass --workspace, set it in the config or set DUCTWAVE_WORKSPACE\n";
      return 2;
    }
    if (*seed_opt) config.seed = seed;
    if (*jobs_opt) config.jobs = jobs;
    if (*exp_opt) config.experiments = {experiment};
    if (*fdb_opt) config.fdb_factor = fdb_factor;

    const auto result = ductwave::run_pipeline(config, ductwave::parse_stage(stage_name));
    for (auto s : result.stages) std::cout << "completed " << ductwave::to_string(s) << "\n";
    std::cout << result.artifacts.size() << " artifacts under " << config.workspace.string() << "\n";
  } catch (const std::exception& e) {
    print_error(e);
    return 1;
  }
  return 0;
}
