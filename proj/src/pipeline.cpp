#include "ductwave/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ductwave/dataset.hpp"
#include "ductwave/experiments.hpp"
#include "ductwave/parallel.hpp"
#include "ductwave/raster_io.hpp"
#include "ductwave/rng.hpp"

namespace ductwave {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::GenProfiles: return "gen-profiles";
    case Stage::Simulate: return "simulate";
    case Stage::BuildDataset: return "build-dataset";
    case Stage::Evaluate: return "evaluate";
    case Stage::Compare: return "compare";
    case Stage::Report: return "report";
    case Stage::All: return "all";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::GenProfiles, Stage::Simulate, Stage::BuildDataset, Stage::Evaluate, Stage::Compare,
                 Stage::Report, Stage::All}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigurationError("unknown stage '" + std::string(name) + "'");
}

StageError::StageError(Stage stage, const std::string& message)
    : Error("stage " + std::string(to_string(stage)) + ": " + message), stage_(stage) {}

void PipelineConfig::validate() const {
  if (workspace.empty()) throw ConfigurationError("workspace path is empty");
  if (profile_count < 2) throw ConfigurationError("profile_count must be at least 2");
  if (family_mix.empty()) throw ConfigurationError("family_mix is empty");
  double total = 0.0;
  for (const auto& [name, w] : family_mix) {
    parse_profile_family(name);
    if (!(w >= 0.0)) throw ConfigurationError("family weight for " + name + " must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigurationError("family weights sum to zero");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigurationError("split_fraction must lie in (0, 1)");
  if (fdb_factor != 10.0 && fdb_factor != 20.0) throw ConfigurationError("fdb_factor must be 10 or 20");
  if (bands_hz.empty()) throw ConfigurationError("bands_hz is empty");
  if (!(output_dz_low_m > 0.0 && output_dz_high_m > 0.0)) throw ConfigurationError("output dz must be positive");
  const std::set<fs::path> dirs = {profiles_dir(), domains_dir(), datasets_dir(), predictions_dir(), reports_dir()};
  if (dirs.size() != 5) throw ConfigurationError("pipeline paths must be distinct");
  for (int id : experiments) {
    const auto& spec = experiment_spec(id);
    const auto& bands = spec.altitude == AltitudeDomain::Low30 ? bands_hz : high_bands_hz;
    for (double f : spec.frequencies_hz) {
      if (std::find(bands.begin(), bands.end(), f) == bands.end()) {
        throw ConfigurationError("experiment " + std::to_string(id) + " needs band " + band_label(f) +
                                 " at " + std::to_string(static_cast<int>(altitude_meters(spec.altitude))) +
                                 " m, which is not simulated");
      }
    }
  }
}

json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"workspace", c.workspace.string()},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"profile_count", c.profile_count},
          {"family_mix", c.family_mix},
          {"solver", config_to_json(c.solver)},
          {"output_dz_low_m", c.output_dz_low_m},
          {"output_dz_high_m", c.output_dz_high_m},
          {"bands_hz", c.bands_hz},
          {"high_bands_hz", c.high_bands_hz},
          {"split_fraction", c.split_fraction},
          {"fdb_factor", c.fdb_factor},
          {"experiments", c.experiments},
          {"feature_bank_seed", c.feature_bank_seed}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig base) {
  if (!j.is_object()) throw ConfigurationError("pipeline config must be a JSON object");
  static const std::set<std::string> known = {
      "workspace",    "seed",           "jobs",       "profile_count",    "family_mix",
      "solver",       "output_dz_low_m", "output_dz_high_m", "bands_hz", "high_bands_hz",
      "split_fraction", "fdb_factor",   "experiments", "feature_bank_seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigurationError("unknown pipeline config key '" + key + "'");
  }
  try {
    if (j.contains("workspace")) base.workspace = j["workspace"].get<std::string>();
    base.seed = j.value("seed", base.seed);
    base.jobs = j.value("jobs", base.jobs);
    base.profile_count = j.value("profile_count", base.profile_count);
    if (j.contains("family_mix")) base.family_mix = j["family_mix"].get<std::map<std::string, double>>();
    if (j.contains("solver")) {
      json merged = config_to_json(base.solver);
      merged.merge_patch(j["solver"]);
      base.solver = config_from_json(merged);
    }
    base.output_dz_low_m = j.value("output_dz_low_m", base.output_dz_low_m);
    base.output_dz_high_m = j.value("output_dz_high_m", base.output_dz_high_m);
    base.bands_hz = j.value("bands_hz", base.bands_hz);
    base.high_bands_hz = j.value("high_bands_hz", base.high_bands_hz);
    base.split_fraction = j.value("split_fraction", base.split_fraction);
    base.fdb_factor = j.value("fdb_factor", base.fdb_factor);
    base.experiments = j.value("experiments", base.experiments);
    base.feature_bank_seed = j.value("feature_bank_seed", base.feature_bank_seed);
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed pipeline config: ") + e.what());
  }
  return base;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

json provenance(const PipelineConfig& config) {
  json j = pipeline_config_to_json(config);
  j.erase("workspace");
  j.erase("jobs");
  return {{"seed", config.seed},
          {"tool_version", kToolVersion},
          {"solver_version", kSolverVersion},
          {"config_hash", format_checksum(text_crc32(j.dump()))}};
}

std::string dataset_name(std::string_view variable, int altitude_m) {
  return std::string(variable) + "-" + std::to_string(altitude_m) + "m";
}

namespace {

constexpr std::string_view kIndexFile = "index.json";

struct Context {
  const PipelineConfig& config;
  json prov;
  std::size_t jobs;
  PipelineResult& result;

  void wrote(const fs::path& p) { result.artifacts.push_back(p); }
};

void require(const fs::path& path, Stage needing, Stage producing) {
  if (!fs::exists(path)) {
    throw StageDependencyError("stage " + std::string(to_string(needing)) + " needs " + path.string() +
                               ", produced by stage " + std::string(to_string(producing)) + "; run it first");
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

void write_json(Context& ctx, const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  write_text_atomic(path, j.dump(1) + "\n");
  ctx.wrote(path);
}

std::string profile_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%04zu", i);
  return buf;
}

// Largest-remainder apportionment of `total` over the weights, ties broken by
// name order.
std::map<std::string, std::size_t> apportion(const std::map<std::string, double>& weights, std::size_t total) {
  double sum = 0.0;
  for (const auto& [name, w] : weights) sum += w;
  std::map<std::string, std::size_t> counts;
  std::vector<std::pair<double, std::string>> remainders;
  std::size_t assigned = 0;
  for (const auto& [name, w] : weights) {
    const double exact = static_cast<double>(total) * w / sum;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    counts[name] = whole;
    assigned += whole;
    remainders.emplace_back(exact - static_cast<double>(whole), name);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

void gen_profiles(Context& ctx) {
  const auto& c = ctx.config;
  const auto dir = c.profiles_dir();
  fs::remove_all(dir);
  fs::create_directories(dir);
  json index = json::array();
  std::size_t next = 0;
  for (const auto& [name, count] : apportion(c.family_mix, c.profile_count)) {
    if (count == 0) continue;
    const auto family = parse_profile_family(name);
    const auto spec = default_family_spec(family);
    const auto profiles = sample_profile_family(mix_seed(c.seed, 1000 + static_cast<std::uint64_t>(family)), spec, count);
    for (const auto& p : profiles) {
      const auto id = profile_id(next++);
      json j = profile_to_json(p);
      j["id"] = id;
      j["provenance"] = ctx.prov;
      write_json(ctx, dir / (id + ".json"), j);
      index.push_back({{"id", id}, {"family", name}, {"file", id + ".json"}});
    }
  }
  write_json(ctx, dir / kIndexFile,
             {{"kind", "profile_index"}, {"profiles", index}, {"synthetic", true}, {"provenance", ctx.prov}});
}

struct RunSpec {
  std::string run_id;
  std::string profile;
  double frequency_hz;
  int altitude_m;
};

void simulate(Context& ctx) {
  const auto& c = ctx.config;
  require(c.profiles_dir() / kIndexFile, Stage::Simulate, Stage::GenProfiles);
  const json index = read_json(c.profiles_dir() / kIndexFile);

  std::vector<RunSpec> runs;
  for (const auto& entry : index.at("profiles")) {
    const auto id = entry.at("id").get<std::string>();
    for (double f : c.bands_hz) runs.push_back({id + "-" + band_label(f) + "-30m", id, f, 30});
    for (double f : c.high_bands_hz) runs.push_back({id + "-" + band_label(f) + "-300m", id, f, 300});
  }

  const auto dir = c.domains_dir();
  fs::remove_all(dir);
  fs::create_directories(dir);
  parallel_for(runs.size(), ctx.jobs, [&](std::size_t i) {
    const auto& r = runs[i];
    const auto profile = load_profile(c.profiles_dir() / (r.profile + ".json"));
    SolverConfig cfg = c.solver;
    cfg.frequency_hz = r.frequency_hz;
    cfg.output_altitude_max_m = r.altitude_m;
    cfg.output_dz_m = r.altitude_m == 30 ? c.output_dz_low_m : c.output_dz_high_m;
    try {
      save_domain(run_pe(profile, cfg), dir / (r.run_id + ".dom"), ctx.prov);
    } catch (const Error& e) {
      std::throw_with_nested(std::runtime_error("run " + r.run_id + ": " + e.what()));
    }
  });

  json list = json::array();
  for (const auto& r : runs) {
    ctx.wrote(dir / (r.run_id + ".dom"));
    list.push_back({{"run_id", r.run_id},
                    {"profile", r.profile},
                    {"frequency_hz", r.frequency_hz},
                    {"altitude_m", r.altitude_m},
                    {"file", r.run_id + ".dom"}});
  }
  write_json(ctx, dir / kIndexFile,
             {{"kind", "domain_index"}, {"runs", list}, {"solver", config_to_json(c.solver)}, {"provenance", ctx.prov}});
}

void build_datasets(Context& ctx) {
  const auto& c = ctx.config;
  require(c.domains_dir() / kIndexFile, Stage::BuildDataset, Stage::Simulate);
  const json index = read_json(c.domains_dir() / kIndexFile);

  std::map<std::string, ModifiedRefractivityProfile> profiles;
  for (const auto& run : index.at("runs")) {
    const auto pid = run.at("profile").get<std::string>();
    if (!profiles.contains(pid)) profiles.emplace(pid, load_profile(c.profiles_dir() / (pid + ".json")));
  }

  json generation = pipeline_config_to_json(c);
  generation.erase("workspace");
  generation.erase("jobs");

  for (int altitude : {30, 300}) {
    std::vector<DatasetCase> cases;
    for (const auto& run : index.at("runs")) {
      if (run.at("altitude_m").get<int>() != altitude) continue;
      const auto pid = run.at("profile").get<std::string>();
      const double f = run.at("frequency_hz").get<double>();
      const auto file = c.domains_dir() / run.at("file").get<std::string>();
      cases.push_back({pid + "-" + band_label(f), pid, f, profiles.at(pid), [file] { return load_domain(file); }});
    }
    if (cases.empty()) continue;
    for (auto variable : {GainVariable::F, GainVariable::FdB}) {
      BuildOptions options;
      options.split_fraction = c.split_fraction;
      options.seed = mix_seed(c.seed, 2000);
      options.scheme = normalization_scheme(variable, altitude_domain_from_meters(altitude));
      options.target.decibel.factor = c.fdb_factor;
      options.jobs = ctx.jobs;
      options.generation = generation;
      options.provenance = ctx.prov;
      const auto dir = c.datasets_dir() / dataset_name(to_string(variable), altitude);
      fs::remove_all(dir);
      const auto manifest = build_dataset(cases, options, dir);
      for (const auto& [id, e] : manifest.cases) ctx.wrote(dir / e.file);
      ctx.wrote(dir / kManifestFile);
    }
  }
}

fs::path dataset_dir_for(const PipelineConfig& c, const ExperimentSpec& spec) {
  return c.datasets_dir() / dataset_name(to_string(spec.variable), static_cast<int>(altitude_meters(spec.altitude)));
}

std::vector<std::string> prediction_sets(const fs::path& exp_dir) {
  std::vector<std::string> names;
  if (!fs::exists(exp_dir)) return names;
  for (const auto& entry : fs::directory_iterator(exp_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / kPredictionManifest)) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

fs::path exp_dir(const fs::path& root, int id) { return root / ("exp" + std::to_string(id)); }

void evaluate(Context& ctx) {
  const auto& c = ctx.config;
  for (int id : c.experiments) {
    require(dataset_dir_for(c, experiment_spec(id)) / kManifestFile, Stage::Evaluate, Stage::BuildDataset);
  }
  const FeatureBank bank(c.feature_bank_seed);
  json evaluated = json::object();
  for (int id : c.experiments) {
    const auto& spec = experiment_spec(id);
    const auto data = DatasetView::open(dataset_dir_for(c, spec));
    const auto pred_root = exp_dir(c.predictions_dir(), id);
    for (auto set : {perfect_predictions(spec, data), mean_image_baseline(spec, data)}) {
      set.provenance = ctx.prov;
      const auto dir = pred_root / set.name;
      fs::remove_all(dir);
      write_prediction_set(set, dir);
      ctx.wrote(dir / kPredictionManifest);
    }
    json sets = json::array();
    for (const auto& name : prediction_sets(pred_root)) {
      const auto predictions = load_prediction_set(pred_root / name);
      auto report = run_experiment(spec, data, predictions, bank, ctx.jobs);
      report.prediction_set = name;
      const auto out = exp_dir(c.reports_dir(), id) / name;
      json j = report_to_json(report);
      j["spec"] = spec_to_json(spec);
      j["model"] = predictions.model;
      j["provenance"] = ctx.prov;
      write_json(ctx, out / "report.json", j);
      fs::create_directories(out);
      write_text_atomic(out / "metrics.csv", metrics_csv({&report}));
      ctx.wrote(out / "metrics.csv");
      sets.push_back(name);
    }
    evaluated[std::to_string(id)] = sets;
  }
  write_json(ctx, c.reports_dir() / "evaluation.json",
             {{"kind", "evaluation_index"}, {"experiments", evaluated}, {"provenance", ctx.prov}});
}

// F experiment -> F_dB experiment sharing altitude and bands.
int decibel_counterpart(int id) {
  switch (id) {
    case 1: return 4;
    case 2: return 5;
    case 3: return 6;
    case 7: return 8;
    default: return 0;
  }
}

void compare(Context& ctx) {
  const auto& c = ctx.config;
  require(c.reports_dir() / "evaluation.json", Stage::Compare, Stage::Evaluate);
  const FeatureBank bank(c.feature_bank_seed);
  DecibelOptions decibel;
  decibel.factor = c.fdb_factor;
  json index = json::array();
  for (int id : c.experiments) {
    const int counterpart = decibel_counterpart(id);
    if (counterpart == 0) continue;
    const auto& spec = experiment_spec(id);
    const auto& cspec = experiment_spec(counterpart);
    require(dataset_dir_for(c, cspec) / kManifestFile, Stage::Compare, Stage::BuildDataset);
    const auto f_data = DatasetView::open(dataset_dir_for(c, spec));
    const auto fdb_data = DatasetView::open(dataset_dir_for(c, cspec));
    for (const auto& name : prediction_sets(exp_dir(c.predictions_dir(), id))) {
      const auto f_preds = load_prediction_set(exp_dir(c.predictions_dir(), id) / name);
      std::optional<PredictionSet> native;
      const auto native_dir = exp_dir(c.predictions_dir(), counterpart) / name;
      if (fs::exists(native_dir / kPredictionManifest)) native = load_prediction_set(native_dir);
      auto report = convert_and_compare(f_preds, f_data, fdb_data, bank, decibel, native ? &*native : nullptr, ctx.jobs);
      report.converted.prediction_set = name;
      const auto out = c.reports_dir() / "compare" / ("exp" + std::to_string(id) + "-to-exp" + std::to_string(counterpart));
      json j = conversion_to_json(report);
      j["provenance"] = ctx.prov;
      write_json(ctx, out / (name + ".json"), j);
      write_text_atomic(out / (name + ".csv"), metrics_csv({&report.converted}));
      ctx.wrote(out / (name + ".csv"));
      index.push_back({{"from", id}, {"to", counterpart}, {"prediction_set", name},
                       {"file", (out / (name + ".json")).lexically_relative(c.reports_dir()).string()}});
    }
  }
  write_json(ctx, c.reports_dir() / "compare" / kIndexFile,
             {{"kind", "comparison_index"}, {"comparisons", index}, {"provenance", ctx.prov}});
}

void write_pgm(const fs::path& path, const Raster& r) {
  std::string data = "P5\n" + std::to_string(r.cols()) + " " + std::to_string(r.rows()) + "\n255\n";
  data.reserve(data.size() + r.size());
  // Surface row at the bottom of the picture.
  for (std::size_t row = r.rows(); row-- > 0;) {
    for (std::size_t col = 0; col < r.cols(); ++col) {
      const double v = std::clamp(static_cast<double>(r(row, col)), 0.0, 1.0);
      data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  fs::create_directories(path.parent_path());
  write_text_atomic(path, data);
}

std::string format_row(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

void report(Context& ctx) {
  const auto& c = ctx.config;
  require(c.reports_dir() / "evaluation.json", Stage::Report, Stage::Evaluate);
  const json evaluated = read_json(c.reports_dir() / "evaluation.json");

  std::map<std::string, std::map<int, ExperimentReport>> by_set;
  for (const auto& [key, sets] : evaluated.at("experiments").items()) {
    const int id = std::stoi(key);
    for (const auto& name : sets) {
      const auto path = exp_dir(c.reports_dir(), id) / name.get<std::string>() / "report.json";
      require(path, Stage::Report, Stage::Evaluate);
      by_set[name.get<std::string>()].emplace(id, report_from_json(read_json(path)));
    }
  }

  std::ostringstream tables;
  json summary = json::object();
  json significance = json::object();
  for (const auto& [name, reports] : by_set) {
    tables << "Prediction set: " << name << "\n\n";
    tables << "Average metrics per experiment\n";
    tables << format_row("%-4s %-5s %-9s %-6s %6s %12s %12s %12s\n", "Exp", "Var", "Altitude", "Bands", "Cases", "MSE",
                         "FID", "SSIM");
    json rows = json::object();
    for (const auto& [id, r] : reports) {
      const auto& spec = experiment_spec(id);
      std::string bands;
      for (double f : spec.frequencies_hz) bands += (bands.empty() ? "" : "+") + band_label(f);
      tables << format_row("%-4d %-5s %-9s %-6s %6zu %12.6g %12.6g %12.6g\n", id,
                           std::string(to_string(spec.variable)).c_str(),
                           (std::to_string(static_cast<int>(altitude_meters(spec.altitude))) + " m").c_str(),
                           bands.c_str(), r.overall.count, r.overall.mse, r.overall.fid, r.overall.ssim);
      rows[std::to_string(id)] = report_to_json(r);
      rows[std::to_string(id)].erase("cases");
    }
    tables << "\nPer-frequency metrics for dual-frequency experiments\n";
    tables << format_row("%-4s %-5s %6s %12s %12s %12s\n", "Exp", "Band", "Cases", "MSE", "FID", "SSIM");
    for (const auto& [id, r] : reports) {
      if (!experiment_spec(id).dual_frequency()) continue;
      for (const auto& [f, m] : r.per_frequency) {
        tables << format_row("%-4d %-5s %6zu %12.6g %12.6g %12.6g\n", id, band_label(f).c_str(), m.count, m.mse, m.fid,
                             m.ssim);
      }
    }
    bool have_pairs = true;
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& [a, b] : significance_pair_ids()) {
      have_pairs = have_pairs && reports.contains(a) && reports.contains(b);
      if (have_pairs) smallest = std::min({smallest, reports.at(a).cases.size(), reports.at(b).cases.size()});
    }
    if (have_pairs && smallest < 2) {
      tables << "\nWelch t-tests skipped: an experiment has fewer than two test cases\n";
      significance[name] = {{"skipped", "fewer than two test cases"}};
    } else if (have_pairs) {
      const auto tests = significance_pairs(reports);
      tables << "\nWelch two-sided t-tests\n";
      tables << format_row("%-7s %-6s %12s %12s %12s\n", "Pair", "Metric", "t", "df", "p");
      for (const auto& t : tests) {
        tables << format_row("%d & %-3d %-6s %12.6g %12.6g %12.6g%s\n", t.experiment_a, t.experiment_b, t.metric.c_str(),
                             t.test.t_statistic, t.test.degrees_of_freedom, t.test.p_value,
                             t.test.degenerate ? "  (degenerate)" : "");
      }
      significance[name] = significance_to_json(tests);
    }
    tables << "\n";
    summary[name] = rows;
  }
  tables << "FID values are Fréchet distances over a fixed random filter bank (seed " << c.feature_bank_seed
         << "); they are not comparable to pretrained-network FID.\n";

  json warnings = json::array();
  for (const auto& entry : fs::directory_iterator(c.datasets_dir())) {
    if (!fs::exists(entry.path() / kManifestFile)) continue;
    const auto m = load_manifest(entry.path() / kManifestFile);
    double clamp = 0.0;
    for (const auto& [id, e] : m.cases) clamp += e.target_clamp_fraction;
    clamp /= static_cast<double>(std::max<std::size_t>(m.cases.size(), 1));
    if (clamp > 0.5) {
      warnings.push_back(entry.path().filename().string() + ": normalization clamps " +
                         format_row("%.1f", 100.0 * clamp) + "% of target pixels");
    }
  }
  std::sort(warnings.begin(), warnings.end());
  if (!warnings.empty()) {
    tables << "\nWarnings\n";
    for (const auto& w : warnings) tables << "  " << w.get<std::string>() << "\n";
  }

  const auto dir = c.reports_dir();
  write_text_atomic(dir / "tables.txt", tables.str());
  ctx.wrote(dir / "tables.txt");
  write_json(ctx, dir / "summary.json",
             {{"kind", "summary"},
              {"experiments", summary},
              {"significance", significance},
              {"warnings", warnings},
              {"fid_feature_bank_seed", c.feature_bank_seed},
              {"provenance", ctx.prov}});

  // Difference rasters for the first test case of every evaluated set.
  for (const auto& [name, reports] : by_set) {
    for (const auto& [id, r] : reports) {
      if (r.cases.empty()) continue;
      const auto& case_id = r.cases.front().value.case_id;
      const auto data = DatasetView::open(dataset_dir_for(c, experiment_spec(id)));
      const auto preds = load_prediction_set(exp_dir(c.predictions_dir(), id) / name);
      const auto target = data.sample(case_id).target;
      const auto& pred = preds.rasters.at(case_id);
      Raster diff(target.rows(), target.cols());
      for (std::size_t i = 0; i < diff.size(); ++i) diff.values()[i] = std::abs(pred.values()[i] - target.values()[i]);
      const auto base = dir / "figures" / ("exp" + std::to_string(id)) / (name + "-" + case_id);
      for (const auto& [suffix, raster] : {std::pair{"-target.pgm", &target}, {"-prediction.pgm", &pred}, {"-diff.pgm", &diff}}) {
        write_pgm(base.string() + suffix, *raster);
        ctx.wrote(base.string() + suffix);
      }
    }
  }
}

void run_stage(Context& ctx, Stage stage) {
  try {
    switch (stage) {
      case Stage::GenProfiles: gen_profiles(ctx); break;
      case Stage::Simulate: simulate(ctx); break;
      case Stage::BuildDataset: build_datasets(ctx); break;
      case Stage::Evaluate: evaluate(ctx); break;
      case Stage::Compare: compare(ctx); break;
      case Stage::Report: report(ctx); break;
      case Stage::All: break;
    }
  } catch (const StageDependencyError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StageError(stage, e.what()));
  }
  ctx.result.stages.push_back(stage);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, Stage stage) {
  config.validate();
  PipelineResult result;
  Context ctx{config, provenance(config), config.jobs == 0 ? default_jobs() : config.jobs, result};
  fs::create_directories(config.workspace);
  if (stage == Stage::All) {
    for (auto s : {Stage::GenProfiles, Stage::Simulate, Stage::BuildDataset, Stage::Evaluate, Stage::Compare,
                   Stage::Report}) {
      run_stage(ctx, s);
    }
  } else {
    run_stage(ctx, stage);
  }
  return result;
}

}  // namespace ductwave
