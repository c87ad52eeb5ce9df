#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ductwave/dataset.hpp"
#include "ductwave/metrics.hpp"

namespace ductwave {

inline constexpr double kBandS = 3e9;
inline constexpr double kBandX = 10e9;

struct ExperimentSpec {
  int id = 0;
  GainVariable variable = GainVariable::F;
  AltitudeDomain altitude = AltitudeDomain::Low30;
  std::vector<double> frequencies_hz;
  int epochs_multiplier = 1;

  bool dual_frequency() const { return frequencies_hz.size() > 1; }
  bool covers(double frequency_hz) const;
};

/// The eight fixed experiment definitions, ordered by id.
const std::vector<ExperimentSpec>& define_experiments();
/// Throws ConfigurationError for ids outside 1..8.
const ExperimentSpec& experiment_spec(int id);
nlohmann::json spec_to_json(const ExperimentSpec& spec);

// Predictions -------------------------------------------------------------

inline constexpr int kPredictionSchemaVersion = 1;
inline constexpr std::string_view kPredictionManifest = "predictions.json";

/// Normalized 256x256 output rasters keyed by case id.
struct PredictionSet {
  std::string name;
  int experiment_id = 0;
  std::map<std::string, Raster> rasters;
  nlohmann::json model = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
};

/// One framed raster per case plus predictions.json, committed last.
void write_prediction_set(const PredictionSet& set, const std::filesystem::path& dir);
/// Validates shape, checksum and the [0, 1] value range of every raster.
PredictionSet load_prediction_set(const std::filesystem::path& dir);

/// Dataset on disk: manifest plus the directory holding it.
struct DatasetView {
  std::filesystem::path root;
  DatasetManifest manifest;

  static DatasetView open(const std::filesystem::path& root);
  SampleRecord sample(const std::string& case_id) const;
};

/// Test-split case ids of the dataset that fall in the experiment's bands.
/// Throws ConfigurationError when the dataset's scheme does not match the spec.
std::vector<std::string> experiment_test_cases(const ExperimentSpec& spec, const DatasetView& data);

/// Predictions equal to the stored targets.
PredictionSet perfect_predictions(const ExperimentSpec& spec, const DatasetView& data);

/// Per-pixel mean of the training targets of each band, assigned to every test
/// case of that band.
PredictionSet mean_image_baseline(const ExperimentSpec& spec, const DatasetView& data);

// Evaluation --------------------------------------------------------------

struct EvaluationCase {
  std::string case_id;
  double frequency_hz = 0.0;
  Raster target;
};

struct CaseMetric {
  MetricValue value;
  double frequency_hz = 0.0;
};

struct MetricMeans {
  std::size_t count = 0;
  double mse = 0.0;
  double ssim = 0.0;
  double fid = 0.0;
};

struct ExperimentReport {
  int experiment_id = 0;
  std::string prediction_set;
  /// Sorted by case id.
  std::vector<CaseMetric> cases;
  MetricMeans overall;
  /// Keyed by frequency; one row per band present.
  std::map<double, MetricMeans> per_frequency;
  /// Fréchet distance between the pooled prediction and target populations.
  double set_fid = 0.0;

  std::vector<double> population(std::string_view metric) const;
};

/// Metrics for every case; throws CompletenessError naming any case without a
/// prediction.
ExperimentReport evaluate_cases(int experiment_id, const std::vector<EvaluationCase>& cases,
                                const PredictionSet& predictions, const FeatureBank& bank, std::size_t jobs = 1);

ExperimentReport run_experiment(const ExperimentSpec& spec, const DatasetView& data,
                                const PredictionSet& predictions, const FeatureBank& bank, std::size_t jobs = 1);

struct SignificanceResult {
  int experiment_a = 0;
  int experiment_b = 0;
  std::string metric;
  TTestResult test;
};

/// Welch tests on the mse, ssim and fid populations of two reports.
std::vector<SignificanceResult> compare_reports(const ExperimentReport& a, const ExperimentReport& b);

/// The configured comparisons (1,2), (1,3), (4,5), (4,6), three metrics
/// each, in that order.
const std::vector<std::pair<int, int>>& significance_pair_ids();
std::vector<SignificanceResult> significance_pairs(const std::map<int, ExperimentReport>& reports);

// F to F_dB conversion study ----------------------------------------------

struct ConversionReport {
  /// Converted F predictions scored against the F_dB targets.
  ExperimentReport converted;
  /// Native F_dB predictions over the same case ids, when supplied.
  std::optional<ExperimentReport> native;
  /// Fraction of converted pixels clamped into [0, 1].
  double clamp_fraction = 0.0;
  std::map<std::string, double> case_clamp_fraction;
  DecibelOptions decibel;
};

/// Converts normalized F predictions to normalized F_dB images.
NormalizedRaster convert_prediction(const Raster& f_prediction, const NormalizationScheme& f_scheme,
                                    const NormalizationScheme& fdb_scheme, const DecibelOptions& decibel);

ConversionReport convert_and_compare(const PredictionSet& f_predictions, const DatasetView& f_data,
                                     const DatasetView& fdb_data, const FeatureBank& bank,
                                     const DecibelOptions& decibel = {},
                                     const PredictionSet* native_fdb_predictions = nullptr, std::size_t jobs = 1);

// Reporting ---------------------------------------------------------------

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
nlohmann::json significance_to_json(const std::vector<SignificanceResult>& results);
nlohmann::json conversion_to_json(const ConversionReport& report);

/// Per-case rows: case_id,frequency,experiment,mse,ssim,fid.
std::string metrics_csv(const std::vector<const ExperimentReport*>& reports);

}  // namespace ductwave
