#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ductwave/pe_solver.hpp"
#include "ductwave/propagation_factor.hpp"
#include "ductwave/raster.hpp"
#include "ductwave/refractivity.hpp"

namespace ductwave {

inline constexpr int kDatasetSchemaVersion = 1;

enum class GainVariable { F, FdB };
enum class AltitudeDomain { Low30, High300 };
enum class RasterRole { Input, Target };

std::string_view to_string(GainVariable v);
GainVariable parse_gain_variable(std::string_view s);
double altitude_meters(AltitudeDomain a);
AltitudeDomain altitude_domain_from_meters(double meters);

/// "S" for 3 GHz, "X" for 10 GHz, otherwise the frequency in Hz.
std::string band_label(double frequency_hz);

/// Affine map x' = (x - offset) / scale for the input (M) and target
/// (gain variable) rasters.
struct NormalizationScheme {
  GainVariable variable = GainVariable::F;
  AltitudeDomain altitude = AltitudeDomain::Low30;
  double input_offset = 0.0;
  double input_scale = 1.0;
  double target_offset = 0.0;
  double target_scale = 1.0;

  bool operator==(const NormalizationScheme&) const = default;
};

/// The four fixed schemes: M offset/scale 288/181 (30 m) or 282/187 (300 m);
/// F scaled by 1/16.45; F_dB mapped by (F_dB + 90.01) / -102.17.
NormalizationScheme normalization_scheme(GainVariable variable, AltitudeDomain altitude);

nlohmann::json scheme_to_json(const NormalizationScheme& s);
NormalizationScheme scheme_from_json(const nlohmann::json& j);

struct SampleTag {
  GainVariable variable;
  AltitudeDomain altitude;
};

struct NormalizedRaster {
  Raster raster;
  /// Fraction of pixels that fell outside [0, 1] and were clamped.
  double clamp_fraction = 0.0;
};

/// Scalar forms of the affine map, without clamping.
double normalize_value(double x, const NormalizationScheme& scheme, RasterRole role);
double denormalize_value(double y, const NormalizationScheme& scheme, RasterRole role);

NormalizedRaster normalize(const Raster& raster, const NormalizationScheme& scheme, RasterRole role,
                           const SampleTag& sample);
Raster denormalize(const Raster& raster, const NormalizationScheme& scheme, RasterRole role);

struct RasterizedInput {
  Raster raster;
  /// True when altitudes outside the profile's levels were extrapolated.
  bool extrapolated = false;
};

/// 256 equally spaced altitudes from 0 to the domain ceiling (row 0 at the
/// surface), linearly interpolated from the profile and tiled across 256
/// range columns.
RasterizedInput rasterize_input(const ModifiedRefractivityProfile& profile, double altitude_domain_m);

enum class DecibelOrder { ConvertThenResample, ResampleThenConvert };

struct TargetOptions {
  DecibelOptions decibel;
  DecibelOrder order = DecibelOrder::ConvertThenResample;
};

/// Bilinear resampling of |F| (or F_dB) onto 256 equally spaced altitudes
/// (rows) by 256 equally spaced ranges (columns) over the domain extents.
Raster rasterize_target(const PropagationDomain& domain, GainVariable variable, const TargetOptions& options = {});

struct SampleRecord {
  std::string case_id;
  std::string group_id;
  double frequency_hz = 0.0;
  GainVariable variable = GainVariable::F;
  AltitudeDomain altitude = AltitudeDomain::Low30;
  NormalizationScheme scheme;
  Raster input;
  Raster target;
  double input_clamp_fraction = 0.0;
  double target_clamp_fraction = 0.0;
  bool input_extrapolated = false;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Throws InvalidInputError when a raster is not 256x256, the input columns
/// differ, or a value is not finite.
void validate_sample(const SampleRecord& record);
void write_sample(const SampleRecord& record, const std::filesystem::path& path);
/// Throws CorruptionError on checksum/structure failures, VersionError on a
/// schema mismatch.
SampleRecord read_sample(const std::filesystem::path& path);

struct DatasetCase {
  std::string case_id;
  /// Cases sharing a group (same source profile) always land in the same split.
  std::string group_id;
  double frequency_hz = 0.0;
  ModifiedRefractivityProfile profile;
  std::function<PropagationDomain()> load_domain;
};

struct BuildOptions {
  double split_fraction = 0.824;
  std::uint64_t seed = 0;
  NormalizationScheme scheme;
  TargetOptions target;
  std::size_t jobs = 1;
  nlohmann::json generation = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
};

struct ManifestEntry {
  std::string group_id;
  double frequency_hz = 0.0;
  std::string file;
  double input_clamp_fraction = 0.0;
  double target_clamp_fraction = 0.0;
  bool input_extrapolated = false;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  std::uint64_t seed = 0;
  double split_fraction = 0.0;
  NormalizationScheme scheme;
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::map<std::string, ManifestEntry> cases;
  /// Keyed by band label.
  std::map<std::string, SplitCounts> counts;
  nlohmann::json generation = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();

  std::vector<double> frequencies() const;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const std::filesystem::path& path);

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kSampleDir = "samples";

/// Deterministic grouped, frequency-stratified split; writes one sample file
/// per case under `out_dir`/samples and commits `out_dir`/manifest.json last.
/// Samples written by a failed call are removed before the error propagates.
DatasetManifest build_dataset(const std::vector<DatasetCase>& cases, const BuildOptions& options,
                              const std::filesystem::path& out_dir);

}  // namespace ductwave
