#include "ductwave/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "ductwave/errors.hpp"
#include "ductwave/parallel.hpp"
#include "ductwave/raster_io.hpp"
#include "ductwave/rng.hpp"

namespace ductwave {

std::string_view to_string(GainVariable v) { return v == GainVariable::F ? "F" : "F_dB"; }

GainVariable parse_gain_variable(std::string_view s) {
  if (s == "F") return GainVariable::F;
  if (s == "F_dB") return GainVariable::FdB;
  throw ConfigurationError("unknown gain variable '" + std::string(s) + "'");
}

double altitude_meters(AltitudeDomain a) { return a == AltitudeDomain::Low30 ? 30.0 : 300.0; }

AltitudeDomain altitude_domain_from_meters(double meters) {
  if (meters == 30.0) return AltitudeDomain::Low30;
  if (meters == 300.0) return AltitudeDomain::High300;
  throw ConfigurationError("altitude domain must be 30 or 300 m");
}

std::string band_label(double frequency_hz) {
  if (frequency_hz == 3e9) return "S";
  if (frequency_hz == 10e9) return "X";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.0fHz", frequency_hz);
  return buf;
}

NormalizationScheme normalization_scheme(GainVariable variable, AltitudeDomain altitude) {
  NormalizationScheme s;
  s.variable = variable;
  s.altitude = altitude;
  if (altitude == AltitudeDomain::Low30) {
    s.input_offset = 288.0;
    s.input_scale = 181.0;
  } else {
    s.input_offset = 282.0;
    s.input_scale = 187.0;
  }
  if (variable == GainVariable::F) {
    s.target_offset = 0.0;
    s.target_scale = 16.45;
  } else {
    s.target_offset = -90.01;
    s.target_scale = -102.17;
  }
  return s;
}

nlohmann::json scheme_to_json(const NormalizationScheme& s) {
  return {{"variable", to_string(s.variable)},
          {"altitude_domain_m", altitude_meters(s.altitude)},
          {"input_offset", s.input_offset},
          {"input_scale", s.input_scale},
          {"target_offset", s.target_offset},
          {"target_scale", s.target_scale}};
}

NormalizationScheme scheme_from_json(const nlohmann::json& j) {
  NormalizationScheme s;
  s.variable = parse_gain_variable(j.at("variable").get<std::string>());
  s.altitude = altitude_domain_from_meters(j.at("altitude_domain_m").get<double>());
  s.input_offset = j.at("input_offset").get<double>();
  s.input_scale = j.at("input_scale").get<double>();
  s.target_offset = j.at("target_offset").get<double>();
  s.target_scale = j.at("target_scale").get<double>();
  return s;
}

double normalize_value(double x, const NormalizationScheme& scheme, RasterRole role) {
  return role == RasterRole::Input ? (x - scheme.input_offset) / scheme.input_scale
                                   : (x - scheme.target_offset) / scheme.target_scale;
}

double denormalize_value(double y, const NormalizationScheme& scheme, RasterRole role) {
  return role == RasterRole::Input ? y * scheme.input_scale + scheme.input_offset
                                   : y * scheme.target_scale + scheme.target_offset;
}

NormalizedRaster normalize(const Raster& raster, const NormalizationScheme& scheme, RasterRole role,
                           const SampleTag& sample) {
  if (scheme.variable != sample.variable || scheme.altitude != sample.altitude) {
    throw ConfigurationError("normalization scheme (" + std::string(to_string(scheme.variable)) + ", " +
                             std::to_string(altitude_meters(scheme.altitude)) + " m) does not match sample (" +
                             std::string(to_string(sample.variable)) + ", " +
                             std::to_string(altitude_meters(sample.altitude)) + " m)");
  }
  const double scale = role == RasterRole::Input ? scheme.input_scale : scheme.target_scale;
  if (scale == 0.0) throw ConfigurationError("normalization scale is zero");
  NormalizedRaster out{Raster(raster.rows(), raster.cols()), 0.0};
  std::size_t clamped = 0;
  auto dst = out.raster.values();
  const auto src = raster.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!std::isfinite(src[i])) throw DataError("normalize: non-finite value");
    double v = normalize_value(src[i], scheme, role);
    if (v < 0.0 || v > 1.0) {
      ++clamped;
      v = std::clamp(v, 0.0, 1.0);
    }
    dst[i] = static_cast<float>(v);
  }
  out.clamp_fraction = src.empty() ? 0.0 : static_cast<double>(clamped) / static_cast<double>(src.size());
  return out;
}

Raster denormalize(const Raster& raster, const NormalizationScheme& scheme, RasterRole role) {
  Raster out(raster.rows(), raster.cols());
  auto dst = out.values();
  const auto src = raster.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(denormalize_value(src[i], scheme, role));
  }
  return out;
}

RasterizedInput rasterize_input(const ModifiedRefractivityProfile& profile, double altitude_domain_m) {
  if (profile.levels().size() < 2) throw InvalidInputError("rasterize_input: profile needs at least two levels");
  if (!(altitude_domain_m > 0.0)) throw InvalidInputError("rasterize_input: altitude domain must be positive");
  RasterizedInput out{Raster(kImageSize, kImageSize), false};
  for (std::size_t r = 0; r < kImageSize; ++r) {
    const double z = altitude_domain_m * static_cast<double>(r) / static_cast<double>(kImageSize - 1);
    if (z > profile.top() || z < profile.bottom()) out.extrapolated = true;
    const auto m = static_cast<float>(profile.value_at(z));
    for (std::size_t c = 0; c < kImageSize; ++c) out.raster(r, c) = m;
  }
  return out;
}

namespace {

struct AxisPosition {
  std::size_t index;
  double weight;  // of index + 1
};

AxisPosition locate(const std::vector<double>& axis, double x) {
  if (x <= axis.front()) return {0, 0.0};
  if (x >= axis.back()) return {axis.size() - 2, 1.0};
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  const auto i1 = static_cast<std::size_t>(it - axis.begin());
  const double t = (x - axis[i1 - 1]) / (axis[i1] - axis[i1 - 1]);
  return {i1 - 1, t};
}

std::vector<double> even_axis(double lo, double hi) {
  std::vector<double> axis(kImageSize);
  for (std::size_t i = 0; i < kImageSize; ++i) {
    axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kImageSize - 1);
  }
  return axis;
}

}  // namespace

Raster rasterize_target(const PropagationDomain& domain, GainVariable variable, const TargetOptions& options) {
  const std::size_t nr = domain.n_range();
  const std::size_t na = domain.n_alt();
  if (nr < 2 || na < 2) throw InvalidInputError("rasterize_target: domain must be at least 2x2");
  if (domain.f_values.size() != nr * na) throw InvalidInputError("rasterize_target: grid does not match axes");

  const bool to_db = variable == GainVariable::FdB;
  const bool db_first = to_db && options.order == DecibelOrder::ConvertThenResample;
  std::vector<double> field(domain.f_values.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double f = domain.f_values[i];
    if (!std::isfinite(f)) throw DataError("rasterize_target: non-finite value in propagation domain");
    field[i] = db_first ? f_to_fdb(f, options.decibel).db : f;
  }

  const auto ranges = even_axis(domain.range_axis.front(), domain.range_axis.back());
  const auto alts = even_axis(domain.altitude_axis.front(), domain.altitude_axis.back());
  std::vector<AxisPosition> range_pos(kImageSize);
  for (std::size_t c = 0; c < kImageSize; ++c) range_pos[c] = locate(domain.range_axis, ranges[c]);

  Raster out(kImageSize, kImageSize);
  for (std::size_t r = 0; r < kImageSize; ++r) {
    const auto a = locate(domain.altitude_axis, alts[r]);
    for (std::size_t c = 0; c < kImageSize; ++c) {
      const auto& g = range_pos[c];
      const double v00 = field[g.index * na + a.index];
      const double v01 = field[g.index * na + a.index + 1];
      const double v10 = field[(g.index + 1) * na + a.index];
      const double v11 = field[(g.index + 1) * na + a.index + 1];
      double v = (1.0 - g.weight) * ((1.0 - a.weight) * v00 + a.weight * v01) +
                 g.weight * ((1.0 - a.weight) * v10 + a.weight * v11);
      if (to_db && !db_first) v = f_to_fdb(v, options.decibel).db;
      out(r, c) = static_cast<float>(v);
    }
  }
  return out;
}

void validate_sample(const SampleRecord& record) {
  for (const Raster* r : {&record.input, &record.target}) {
    if (r->rows() != kImageSize || r->cols() != kImageSize) {
      throw InvalidInputError("sample " + record.case_id + ": rasters must be 256x256, got " +
                              std::to_string(r->rows()) + "x" + std::to_string(r->cols()));
    }
    for (float v : r->values()) {
      if (!std::isfinite(v)) throw InvalidInputError("sample " + record.case_id + ": non-finite raster value");
    }
  }
  for (std::size_t row = 0; row < kImageSize; ++row) {
    for (std::size_t c = 1; c < kImageSize; ++c) {
      if (record.input(row, c) != record.input(row, 0)) {
        throw InvalidInputError("sample " + record.case_id + ": input raster is not range-homogeneous");
      }
    }
  }
}

void write_sample(const SampleRecord& record, const std::filesystem::path& path) {
  validate_sample(record);
  nlohmann::json header = {
      {"schema_version", kDatasetSchemaVersion},
      {"kind", "sample"},
      {"case_id", record.case_id},
      {"group_id", record.group_id},
      {"frequency_hz", record.frequency_hz},
      {"band", band_label(record.frequency_hz)},
      {"variable", to_string(record.variable)},
      {"altitude_domain_m", altitude_meters(record.altitude)},
      {"rows", kImageSize},
      {"cols", kImageSize},
      {"layout", "input then target, row-major f32 little-endian, row 0 at the surface"},
      {"scheme", scheme_to_json(record.scheme)},
      {"clamp_fraction", {{"input", record.input_clamp_fraction}, {"target", record.target_clamp_fraction}}},
      {"input_extrapolated", record.input_extrapolated},
      {"provenance", record.provenance},
  };
  const std::span<const float> payloads[] = {record.input.values(), record.target.values()};
  write_framed(path, std::move(header), payloads);
}

SampleRecord read_sample(const std::filesystem::path& path) {
  auto file = read_framed(path);
  const auto& h = file.header;
  if (h.value("kind", std::string()) != "sample") throw CorruptionError(path.string() + ": not a sample file");
  if (h.value("schema_version", -1) != kDatasetSchemaVersion) {
    throw VersionError(path.string() + ": sample schema version " + std::to_string(h.value("schema_version", -1)) +
                       " (expected " + std::to_string(kDatasetSchemaVersion) + ")");
  }
  const auto rows = h.at("rows").get<std::size_t>();
  const auto cols = h.at("cols").get<std::size_t>();
  if (file.payload.size() != 2 * rows * cols) throw CorruptionError(path.string() + ": payload size mismatch");
  SampleRecord rec;
  rec.case_id = h.at("case_id").get<std::string>();
  rec.group_id = h.value("group_id", rec.case_id);
  rec.frequency_hz = h.at("frequency_hz").get<double>();
  rec.variable = parse_gain_variable(h.at("variable").get<std::string>());
  rec.altitude = altitude_domain_from_meters(h.at("altitude_domain_m").get<double>());
  rec.scheme = scheme_from_json(h.at("scheme"));
  rec.input_clamp_fraction = h.at("clamp_fraction").at("input").get<double>();
  rec.target_clamp_fraction = h.at("clamp_fraction").at("target").get<double>();
  rec.input_extrapolated = h.value("input_extrapolated", false);
  rec.provenance = h.value("provenance", nlohmann::json::object());
  const auto mid = file.payload.begin() + static_cast<std::ptrdiff_t>(rows * cols);
  rec.input = Raster(rows, cols, std::vector<float>(file.payload.begin(), mid));
  rec.target = Raster(rows, cols, std::vector<float>(mid, file.payload.end()));
  try {
    validate_sample(rec);
  } catch (const InvalidInputError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  return rec;
}

std::vector<double> DatasetManifest::frequencies() const {
  std::set<double> f;
  for (const auto& [id, entry] : cases) f.insert(entry.frequency_hz);
  return {f.begin(), f.end()};
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json cases = nlohmann::json::object();
  for (const auto& [id, e] : m.cases) {
    cases[id] = {{"group_id", e.group_id},
                 {"frequency_hz", e.frequency_hz},
                 {"band", band_label(e.frequency_hz)},
                 {"file", e.file},
                 {"input_clamp_fraction", e.input_clamp_fraction},
                 {"target_clamp_fraction", e.target_clamp_fraction},
                 {"input_extrapolated", e.input_extrapolated}};
  }
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [band, c] : m.counts) counts[band] = {{"train", c.train}, {"test", c.test}};
  nlohmann::json freqs = nlohmann::json::array();
  for (double f : m.frequencies()) freqs.push_back(f);
  return {{"schema_version", m.schema_version},
          {"kind", "dataset_manifest"},
          {"seed", m.seed},
          {"split_fraction", m.split_fraction},
          {"scheme", scheme_to_json(m.scheme)},
          {"frequencies_hz", freqs},
          {"counts", counts},
          {"split", {{"train", m.train}, {"test", m.test}}},
          {"cases", cases},
          {"synthetic_profiles", true},
          {"generation", m.generation},
          {"provenance", m.provenance}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kDatasetSchemaVersion) {
      throw VersionError("manifest schema version " + std::to_string(m.schema_version) + " (expected " +
                         std::to_string(kDatasetSchemaVersion) + ")");
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split_fraction = j.at("split_fraction").get<double>();
    m.scheme = scheme_from_json(j.at("scheme"));
    m.train = j.at("split").at("train").get<std::vector<std::string>>();
    m.test = j.at("split").at("test").get<std::vector<std::string>>();
    for (const auto& [id, e] : j.at("cases").items()) {
      m.cases[id] = {e.at("group_id").get<std::string>(),       e.at("frequency_hz").get<double>(),
                     e.at("file").get<std::string>(),           e.at("input_clamp_fraction").get<double>(),
                     e.at("target_clamp_fraction").get<double>(), e.value("input_extrapolated", false)};
    }
    for (const auto& [band, c] : j.at("counts").items()) {
      m.counts[band] = {c.at("train").get<std::size_t>(), c.at("test").get<std::size_t>()};
    }
    m.generation = j.value("generation", nlohmann::json::object());
    m.provenance = j.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

namespace {

void check_balance(const std::map<std::string, SplitCounts>& counts) {
  if (counts.size() != 2) return;
  const auto& a = counts.begin()->second;
  const auto& b = std::next(counts.begin())->second;
  const auto diff = [](std::size_t x, std::size_t y) { return x > y ? x - y : y - x; };
  if (diff(a.train, b.train) > 1 || diff(a.test, b.test) > 1) {
    throw ConfigurationError("dual-frequency build is not balanced within one case per split");
  }
}

}  // namespace

DatasetManifest build_dataset(const std::vector<DatasetCase>& cases, const BuildOptions& options,
                              const std::filesystem::path& out_dir) {
  if (cases.empty()) throw InvalidInputError("build_dataset: no cases");
  if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0)) {
    throw InvalidInputError("build_dataset: split fraction must lie in (0, 1)");
  }

  // Group by source, then stratify groups by the set of bands they contain.
  std::map<std::string, std::vector<std::size_t>> groups;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!ids.insert(cases[i].case_id).second) throw InvalidInputError("duplicate case id " + cases[i].case_id);
    groups[cases[i].group_id].push_back(i);
  }
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& [gid, members] : groups) {
    std::set<std::string> bands;
    for (auto i : members) bands.insert(band_label(cases[i].frequency_hz));
    std::string key;
    for (const auto& b : bands) key += b + ";";
    strata[key].push_back(gid);
  }

  DeterministicRng rng(options.seed);
  std::set<std::string> train_groups;
  for (auto& [key, gids] : strata) {
    rng.shuffle(std::span(gids));
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(gids.size()) * options.split_fraction + 0.5));
    for (std::size_t k = 0; k < n_train; ++k) train_groups.insert(gids[k]);
  }

  DatasetManifest manifest;
  manifest.seed = options.seed;
  manifest.split_fraction = options.split_fraction;
  manifest.scheme = options.scheme;
  manifest.generation = options.generation;
  manifest.provenance = options.provenance;
  for (const auto& c : cases) {
    const bool train = train_groups.contains(c.group_id);
    (train ? manifest.train : manifest.test).push_back(c.case_id);
    auto& counts = manifest.counts[band_label(c.frequency_hz)];
    (train ? counts.train : counts.test) += 1;
  }
  std::sort(manifest.train.begin(), manifest.train.end());
  std::sort(manifest.test.begin(), manifest.test.end());
  check_balance(manifest.counts);

  const auto sample_dir = out_dir / kSampleDir;
  std::filesystem::create_directories(sample_dir);
  std::vector<ManifestEntry> entries(cases.size());
  std::vector<char> written(cases.size(), 0);
  const SampleTag tag{options.scheme.variable, options.scheme.altitude};
  const double ceiling = altitude_meters(options.scheme.altitude);

  try {
    parallel_for(cases.size(), options.jobs, [&](std::size_t i) {
      const auto& c = cases[i];
      SampleRecord rec;
      rec.case_id = c.case_id;
      rec.group_id = c.group_id;
      rec.frequency_hz = c.frequency_hz;
      rec.variable = options.scheme.variable;
      rec.altitude = options.scheme.altitude;
      rec.scheme = options.scheme;
      rec.provenance = options.provenance;

      auto input = rasterize_input(c.profile, ceiling);
      auto input_norm = normalize(input.raster, options.scheme, RasterRole::Input, tag);
      rec.input = std::move(input_norm.raster);
      rec.input_clamp_fraction = input_norm.clamp_fraction;
      rec.input_extrapolated = input.extrapolated;

      const auto domain = c.load_domain();
      if (std::abs(domain.config.output_altitude_max_m - ceiling) > 1e-9) {
        throw ConfigurationError("case " + c.case_id + ": domain ceiling does not match the scheme's altitude");
      }
      auto target = rasterize_target(domain, options.scheme.variable, options.target);
      auto target_norm = normalize(target, options.scheme, RasterRole::Target, tag);
      rec.target = std::move(target_norm.raster);
      rec.target_clamp_fraction = target_norm.clamp_fraction;

      const std::string file = std::string(kSampleDir) + "/" + c.case_id + ".sample";
      write_sample(rec, out_dir / file);
      written[i] = 1;
      entries[i] = {c.group_id, c.frequency_hz, file, rec.input_clamp_fraction, rec.target_clamp_fraction,
                    rec.input_extrapolated};
    });
    for (std::size_t i = 0; i < cases.size(); ++i) manifest.cases[cases[i].case_id] = entries[i];
    write_text_atomic(out_dir / kManifestFile, manifest_to_json(manifest).dump(1) + "\n");
  } catch (...) {
    std::error_code ec;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (written[i]) std::filesystem::remove(sample_dir / (cases[i].case_id + ".sample"), ec);
    }
    throw;
  }
  return manifest;
}

}  // namespace ductwave
