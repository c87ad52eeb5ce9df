#include "ductwave/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ductwave/errors.hpp"
#include "ductwave/parallel.hpp"
#include "ductwave/raster_io.hpp"

namespace ductwave {

bool ExperimentSpec::covers(double frequency_hz) const {
  return std::find(frequencies_hz.begin(), frequencies_hz.end(), frequency_hz) != frequencies_hz.end();
}

const std::vector<ExperimentSpec>& define_experiments() {
  using enum GainVariable;
  using enum AltitudeDomain;
  static const std::vector<ExperimentSpec> specs = {
      {1, F, Low30, {kBandX, kBandS}, 1},   {2, F, Low30, {kBandX}, 2},   {3, F, Low30, {kBandS}, 2},
      {4, FdB, Low30, {kBandX, kBandS}, 1}, {5, FdB, Low30, {kBandX}, 2}, {6, FdB, Low30, {kBandS}, 2},
      {7, F, High300, {kBandS}, 2},         {8, FdB, High300, {kBandS}, 2},
  };
  return specs;
}

const ExperimentSpec& experiment_spec(int id) {
  const auto& specs = define_experiments();
  if (id < 1 || id > static_cast<int>(specs.size())) {
    throw ConfigurationError("experiment id must be 1..8, got " + std::to_string(id));
  }
  return specs[static_cast<std::size_t>(id - 1)];
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json bands = nlohmann::json::array();
  for (double f : spec.frequencies_hz) bands.push_back(band_label(f));
  return {{"id", spec.id},
          {"variable", to_string(spec.variable)},
          {"altitude_domain_m", altitude_meters(spec.altitude)},
          {"frequencies_hz", spec.frequencies_hz},
          {"bands", bands},
          {"epochs_multiplier", spec.epochs_multiplier}};
}

namespace {

void check_prediction_raster(const std::string& case_id, const Raster& r) {
  if (r.rows() != kImageSize || r.cols() != kImageSize) {
    throw InvalidInputError("prediction " + case_id + ": expected 256x256, got " + std::to_string(r.rows()) + "x" +
                            std::to_string(r.cols()));
  }
  for (float v : r.values()) {
    if (!(v >= 0.0F && v <= 1.0F)) throw InvalidInputError("prediction " + case_id + ": value outside [0, 1]");
  }
}

}  // namespace

void write_prediction_set(const PredictionSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json cases = nlohmann::json::object();
  for (const auto& [id, raster] : set.rasters) {
    check_prediction_raster(id, raster);
    const std::string file = id + ".pred";
    nlohmann::json header = {{"schema_version", kPredictionSchemaVersion},
                             {"kind", "prediction"},
                             {"case_id", id},
                             {"experiment", set.experiment_id},
                             {"set", set.name},
                             {"rows", raster.rows()},
                             {"cols", raster.cols()},
                             {"provenance", set.provenance}};
    const std::span<const float> payloads[] = {raster.values()};
    write_framed(dir / file, std::move(header), payloads);
    cases[id] = file;
  }
  const nlohmann::json manifest = {{"schema_version", kPredictionSchemaVersion},
                                   {"kind", "prediction_set"},
                                   {"name", set.name},
                                   {"experiment", set.experiment_id},
                                   {"model", set.model},
                                   {"cases", cases},
                                   {"provenance", set.provenance}};
  write_text_atomic(dir / kPredictionManifest, manifest.dump(1) + "\n");
}

PredictionSet load_prediction_set(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / kPredictionManifest));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptionError((dir / kPredictionManifest).string() + ": " + e.what());
  }
  if (j.value("kind", std::string()) != "prediction_set") {
    throw CorruptionError((dir / kPredictionManifest).string() + ": not a prediction set manifest");
  }
  if (j.value("schema_version", -1) != kPredictionSchemaVersion) {
    throw VersionError((dir / kPredictionManifest).string() + ": unsupported schema version");
  }
  PredictionSet set;
  set.name = j.value("name", dir.filename().string());
  set.experiment_id = j.value("experiment", 0);
  set.model = j.value("model", nlohmann::json::object());
  set.provenance = j.value("provenance", nlohmann::json::object());
  for (const auto& [id, file] : j.at("cases").items()) {
    auto framed = read_framed(dir / file.get<std::string>());
    if (framed.header.value("case_id", std::string()) != id) {
      throw CorruptionError((dir / file.get<std::string>()).string() + ": case id does not match the manifest");
    }
    const auto rows = framed.header.at("rows").get<std::size_t>();
    const auto cols = framed.header.at("cols").get<std::size_t>();
    if (framed.payload.size() != rows * cols) throw CorruptionError(id + ": prediction payload size mismatch");
    Raster r(rows, cols, std::move(framed.payload));
    check_prediction_raster(id, r);
    set.rasters.emplace(id, std::move(r));
  }
  return set;
}

DatasetView DatasetView::open(const std::filesystem::path& root) {
  return {root, load_manifest(root / kManifestFile)};
}

SampleRecord DatasetView::sample(const std::string& case_id) const {
  const auto it = manifest.cases.find(case_id);
  if (it == manifest.cases.end()) throw InvalidInputError("dataset has no case " + case_id);
  return read_sample(root / it->second.file);
}

std::vector<std::string> experiment_test_cases(const ExperimentSpec& spec, const DatasetView& data) {
  const auto& scheme = data.manifest.scheme;
  if (scheme.variable != spec.variable || scheme.altitude != spec.altitude) {
    throw ConfigurationError("experiment " + std::to_string(spec.id) + " needs a " +
                             std::string(to_string(spec.variable)) + " dataset at " +
                             std::to_string(static_cast<int>(altitude_meters(spec.altitude))) + " m, got " +
                             std::string(to_string(scheme.variable)) + " at " +
                             std::to_string(static_cast<int>(altitude_meters(scheme.altitude))) + " m");
  }
  std::vector<std::string> ids;
  for (const auto& id : data.manifest.test) {
    if (spec.covers(data.manifest.cases.at(id).frequency_hz)) ids.push_back(id);
  }
  return ids;
}

PredictionSet perfect_predictions(const ExperimentSpec& spec, const DatasetView& data) {
  PredictionSet set;
  set.name = "perfect";
  set.experiment_id = spec.id;
  set.model = {{"kind", "perfect"}};
  for (const auto& id : experiment_test_cases(spec, data)) set.rasters.emplace(id, data.sample(id).target);
  return set;
}

PredictionSet mean_image_baseline(const ExperimentSpec& spec, const DatasetView& data) {
  const auto test_ids = experiment_test_cases(spec, data);
  std::map<double, std::vector<double>> sums;
  std::map<double, std::size_t> counts;
  for (const auto& id : data.manifest.train) {
    const double f = data.manifest.cases.at(id).frequency_hz;
    if (!spec.covers(f)) continue;
    const auto target = data.sample(id).target;
    auto& s = sums[f];
    s.resize(target.size(), 0.0);
    for (std::size_t i = 0; i < target.size(); ++i) s[i] += target.values()[i];
    ++counts[f];
  }
  std::map<double, Raster> means;
  for (const auto& [f, s] : sums) {
    Raster m(kImageSize, kImageSize);
    for (std::size_t i = 0; i < s.size(); ++i) {
      m.values()[i] = static_cast<float>(std::clamp(s[i] / static_cast<double>(counts[f]), 0.0, 1.0));
    }
    means.emplace(f, std::move(m));
  }
  PredictionSet set;
  set.name = "baseline";
  set.experiment_id = spec.id;
  set.model = {{"kind", "mean_image_baseline"}, {"train_cases", data.manifest.train.size()}};
  for (const auto& id : test_ids) {
    const double f = data.manifest.cases.at(id).frequency_hz;
    const auto it = means.find(f);
    if (it == means.end()) {
      throw InvalidInputError("mean_image_baseline: no training cases for band " + band_label(f));
    }
    set.rasters.emplace(id, it->second);
  }
  return set;
}

std::vector<double> ExperimentReport::population(std::string_view metric) const {
  std::vector<double> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    if (metric == "mse") {
      out.push_back(c.value.mse);
    } else if (metric == "ssim") {
      out.push_back(c.value.ssim);
    } else if (metric == "fid") {
      out.push_back(c.value.fid);
    } else {
      throw InvalidInputError("unknown metric " + std::string(metric));
    }
  }
  return out;
}

namespace {

MetricMeans means_of(const std::vector<const CaseMetric*>& rows) {
  MetricMeans m;
  m.count = rows.size();
  if (rows.empty()) return m;
  for (const auto* r : rows) {
    m.mse += r->value.mse;
    m.ssim += r->value.ssim;
    m.fid += r->value.fid;
  }
  const auto n = static_cast<double>(rows.size());
  m.mse /= n;
  m.ssim /= n;
  m.fid /= n;
  return m;
}

}  // namespace

ExperimentReport evaluate_cases(int experiment_id, const std::vector<EvaluationCase>& cases,
                                const PredictionSet& predictions, const FeatureBank& bank, std::size_t jobs) {
  if (cases.empty()) throw InvalidInputError("evaluate_cases: no cases to evaluate");
  std::vector<const EvaluationCase*> ordered;
  for (const auto& c : cases) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->case_id < b->case_id; });

  std::vector<std::string> missing;
  for (const auto* c : ordered) {
    if (!predictions.rasters.contains(c->case_id)) missing.push_back(c->case_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw CompletenessError("prediction set '" + predictions.name + "' is missing " + std::to_string(missing.size()) +
                            " test case(s): " + list);
  }

  ExperimentReport report;
  report.experiment_id = experiment_id;
  report.prediction_set = predictions.name;
  report.cases.resize(ordered.size());
  parallel_for(ordered.size(), jobs, [&](std::size_t i) {
    const auto* c = ordered[i];
    report.cases[i] = {compute_metrics(c->case_id, predictions.rasters.at(c->case_id), c->target, bank),
                       c->frequency_hz};
  });

  std::vector<const CaseMetric*> all;
  std::map<double, std::vector<const CaseMetric*>> by_freq;
  for (const auto& c : report.cases) {
    all.push_back(&c);
    by_freq[c.frequency_hz].push_back(&c);
  }
  report.overall = means_of(all);
  for (const auto& [f, rows] : by_freq) report.per_frequency[f] = means_of(rows);

  std::vector<Raster> preds;
  std::vector<Raster> targets;
  for (const auto* c : ordered) {
    preds.push_back(predictions.rasters.at(c->case_id));
    targets.push_back(c->target);
  }
  report.set_fid = frechet_set_distance(preds, targets, bank);
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const DatasetView& data,
                                const PredictionSet& predictions, const FeatureBank& bank, std::size_t jobs) {
  const auto ids = experiment_test_cases(spec, data);
  if (ids.empty()) throw InvalidInputError("experiment " + std::to_string(spec.id) + ": no test cases in dataset");
  std::vector<EvaluationCase> cases(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    cases[i] = {ids[i], data.manifest.cases.at(ids[i]).frequency_hz, data.sample(ids[i]).target};
  });
  return evaluate_cases(spec.id, cases, predictions, bank, jobs);
}

std::vector<SignificanceResult> compare_reports(const ExperimentReport& a, const ExperimentReport& b) {
  if (a.cases.empty() || b.cases.empty()) throw InvalidInputError("compare_reports: empty metric population");
  std::vector<SignificanceResult> out;
  for (const char* metric : {"mse", "ssim", "fid"}) {
    const auto pa = a.population(metric);
    const auto pb = b.population(metric);
    out.push_back({a.experiment_id, b.experiment_id, metric, welch_t_test(pa, pb)});
  }
  return out;
}

const std::vector<std::pair<int, int>>& significance_pair_ids() {
  static const std::vector<std::pair<int, int>> pairs = {{1, 2}, {1, 3}, {4, 5}, {4, 6}};
  return pairs;
}

std::vector<SignificanceResult> significance_pairs(const std::map<int, ExperimentReport>& reports) {
  std::vector<SignificanceResult> out;
  for (const auto& [ia, ib] : significance_pair_ids()) {
    const auto a = reports.find(ia);
    const auto b = reports.find(ib);
    if (a == reports.end() || b == reports.end()) {
      throw InvalidInputError("significance_pairs: missing report for experiment " +
                              std::to_string(a == reports.end() ? ia : ib));
    }
    auto r = compare_reports(a->second, b->second);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

NormalizedRaster convert_prediction(const Raster& f_prediction, const NormalizationScheme& f_scheme,
                                    const NormalizationScheme& fdb_scheme, const DecibelOptions& decibel) {
  if (f_scheme.variable != GainVariable::F || fdb_scheme.variable != GainVariable::FdB) {
    throw ConfigurationError("conversion needs an F scheme and an F_dB scheme");
  }
  if (f_scheme.altitude != fdb_scheme.altitude) {
    throw ConfigurationError("conversion schemes cover different altitude domains");
  }
  const Raster f = denormalize(f_prediction, f_scheme, RasterRole::Target);
  Raster db(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) {
    db.values()[i] = static_cast<float>(f_to_fdb(std::max(0.0F, f.values()[i]), decibel).db);
  }
  return normalize(db, fdb_scheme, RasterRole::Target, {fdb_scheme.variable, fdb_scheme.altitude});
}

ConversionReport convert_and_compare(const PredictionSet& f_predictions, const DatasetView& f_data,
                                     const DatasetView& fdb_data, const FeatureBank& bank,
                                     const DecibelOptions& decibel, const PredictionSet* native_fdb_predictions,
                                     std::size_t jobs) {
  const auto& f_scheme = f_data.manifest.scheme;
  const auto& fdb_scheme = fdb_data.manifest.scheme;
  if (f_scheme.variable != GainVariable::F) throw ConfigurationError("convert_and_compare: predictions dataset is not F");
  if (fdb_scheme.variable != GainVariable::FdB) {
    throw ConfigurationError("convert_and_compare: comparison dataset is not F_dB");
  }
  if (f_scheme.altitude != fdb_scheme.altitude) {
    throw ConfigurationError("convert_and_compare: datasets cover different altitude domains");
  }

  std::vector<std::string> ids;
  for (const auto& [id, r] : f_predictions.rasters) {
    if (!fdb_data.manifest.cases.contains(id)) throw InvalidInputError("convert_and_compare: no F_dB target for " + id);
    ids.push_back(id);
  }
  if (ids.empty()) throw InvalidInputError("convert_and_compare: empty prediction set");

  PredictionSet converted;
  converted.name = f_predictions.name + "->F_dB";
  converted.experiment_id = f_predictions.experiment_id;
  std::vector<EvaluationCase> cases(ids.size());
  std::vector<NormalizedRaster> conv(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    conv[i] = convert_prediction(f_predictions.rasters.at(ids[i]), f_scheme, fdb_scheme, decibel);
    cases[i] = {ids[i], fdb_data.manifest.cases.at(ids[i]).frequency_hz, fdb_data.sample(ids[i]).target};
  });

  ConversionReport report;
  report.decibel = decibel;
  double clamp_total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    report.case_clamp_fraction[ids[i]] = conv[i].clamp_fraction;
    clamp_total += conv[i].clamp_fraction;
    converted.rasters.emplace(ids[i], std::move(conv[i].raster));
  }
  report.clamp_fraction = clamp_total / static_cast<double>(ids.size());
  report.converted = evaluate_cases(f_predictions.experiment_id, cases, converted, bank, jobs);
  if (native_fdb_predictions != nullptr) {
    report.native = evaluate_cases(native_fdb_predictions->experiment_id, cases, *native_fdb_predictions, bank, jobs);
  }
  return report;
}

namespace {

nlohmann::json means_to_json(const MetricMeans& m) {
  return {{"count", m.count}, {"mse", m.mse}, {"ssim", m.ssim}, {"fid", m.fid}};
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json freq = nlohmann::json::array();
  for (const auto& [f, m] : report.per_frequency) {
    auto row = means_to_json(m);
    row["frequency_hz"] = f;
    row["band"] = band_label(f);
    freq.push_back(row);
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : report.cases) {
    cases.push_back({{"case_id", c.value.case_id},
                     {"frequency_hz", c.frequency_hz},
                     {"mse", c.value.mse},
                     {"ssim", c.value.ssim},
                     {"fid", c.value.fid}});
  }
  return {{"experiment", report.experiment_id},
          {"prediction_set", report.prediction_set},
          {"means", means_to_json(report.overall)},
          {"per_frequency", freq},
          {"cases", cases},
          {"set_fid", report.set_fid},
          {"fid_note", "Fréchet distance over features of a fixed seeded random filter bank; not comparable to "
                       "pretrained-network FID values"}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  try {
    r.experiment_id = j.at("experiment").get<int>();
    r.prediction_set = j.at("prediction_set").get<std::string>();
    r.set_fid = j.at("set_fid").get<double>();
    const auto read_means = [](const nlohmann::json& m) {
      return MetricMeans{m.at("count").get<std::size_t>(), m.at("mse").get<double>(), m.at("ssim").get<double>(),
                         m.at("fid").get<double>()};
    };
    r.overall = read_means(j.at("means"));
    for (const auto& row : j.at("per_frequency")) r.per_frequency[row.at("frequency_hz").get<double>()] = read_means(row);
    for (const auto& c : j.at("cases")) {
      r.cases.push_back({{c.at("case_id").get<std::string>(), c.at("mse").get<double>(), c.at("ssim").get<double>(),
                          c.at("fid").get<double>()},
                         c.at("frequency_hz").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed experiment report: ") + e.what());
  }
  return r;
}

nlohmann::json significance_to_json(const std::vector<SignificanceResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    out.push_back({{"experiments", {r.experiment_a, r.experiment_b}},
                   {"metric", r.metric},
                   {"mean_a", r.test.mean_a},
                   {"mean_b", r.test.mean_b},
                   {"t", std::isfinite(r.test.t_statistic) ? nlohmann::json(r.test.t_statistic)
                                                           : nlohmann::json(r.test.t_statistic > 0 ? "inf" : "-inf")},
                   {"df", r.test.degrees_of_freedom},
                   {"p_value", r.test.p_value},
                   {"degenerate", r.test.degenerate}});
  }
  return out;
}

nlohmann::json conversion_to_json(const ConversionReport& report) {
  nlohmann::json j = {{"decibel_factor", report.decibel.factor},
                      {"f_floor", report.decibel.f_floor},
                      {"clamp_fraction", report.clamp_fraction},
                      {"converted", report_to_json(report.converted)}};
  if (report.native) j["native"] = report_to_json(*report.native);
  nlohmann::json dist = nlohmann::json::array();
  for (std::size_t i = 0; i < report.converted.cases.size(); ++i) {
    const auto& c = report.converted.cases[i];
    nlohmann::json row = {{"case_id", c.value.case_id},
                          {"converted", {{"mse", c.value.mse}, {"ssim", c.value.ssim}, {"fid", c.value.fid}}},
                          {"clamp_fraction", report.case_clamp_fraction.at(c.value.case_id)}};
    if (report.native) {
      const auto& n = report.native->cases[i].value;
      row["native"] = {{"mse", n.mse}, {"ssim", n.ssim}, {"fid", n.fid}};
    }
    dist.push_back(row);
  }
  j["distributions"] = dist;
  return j;
}

std::string metrics_csv(const std::vector<const ExperimentReport*>& reports) {
  std::string out = "case_id,frequency,experiment,mse,ssim,fid\n";
  char buf[256];
  for (const auto* r : reports) {
    for (const auto& c : r->cases) {
      std::snprintf(buf, sizeof(buf), ",%.0f,%d,%.17g,%.17g,%.17g\n", c.frequency_hz, r->experiment_id,
                    c.value.mse, c.value.ssim, c.value.fid);
      out += c.value.case_id + buf;
    }
  }
  return out;
}

}  // namespace ductwave
