#include "ductwave/refractivity.hpp"

#include <algorithm>
#include <cmath>

#include "ductwave/errors.hpp"
#include "ductwave/raster_io.hpp"
#include "ductwave/rng.hpp"

namespace ductwave {

std::string_view to_string(ProfileFamily family) {
  switch (family) {
    case ProfileFamily::Standard: return "standard";
    case ProfileFamily::Evaporation: return "evaporation";
    case ProfileFamily::SurfaceTrilinear: return "surface_trilinear";
    case ProfileFamily::Elevated: return "elevated";
  }
  return "unknown";
}

ProfileFamily parse_profile_family(std::string_view name) {
  if (name == "standard") return ProfileFamily::Standard;
  if (name == "evaporation") return ProfileFamily::Evaporation;
  if (name == "surface_trilinear") return ProfileFamily::SurfaceTrilinear;
  if (name == "elevated") return ProfileFamily::Elevated;
  throw ConfigurationError("unsupported profile family '" + std::string(name) + "'");
}

double modified_refractivity(const AtmosphericLevel& level, const EarthModel& earth) {
  const double z = level.altitude_m;
  const double t = level.temperature_k;
  const double p = level.pressure_mb;
  const double e = level.vapor_pressure_mb;
  if (!std::isfinite(z) || !std::isfinite(t) || !std::isfinite(p) || !std::isfinite(e) ||
      !std::isfinite(earth.radius_m)) {
    throw InvalidInputError("modified_refractivity: non-finite input");
  }
  if (!(t > 0.0) || p < 0.0 || e < 0.0 || e > p || z < 0.0) {
    throw InvalidInputError("modified_refractivity: level violates T>0, 0<=e<=p, z>=0");
  }
  if (!(earth.radius_m > 0.0)) throw InvalidInputError("modified_refractivity: earth radius must be positive");
  return (77.6 * p / t + 373256.0 * e / (t * t)) + (z / earth.radius_m) * 1e6;
}

ModifiedRefractivityProfile::ModifiedRefractivityProfile(std::vector<RefractivityLevel> levels,
                                                         std::string family_tag, std::uint64_t seed,
                                                         nlohmann::json parameters)
    : levels_(std::move(levels)),
      family_tag_(std::move(family_tag)),
      seed_(seed),
      parameters_(std::move(parameters)) {
  if (levels_.size() < 2) throw InvalidInputError("profile needs at least two levels");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i].altitude_m) || !std::isfinite(levels_[i].m_units)) {
      throw InvalidInputError("profile level " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(levels_[i].altitude_m > levels_[i - 1].altitude_m)) {
      throw InvalidInputError("profile altitudes must be strictly increasing");
    }
  }
}

double ModifiedRefractivityProfile::value_at(double z) const {
  const auto upper = std::upper_bound(levels_.begin(), levels_.end(), z,
                                      [](double v, const RefractivityLevel& l) { return v < l.altitude_m; });
  std::size_t i1;
  if (upper == levels_.begin()) {
    i1 = 1;
  } else if (upper == levels_.end()) {
    i1 = levels_.size() - 1;
  } else {
    i1 = static_cast<std::size_t>(upper - levels_.begin());
  }
  const auto& a = levels_[i1 - 1];
  const auto& b = levels_[i1];
  const double t = (z - a.altitude_m) / (b.altitude_m - a.altitude_m);
  return a.m_units + t * (b.m_units - a.m_units);
}

ModifiedRefractivityProfile standard_atmosphere_profile(double z_max, std::size_t n_levels, double surface_m,
                                                        double lapse) {
  if (!(z_max > 0.0) || n_levels < 2) {
    throw InvalidInputError("standard_atmosphere_profile: need z_max > 0 and n_levels >= 2");
  }
  std::vector<RefractivityLevel> levels(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i) {
    const double z = z_max * static_cast<double>(i) / static_cast<double>(n_levels - 1);
    levels[i] = {z, surface_m + lapse * z};
  }
  nlohmann::json params = {{"base_m_units", surface_m}, {"lapse", lapse}};
  return {std::move(levels), std::string(to_string(ProfileFamily::Standard)), 0, std::move(params)};
}

namespace {

double trilinear(double z, double base, double lapse, double layer_bottom, double layer_top, double strength) {
  if (z <= layer_bottom) return base + lapse * z;
  const double m_bottom = base + lapse * layer_bottom;
  if (z <= layer_top) return m_bottom - strength * (z - layer_bottom) / (layer_top - layer_bottom);
  return m_bottom - strength + lapse * (z - layer_top);
}

nlohmann::json params_to_json(const DuctParameters& p) {
  return {{"family", to_string(p.family)},
          {"duct_height_m", p.duct_height_m},
          {"strength_m_units", p.strength_m_units},
          {"roughness_length_m", p.roughness_length_m},
          {"base_m_units", p.base_m_units},
          {"lapse", p.lapse},
          {"evaporation_slope", p.evaporation_slope}};
}

}  // namespace

ModifiedRefractivityProfile duct_profile(const DuctParameters& params, const std::vector<double>& z_grid) {
  if (z_grid.size() < 2) throw InvalidInputError("duct_profile: grid needs at least two altitudes");
  if (z_grid.front() < 0.0) throw InvalidInputError("duct_profile: grid must start at or above the surface");
  if (!std::is_sorted(z_grid.begin(), z_grid.end())) throw InvalidInputError("duct_profile: grid must be ascending");
  if (!(params.duct_height_m >= 0.0)) throw InvalidInputError("duct_profile: duct height must be >= 0");
  if (!(params.strength_m_units >= 0.0)) throw InvalidInputError("duct_profile: strength must be >= 0");

  std::vector<RefractivityLevel> levels;
  levels.reserve(z_grid.size());
  const double h = params.duct_height_m;
  switch (params.family) {
    case ProfileFamily::Standard:
      for (double z : z_grid) levels.push_back({z, params.base_m_units + params.lapse * z});
      break;
    case ProfileFamily::Evaporation: {
      if (h > kMaxEvaporationDuctHeight) {
        throw InvalidInputError("duct_profile: evaporation duct height above 40 m");
      }
      const double z0 = params.roughness_length_m;
      if (!(z0 > 0.0)) throw InvalidInputError("duct_profile: roughness length must be positive");
      const double c0 = params.evaporation_slope;
      for (double z : z_grid) {
        levels.push_back({z, params.base_m_units + c0 * (z - h * std::log((z + z0) / z0))});
      }
      break;
    }
    case ProfileFamily::SurfaceTrilinear:
    case ProfileFamily::Elevated: {
      const double bottom_fraction = params.family == ProfileFamily::SurfaceTrilinear ? 0.5 : 0.8;
      for (double z : z_grid) {
        const double m = h > 0.0 ? trilinear(z, params.base_m_units, params.lapse, bottom_fraction * h, h,
                                             params.strength_m_units)
                                 : params.base_m_units + params.lapse * z;
        levels.push_back({z, m});
      }
      break;
    }
    default:
      throw ConfigurationError("duct_profile: unsupported family");
  }
  return {std::move(levels), std::string(to_string(params.family)), 0, params_to_json(params)};
}

std::vector<double> default_profile_grid(double z_max) {
  std::vector<double> grid;
  for (int i = 0; i <= 500 && i * 0.1 <= z_max; ++i) grid.push_back(i * 0.1);
  for (double z = 51.0; z <= z_max; z += 1.0) grid.push_back(z);
  return grid;
}

FamilySpec default_family_spec(ProfileFamily family) {
  FamilySpec spec;
  spec.family = family;
  switch (family) {
    case ProfileFamily::Standard:
      spec.duct_height = {0.0, 0.0};
      break;
    case ProfileFamily::Evaporation:
      spec.duct_height = {2.0, 35.0};
      break;
    case ProfileFamily::SurfaceTrilinear:
      spec.duct_height = {20.0, 150.0};
      spec.strength = {10.0, 40.0};
      break;
    case ProfileFamily::Elevated:
      spec.duct_height = {60.0, 250.0};
      spec.strength = {5.0, 30.0};
      break;
  }
  return spec;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<ModifiedRefractivityProfile> sample_profile_family(std::uint64_t seed, const FamilySpec& spec,
                                                                std::size_t count) {
  if (count < 1) throw InvalidInputError("sample_profile_family: count must be >= 1");
  for (const auto* range : {&spec.duct_height, &spec.strength, &spec.roughness, &spec.base_m}) {
    if (range->empty()) throw ConfigurationError("sample_profile_family: empty parameter range");
  }
  std::vector<ModifiedRefractivityProfile> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t sub_seed = mix_seed(seed, i);
    DeterministicRng rng(sub_seed);
    DuctParameters p;
    p.family = spec.family;
    p.duct_height_m = rng.uniform(spec.duct_height.lo, spec.duct_height.hi);
    p.strength_m_units = rng.uniform(spec.strength.lo, spec.strength.hi);
    p.roughness_length_m = rng.uniform(spec.roughness.lo, spec.roughness.hi);
    p.base_m_units = rng.uniform(spec.base_m.lo, spec.base_m.hi);
    auto profile = duct_profile(p, spec.z_grid);
    out.emplace_back(profile.levels(), profile.family_tag(), sub_seed, profile.parameters());
  }
  return out;
}

nlohmann::json profile_to_json(const ModifiedRefractivityProfile& profile) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : profile.levels()) levels.push_back({l.altitude_m, l.m_units});
  return {{"family", profile.family_tag()},
          {"seed", profile.seed()},
          {"synthetic", true},
          {"parameters", profile.parameters()},
          {"levels", std::move(levels)}};
}

ModifiedRefractivityProfile profile_from_json(const nlohmann::json& j) {
  try {
    std::vector<RefractivityLevel> levels;
    for (const auto& l : j.at("levels")) levels.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
    return {std::move(levels), j.at("family").get<std::string>(), j.value("seed", std::uint64_t{0}),
            j.value("parameters", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("malformed profile JSON: ") + e.what());
  }
}

void save_profile(const ModifiedRefractivityProfile& profile, const std::filesystem::path& path) {
  write_text_atomic(path, profile_to_json(profile).dump(1) + "\n");
}

ModifiedRefractivityProfile load_profile(const std::filesystem::path& path) {
  try {
    return profile_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

}  // namespace ductwave
