#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ductwave {

/// Thermodynamic state at one altitude. Pressures in millibar, temperature in
/// kelvin, altitude in meters above mean sea level.
struct AtmosphericLevel {
  double altitude_m = 0.0;
  double temperature_k = 0.0;
  double pressure_mb = 0.0;
  double vapor_pressure_mb = 0.0;
};

struct EarthModel {
  double radius_m = 6.371e6;
};

enum class ProfileFamily { Standard, Evaporation, SurfaceTrilinear, Elevated };

std::string_view to_string(ProfileFamily family);
ProfileFamily parse_profile_family(std::string_view name);

/// Modified refractivity M(z) = 77.6 p/T + 373256 e/T^2 + (z/R_e) 1e6.
double modified_refractivity(const AtmosphericLevel& level, const EarthModel& earth = {});

struct RefractivityLevel {
  double altitude_m;
  double m_units;
  bool operator==(const RefractivityLevel&) const = default;
};

/// Altitude-indexed M(z) samples. Levels are strictly increasing in altitude,
/// at least two, all finite; the constructor enforces this.
class ModifiedRefractivityProfile {
 public:
  ModifiedRefractivityProfile() = default;
  ModifiedRefractivityProfile(std::vector<RefractivityLevel> levels, std::string family_tag,
                              std::uint64_t seed = 0, nlohmann::json parameters = nlohmann::json::object());

  const std::vector<RefractivityLevel>& levels() const { return levels_; }
  const std::string& family_tag() const { return family_tag_; }
  std::uint64_t seed() const { return seed_; }
  const nlohmann::json& parameters() const { return parameters_; }

  double bottom() const { return levels_.front().altitude_m; }
  double top() const { return levels_.back().altitude_m; }

  /// Piecewise-linear M at z. Above the top level the last gradient is
  /// extrapolated; below the first level the first gradient is.
  double value_at(double z) const;

  bool operator==(const ModifiedRefractivityProfile&) const = default;

 private:
  std::vector<RefractivityLevel> levels_;
  std::string family_tag_;
  std::uint64_t seed_ = 0;
  nlohmann::json parameters_ = nlohmann::json::object();
};

inline constexpr double kStandardLapse = 0.118;  // M-units per meter

ModifiedRefractivityProfile standard_atmosphere_profile(double z_max, std::size_t n_levels,
                                                        double surface_m = 340.0,
                                                        double lapse = kStandardLapse);

struct DuctParameters {
  ProfileFamily family = ProfileFamily::Evaporation;
  double duct_height_m = 0.0;
  /// M deficit across the trapping layer (trilinear families only).
  double strength_m_units = 0.0;
  /// Aerodynamic roughness length z0 of the log law (evaporation only).
  double roughness_length_m = 1.5e-4;
  double base_m_units = 340.0;
  double lapse = kStandardLapse;
  /// Slope c0 of the neutral log-linear evaporation-duct law.
  double evaporation_slope = 0.13;
};

inline constexpr double kMaxEvaporationDuctHeight = 40.0;

/// Builds M(z) on `z_grid` for the given family.
///
/// evaporation:       M = base + c0 (z - h ln((z + z0) / z0)); minimum at z = h - z0.
/// surface_trilinear: standard lapse to h/2, linear drop of `strength` from h/2 to h,
///                    standard lapse above.
/// elevated:          same shape with the trapping layer spanning [0.8 h, h].
/// standard:          base + lapse z.
ModifiedRefractivityProfile duct_profile(const DuctParameters& params, const std::vector<double>& z_grid);

/// Dense near the surface (0.1 m to 50 m) then 1 m spacing up to z_max.
std::vector<double> default_profile_grid(double z_max = 400.0);

struct ParameterRange {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(lo <= hi); }
};

struct FamilySpec {
  ProfileFamily family = ProfileFamily::Evaporation;
  ParameterRange duct_height{2.0, 35.0};
  ParameterRange strength{0.0, 0.0};
  ParameterRange roughness{1.5e-4, 1.5e-4};
  ParameterRange base_m{300.0, 400.0};
  std::vector<double> z_grid = default_profile_grid();
};

FamilySpec default_family_spec(ProfileFamily family);

/// Deterministic draw of `count` profiles. Profile i is generated from a
/// sub-seed derived from (seed, i), which it records.
std::vector<ModifiedRefractivityProfile> sample_profile_family(std::uint64_t seed, const FamilySpec& spec,
                                                                std::size_t count);

nlohmann::json profile_to_json(const ModifiedRefractivityProfile& profile);
ModifiedRefractivityProfile profile_from_json(const nlohmann::json& j);
void save_profile(const ModifiedRefractivityProfile& profile, const std::filesystem::path& path);
ModifiedRefractivityProfile load_profile(const std::filesystem::path& path);

/// SplitMix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ductwave
