#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ductwave/refractivity.hpp"

namespace ductwave {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr std::string_view kSolverVersion = "ssf-pe 1.0";

enum class SurfaceBoundary {
  /// Smooth perfectly conducting sea, horizontal polarization (odd image).
  PerfectlyReflecting,
  /// No surface; the vertical domain is symmetric about z = 0.
  None,
};

enum class AntennaPattern {
  /// Gaussian angular spectrum with the configured half-power beamwidth.
  Gaussian,
  /// Flat angular spectrum out to 0.75 of max_angle, cosine taper to max_angle.
  Omni,
};

struct SolverConfig {
  double frequency_hz = 3e9;
  double antenna_height_m = 20.0;
  AntennaPattern antenna_pattern = AntennaPattern::Gaussian;
  double antenna_beamwidth_deg = 1.0;
  double max_range_m = 5e4;
  double range_step_m = 100.0;
  /// Spacing of the stored range axis; a multiple of range_step_m.
  double output_range_step_m = 100.0;
  double output_altitude_max_m = 30.0;
  double output_dz_m = 0.2;
  /// Power of two >= 1024, or 0 for the smallest one that spans the domain.
  std::size_t transform_size = 0;
  /// Minimum internal domain top as a multiple of output_altitude_max_m.
  double domain_height_factor = 4.0;
  double absorber_fraction = 0.25;
  bool absorber_enabled = true;
  /// Maximum propagation angle the vertical grid must resolve.
  double max_angle_deg = 3.0;
  SurfaceBoundary boundary = SurfaceBoundary::PerfectlyReflecting;
  EarthModel earth;

  double wavelength() const { return kSpeedOfLight / frequency_hz; }
  double wavenumber() const;
};

nlohmann::json config_to_json(const SolverConfig& config);
SolverConfig config_from_json(const nlohmann::json& j);

/// Vertical discretization derived from a validated configuration.
struct VerticalGrid {
  std::size_t transform_size = 0;
  double dz = 0.0;
  /// Height of the computational domain (one side for the unbounded case).
  double domain_top = 0.0;
  /// Altitude of grid index 0.
  double z_origin = 0.0;
  std::size_t points = 0;
  double altitude(std::size_t j) const { return z_origin + static_cast<double>(j) * dz; }
};

/// Validates `config` and derives the grid. The spacing is output_dz / k for
/// the smallest admissible integer k, so stored altitudes fall on grid nodes;
/// the domain top is transform_size * dz (at least domain_height_factor times
/// the output ceiling). Throws ConfigurationError naming
/// the violated inequality when the angular-bandwidth criterion
/// dz <= lambda / (2 sin theta_max) or the absorber criterion
/// range_step tan(theta_max) <= absorber_fraction * domain_top fails.
VerticalGrid resolve_grid(const SolverConfig& config);

/// |F| over (range, altitude), stored range-major.
struct PropagationDomain {
  std::vector<double> range_axis;
  std::vector<double> altitude_axis;
  std::vector<float> f_values;
  SolverConfig config;

  std::size_t n_range() const { return range_axis.size(); }
  std::size_t n_alt() const { return altitude_axis.size(); }
  float at(std::size_t ir, std::size_t iz) const { return f_values[ir * altitude_axis.size() + iz]; }
};

/// Range marcher for the narrow-angle parabolic equation. Each step applies
/// the refractive phase screen exp(i k0 M 1e-6 dr), the free-space diffraction
/// factor exp(-i p^2 dr / (2 k0)) in the vertical-wavenumber domain, and the
/// top absorber. The surface condition is carried by the transform: a sine
/// transform for the reflecting sea, a full complex FFT otherwise.
class SplitStepMarcher {
 public:
  SplitStepMarcher(const ModifiedRefractivityProfile& profile, const SolverConfig& config);
  ~SplitStepMarcher();
  SplitStepMarcher(const SplitStepMarcher&) = delete;
  SplitStepMarcher& operator=(const SplitStepMarcher&) = delete;

  void step();
  double range() const { return range_; }
  const VerticalGrid& grid() const { return grid_; }
  /// Reduced field on grid altitudes grid().altitude(j).
  std::span<const std::complex<double>> field() const;
  double l2_norm() const;
  void set_absorber_enabled(bool enabled) { absorber_enabled_ = enabled; }

  /// |F| at altitude z (exact on grid nodes, magnitude-interpolated between),
  /// scaled so a free-space run yields the antenna pattern (1 on boresight).
  double propagation_factor(double z) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  VerticalGrid grid_;
  double range_ = 0.0;
  bool absorber_enabled_ = true;
};

/// Full march from 0 to max_range. Requires the profile to start at the
/// surface; the last gradient is extrapolated above its top level.
PropagationDomain run_pe(const ModifiedRefractivityProfile& profile, const SolverConfig& config);

void save_domain(const PropagationDomain& domain, const std::filesystem::path& path,
                 const nlohmann::json& provenance = nlohmann::json::object());
PropagationDomain load_domain(const std::filesystem::path& path);

}  // namespace ductwave
