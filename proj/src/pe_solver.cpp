#include "ductwave/pe_solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "ductwave/errors.hpp"
#include "ductwave/raster_io.hpp"

namespace ductwave {
namespace {

// FFTW's planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::string_view pattern_name(AntennaPattern p) {
  return p == AntennaPattern::Gaussian ? "gaussian" : "omni";
}

std::string_view boundary_name(SurfaceBoundary b) {
  return b == SurfaceBoundary::PerfectlyReflecting ? "perfectly_reflecting" : "none";
}

double antenna_spectrum(const SolverConfig& config, double p, double k0) {
  const double theta = std::asin(std::min(std::abs(p) / k0, 1.0));
  if (config.antenna_pattern == AntennaPattern::Gaussian) {
    const double bw = deg_to_rad(config.antenna_beamwidth_deg);
    return std::exp(-2.0 * std::numbers::ln2 * theta * theta / (bw * bw));
  }
  const double theta_max = deg_to_rad(config.max_angle_deg);
  const double theta_flat = 0.75 * theta_max;
  if (theta <= theta_flat) return 1.0;
  if (theta >= theta_max) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (theta - theta_flat) / (theta_max - theta_flat)));
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

}  // namespace

double SolverConfig::wavenumber() const { return 2.0 * std::numbers::pi * frequency_hz / kSpeedOfLight; }

VerticalGrid resolve_grid(const SolverConfig& c) {
  if (!(c.frequency_hz > 0.0) || !std::isfinite(c.frequency_hz)) {
    throw ConfigurationError("frequency must be positive");
  }
  if (!(c.output_altitude_max_m > 0.0)) throw ConfigurationError("output_altitude_max must be positive");
  if (!(c.antenna_height_m > 0.0 && c.antenna_height_m < c.output_altitude_max_m)) {
    throw ConfigurationError("antenna height must satisfy 0 < h < output_altitude_max");
  }
  if (!(c.range_step_m > 0.0)) throw ConfigurationError("range_step must be positive");
  if (!(c.max_range_m >= c.range_step_m)) throw ConfigurationError("max_range must be >= range_step");
  if (!(c.output_dz_m > 0.0)) throw ConfigurationError("output_dz must be positive");
  if (!(c.absorber_fraction > 0.0 && c.absorber_fraction < 0.5)) {
    throw ConfigurationError("absorber_fraction must lie in (0, 0.5)");
  }
  if (!(c.domain_height_factor >= 1.0)) throw ConfigurationError("domain_height_factor must be >= 1");
  if (!(c.max_angle_deg > 0.0 && c.max_angle_deg < 45.0)) throw ConfigurationError("max_angle must lie in (0, 45) deg");
  if (c.antenna_pattern == AntennaPattern::Gaussian && !(c.antenna_beamwidth_deg > 0.0)) {
    throw ConfigurationError("antenna beamwidth must be positive");
  }
  const double stride = c.output_range_step_m / c.range_step_m;
  if (!(stride >= 1.0) || std::abs(stride - std::round(stride)) > 1e-9) {
    throw ConfigurationError("output_range_step must be a positive multiple of range_step");
  }
  if (c.transform_size != 0 && (c.transform_size < 1024 || !std::has_single_bit(c.transform_size))) {
    throw ConfigurationError("transform_size must be a power of two >= 1024");
  }

  VerticalGrid g;
  const bool reflecting = c.boundary == SurfaceBoundary::PerfectlyReflecting;
  const double target_top = c.domain_height_factor * c.output_altitude_max_m;
  const double span_target = reflecting ? target_top : 2.0 * target_top;
  const double theta_max = deg_to_rad(c.max_angle_deg);
  const double dz_limit = c.wavelength() / (2.0 * std::sin(theta_max));

  // dz divides output_dz so every stored altitude is a grid node.
  const auto k_min = static_cast<std::size_t>(std::ceil(c.output_dz_m / dz_limit - 1e-12));
  std::size_t n = c.transform_size;
  std::size_t k = std::max<std::size_t>(k_min, 1);
  if (n == 0) {
    n = 1024;
    while (static_cast<double>(n) * c.output_dz_m / static_cast<double>(k) < span_target) {
      if (n >= (std::size_t{1} << 24)) throw ConfigurationError("no transform size up to 2^24 spans the domain");
      n *= 2;
    }
  } else {
    k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * c.output_dz_m / span_target + 1e-12));
    if (k == 0) {
      throw ConfigurationError("transform_size " + std::to_string(n) + " at output_dz " + format_double(c.output_dz_m) +
                               " m cannot span the " + format_double(span_target) + " m domain");
    }
  }
  g.transform_size = n;
  g.dz = c.output_dz_m / static_cast<double>(k);
  if (g.dz > dz_limit) {
    throw ConfigurationError("angular-bandwidth criterion violated: dz = " + format_double(g.dz) +
                             " m > lambda/(2 sin theta_max) = " + format_double(dz_limit) + " m");
  }
  const double span = static_cast<double>(n) * g.dz;
  g.domain_top = reflecting ? span : 0.5 * span;
  const double absorber_depth = c.absorber_fraction * g.domain_top;
  const double lateral = c.range_step_m * std::tan(theta_max);
  if (lateral > absorber_depth) {
    throw ConfigurationError("absorber criterion violated: range_step * tan(theta_max) = " + format_double(lateral) +
                             " m > absorber_fraction * domain_top = " + format_double(absorber_depth) + " m");
  }
  g.z_origin = reflecting ? 0.0 : -g.domain_top;
  g.points = reflecting ? n + 1 : n;
  return g;
}

struct SplitStepMarcher::Impl {
  bool reflecting = true;
  double k0 = 0.0;
  double range_step = 0.0;
  std::size_t transform_length = 0;  // complex entries handed to FFTW
  fftw_complex* buffer = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;  // DST-I is its own inverse; aliases forward then
  std::vector<std::complex<double>> field;
  std::vector<std::complex<double>> screen;
  std::vector<std::complex<double>> propagator;
  std::vector<double> absorber;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (backward != nullptr && backward != forward) fftw_destroy_plan(backward);
    if (forward != nullptr) fftw_destroy_plan(forward);
    if (buffer != nullptr) fftw_free(buffer);
  }

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buffer); }
};

SplitStepMarcher::SplitStepMarcher(const ModifiedRefractivityProfile& profile, const SolverConfig& config)
    : impl_(std::make_unique<Impl>()), grid_(resolve_grid(config)), absorber_enabled_(config.absorber_enabled) {
  if (profile.bottom() > 1e-9) {
    throw DomainCoverageError("profile starts at " + format_double(profile.bottom()) +
                              " m; it must cover the surface (z = 0)");
  }
  auto& s = *impl_;
  s.reflecting = config.boundary == SurfaceBoundary::PerfectlyReflecting;
  s.k0 = config.wavenumber();
  s.range_step = config.range_step_m;
  const std::size_t n = grid_.transform_size;
  s.transform_length = s.reflecting ? n - 1 : n;

  {
    std::lock_guard lock(planner_mutex());
    s.buffer = fftw_alloc_complex(s.transform_length);
    if (s.reflecting) {
      const int len = static_cast<int>(s.transform_length);
      const fftw_r2r_kind kind = FFTW_RODFT00;
      // Real and imaginary parts transformed as two interleaved real arrays.
      s.forward = fftw_plan_many_r2r(1, &len, 2, reinterpret_cast<double*>(s.buffer), nullptr, 2, 1,
                                     reinterpret_cast<double*>(s.buffer), nullptr, 2, 1, &kind, FFTW_ESTIMATE);
      s.backward = s.forward;
    } else {
      const int len = static_cast<int>(n);
      s.forward = fftw_plan_dft_1d(len, s.buffer, s.buffer, FFTW_FORWARD, FFTW_ESTIMATE);
      s.backward = fftw_plan_dft_1d(len, s.buffer, s.buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (s.forward == nullptr || s.backward == nullptr) throw NumericalError("FFTW plan creation failed");
  }

  const double top = grid_.domain_top;
  const double dr = config.range_step_m;
  s.field.assign(grid_.points, {0.0, 0.0});
  s.screen.resize(grid_.points);
  s.absorber.resize(grid_.points);
  const double absorber_start = top * (1.0 - config.absorber_fraction);
  for (std::size_t j = 0; j < grid_.points; ++j) {
    const double z = grid_.altitude(j);
    const double m = profile.value_at(z);
    s.screen[j] = std::polar(1.0, s.k0 * m * 1e-6 * dr);
    const double height = std::abs(z);
    s.absorber[j] = height <= absorber_start
                        ? 1.0
                        : 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, (height - absorber_start) /
                                                                                  (top - absorber_start))));
  }

  const double zs = config.antenna_height_m;
  s.propagator.resize(s.transform_length);
  if (s.reflecting) {
    // u(z) = sum_n 4 A(p_n) sin(p_n zs) sin(p_n z) dp, p_n = n pi / top.
    const double dp = std::numbers::pi / top;
    auto* buf = s.data();
    for (std::size_t k = 0; k < s.transform_length; ++k) {
      const double p = static_cast<double>(k + 1) * dp;
      buf[k] = 4.0 * antenna_spectrum(config, p, s.k0) * std::sin(p * zs);
      s.propagator[k] = std::polar(1.0 / (2.0 * static_cast<double>(n)), -p * p * dr / (2.0 * s.k0));
    }
    fftw_execute(s.forward);
    for (std::size_t k = 0; k < s.transform_length; ++k) s.field[k + 1] = 0.5 * dp * buf[k];
  } else {
    // u(z) = sum_n A(p_n) exp(i p_n (z - zs)) dp on z in [-top, top).
    const double dp = std::numbers::pi / top;
    auto* buf = s.data();
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t k = 0; k < n; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(k);
      const std::ptrdiff_t m = idx < half ? idx : idx - static_cast<std::ptrdiff_t>(n);
      const double p = static_cast<double>(m) * dp;
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      buf[k] = dp * sign * antenna_spectrum(config, p, s.k0) * std::polar(1.0, -p * zs);
      s.propagator[k] = std::polar(1.0 / static_cast<double>(n), -p * p * dr / (2.0 * s.k0));
    }
    fftw_execute(s.backward);
    for (std::size_t k = 0; k < n; ++k) s.field[k] = buf[k];
  }
}

SplitStepMarcher::~SplitStepMarcher() = default;

void SplitStepMarcher::step() {
  auto& s = *impl_;
  for (std::size_t j = 0; j < s.field.size(); ++j) s.field[j] *= s.screen[j];
  auto* buf = s.data();
  const std::size_t offset = s.reflecting ? 1 : 0;
  for (std::size_t k = 0; k < s.transform_length; ++k) buf[k] = s.field[k + offset];
  fftw_execute(s.forward);
  for (std::size_t k = 0; k < s.transform_length; ++k) buf[k] *= s.propagator[k];
  fftw_execute(s.backward);
  for (std::size_t k = 0; k < s.transform_length; ++k) s.field[k + offset] = buf[k];
  if (absorber_enabled_) {
    for (std::size_t j = 0; j < s.field.size(); ++j) s.field[j] *= s.absorber[j];
  }
  range_ += s.range_step;
}

std::span<const std::complex<double>> SplitStepMarcher::field() const { return impl_->field; }

double SplitStepMarcher::l2_norm() const {
  double sum = 0.0;
  for (const auto& v : impl_->field) sum += std::norm(v);
  return std::sqrt(sum * grid_.dz);
}

double SplitStepMarcher::propagation_factor(double z) const {
  const auto& field = impl_->field;
  const double pos = (z - grid_.z_origin) / grid_.dz;
  if (pos < 0.0 || pos > static_cast<double>(field.size() - 1)) {
    throw InvalidInputError("altitude outside the computational domain");
  }
  const double scale = std::sqrt(range_ / (2.0 * std::numbers::pi * impl_->k0));
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-6) return std::abs(field[static_cast<std::size_t>(nearest)]) * scale;
  const auto j0 = std::min(static_cast<std::size_t>(pos), field.size() - 2);
  const double t = pos - static_cast<double>(j0);
  // Magnitudes, not complex values: the phase rotates quickly with altitude
  // off boresight and complex averaging would shrink |u|.
  const double magnitude = (1.0 - t) * std::abs(field[j0]) + t * std::abs(field[j0 + 1]);
  return magnitude * scale;
}

PropagationDomain run_pe(const ModifiedRefractivityProfile& profile, const SolverConfig& config) {
  SplitStepMarcher marcher(profile, config);
  PropagationDomain domain;
  domain.config = config;
  const auto n_alt = static_cast<std::size_t>(std::llround(config.output_altitude_max_m / config.output_dz_m)) + 1;
  for (std::size_t i = 0; i < n_alt; ++i) {
    domain.altitude_axis.push_back(std::min(config.output_altitude_max_m, static_cast<double>(i) * config.output_dz_m));
  }
  const auto stride = static_cast<std::size_t>(std::llround(config.output_range_step_m / config.range_step_m));
  const auto n_steps = static_cast<std::size_t>(std::floor(config.max_range_m / config.range_step_m + 1e-9));
  for (std::size_t step = 1; step <= n_steps; ++step) {
    marcher.step();
    if (step % stride != 0) continue;
    domain.range_axis.push_back(static_cast<double>(step) * config.range_step_m);
    for (double z : domain.altitude_axis) {
      const double f = marcher.propagation_factor(z);
      if (!std::isfinite(f)) throw NumericalError("non-finite propagation factor at range " + format_double(marcher.range()));
      domain.f_values.push_back(static_cast<float>(f));
    }
  }
  if (domain.range_axis.empty()) throw ConfigurationError("max_range shorter than output_range_step");
  return domain;
}

nlohmann::json config_to_json(const SolverConfig& c) {
  return {{"frequency_hz", c.frequency_hz},
          {"antenna_height_m", c.antenna_height_m},
          {"antenna_pattern", pattern_name(c.antenna_pattern)},
          {"antenna_beamwidth_deg", c.antenna_beamwidth_deg},
          {"max_range_m", c.max_range_m},
          {"range_step_m", c.range_step_m},
          {"output_range_step_m", c.output_range_step_m},
          {"output_altitude_max_m", c.output_altitude_max_m},
          {"output_dz_m", c.output_dz_m},
          {"transform_size", c.transform_size},
          {"domain_height_factor", c.domain_height_factor},
          {"absorber_fraction", c.absorber_fraction},
          {"absorber_enabled", c.absorber_enabled},
          {"max_angle_deg", c.max_angle_deg},
          {"boundary", boundary_name(c.boundary)},
          {"earth_radius_m", c.earth.radius_m}};
}

SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig c;
  try {
    c.frequency_hz = j.value("frequency_hz", c.frequency_hz);
    c.antenna_height_m = j.value("antenna_height_m", c.antenna_height_m);
    const auto pattern = j.value("antenna_pattern", std::string(pattern_name(c.antenna_pattern)));
    if (pattern == "gaussian") {
      c.antenna_pattern = AntennaPattern::Gaussian;
    } else if (pattern == "omni") {
      c.antenna_pattern = AntennaPattern::Omni;
    } else {
      throw ConfigurationError("unknown antenna pattern '" + pattern + "'");
    }
    c.antenna_beamwidth_deg = j.value("antenna_beamwidth_deg", c.antenna_beamwidth_deg);
    c.max_range_m = j.value("max_range_m", c.max_range_m);
    c.range_step_m = j.value("range_step_m", c.range_step_m);
    c.output_range_step_m = j.value("output_range_step_m", c.output_range_step_m);
    c.output_altitude_max_m = j.value("output_altitude_max_m", c.output_altitude_max_m);
    c.output_dz_m = j.value("output_dz_m", c.output_dz_m);
    c.transform_size = j.value("transform_size", c.transform_size);
    c.domain_height_factor = j.value("domain_height_factor", c.domain_height_factor);
    c.absorber_fraction = j.value("absorber_fraction", c.absorber_fraction);
    c.absorber_enabled = j.value("absorber_enabled", c.absorber_enabled);
    c.max_angle_deg = j.value("max_angle_deg", c.max_angle_deg);
    const auto boundary = j.value("boundary", std::string(boundary_name(c.boundary)));
    if (boundary == "perfectly_reflecting") {
      c.boundary = SurfaceBoundary::PerfectlyReflecting;
    } else if (boundary == "none") {
      c.boundary = SurfaceBoundary::None;
    } else {
      throw ConfigurationError("unknown boundary '" + boundary + "'");
    }
    c.earth.radius_m = j.value("earth_radius_m", c.earth.radius_m);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed solver config: ") + e.what());
  }
  return c;
}

void save_domain(const PropagationDomain& domain, const std::filesystem::path& path, const nlohmann::json& provenance) {
  if (domain.f_values.size() != domain.n_range() * domain.n_alt()) {
    throw InvalidInputError("save_domain: grid size does not match axes");
  }
  nlohmann::json header = {
      {"schema_version", 1},
      {"kind", "propagation_domain"},
      {"layout", "range-major f32 little-endian"},
      {"n_range", domain.n_range()},
      {"n_alt", domain.n_alt()},
      {"range_axis_m", domain.range_axis},
      {"altitude_axis_m", domain.altitude_axis},
      {"frequency_hz", domain.config.frequency_hz},
      {"antenna_height_m", domain.config.antenna_height_m},
      {"solver_version", kSolverVersion},
      {"config", config_to_json(domain.config)},
      // Values chosen here rather than taken from a reference simulator.
      {"assumed_defaults", {"max_range_m", "range_step_m", "antenna_pattern", "antenna_beamwidth_deg"}},
      {"provenance", provenance},
  };
  const std::span<const float> payload(domain.f_values);
  write_framed(path, std::move(header), std::span(&payload, 1));
}

PropagationDomain load_domain(const std::filesystem::path& path) {
  auto file = read_framed(path);
  const auto& h = file.header;
  if (h.value("kind", std::string()) != "propagation_domain") {
    throw CorruptionError(path.string() + ": not a propagation domain file");
  }
  if (h.value("schema_version", 0) != 1) throw VersionError(path.string() + ": unsupported schema version");
  PropagationDomain d;
  d.range_axis = h.at("range_axis_m").get<std::vector<double>>();
  d.altitude_axis = h.at("altitude_axis_m").get<std::vector<double>>();
  d.config = config_from_json(h.at("config"));
  if (file.payload.size() != d.range_axis.size() * d.altitude_axis.size()) {
    throw CorruptionError(path.string() + ": payload size does not match axes");
  }
  d.f_values = std::move(file.payload);
  return d;
}

}  // namespace ductwave
