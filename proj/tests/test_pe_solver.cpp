#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ductwave/errors.hpp"
#include "ductwave/pe_solver.hpp"
#include "ductwave/propagation_factor.hpp"

using namespace ductwave;

namespace {

SolverConfig short_run() {
  SolverConfig c;
  c.max_range_m = 5000.0;
  return c;
}

}  // namespace

TEST_CASE("grid resolution") {
  SolverConfig c;
  const auto g = resolve_grid(c);
  CHECK(g.transform_size == 1024);
  CHECK(g.dz == doctest::Approx(0.2));
  CHECK(g.domain_top == doctest::Approx(204.8));
  CHECK(g.domain_top >= 4.0 * c.output_altitude_max_m);

  c.frequency_hz = 10e9;
  const auto x = resolve_grid(c);
  CHECK(x.dz <= c.wavelength() / (2.0 * std::sin(3.0 * M_PI / 180.0)));
  CHECK(std::fmod(c.output_dz_m / x.dz, 1.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("configuration errors name the violated condition") {
  SolverConfig c;
  c.transform_size = 1000;
  CHECK_THROWS_AS(resolve_grid(c), ConfigurationError);
  c = SolverConfig{};
  c.antenna_height_m = 40.0;
  CHECK_THROWS_AS(resolve_grid(c), ConfigurationError);
  c = SolverConfig{};
  c.absorber_fraction = 0.6;
  CHECK_THROWS_AS(resolve_grid(c), ConfigurationError);
  c = SolverConfig{};
  c.range_step_m = 2000.0;
  c.output_range_step_m = 2000.0;
  try {
    resolve_grid(c);
    FAIL("expected a configuration error");
  } catch (const ConfigurationError& e) {
    CHECK(std::string(e.what()).find("absorber criterion") != std::string::npos);
  }
  c = SolverConfig{};
  c.transform_size = 1024;
  c.frequency_hz = 10e9;
  c.max_angle_deg = 10.0;
  try {
    resolve_grid(c);
    FAIL("expected a configuration error");
  } catch (const ConfigurationError& e) {
    CHECK(std::string(e.what()).find("angular-bandwidth") != std::string::npos);
  }
}

TEST_CASE("profile must reach the surface") {
  const ModifiedRefractivityProfile p({{5.0, 340.0}, {400.0, 387.0}}, "test");
  CHECK_THROWS_AS(run_pe(p, short_run()), DomainCoverageError);
}

TEST_CASE("one step is unitary without the absorber") {
  const auto profile = standard_atmosphere_profile(400.0, 2);
  for (auto boundary : {SurfaceBoundary::PerfectlyReflecting, SurfaceBoundary::None}) {
    SolverConfig c;
    c.boundary = boundary;
    SplitStepMarcher m(profile, c);
    m.set_absorber_enabled(false);
    for (int i = 0; i < 20; ++i) {
      const double before = m.l2_norm();
      m.step();
      CHECK(std::abs(m.l2_norm() - before) <= 1e-10 * before);
    }
  }
}

TEST_CASE("absorber never increases the norm") {
  const auto profile = standard_atmosphere_profile(400.0, 2);
  SplitStepMarcher m(profile, short_run());
  double last = m.l2_norm();
  for (int i = 0; i < 50; ++i) {
    m.step();
    CHECK(m.l2_norm() <= last * (1.0 + 1e-12));
    last = m.l2_norm();
  }
}

TEST_CASE("flat-earth two-ray agreement without refraction") {
  SolverConfig c;
  c.antenna_pattern = AntennaPattern::Omni;
  c.max_angle_deg = 10.0;
  c.max_range_m = 5000.0;
  const auto flat = standard_atmosphere_profile(400.0, 2, 340.0, 0.0);
  const auto d = run_pe(flat, c);
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < d.n_range(); ++i) {
    if (d.range_axis[i] < 1000.0) continue;
    for (std::size_t k = 0; k < d.n_alt(); ++k) {
      const double z = d.altitude_axis[k];
      if (z < 5.0) continue;
      const double ref = two_ray_reference(c, {{d.range_axis[i], z}})[0];
      const double e = f_to_fdb(d.at(i, k)).db - f_to_fdb(ref).db;
      sum += e * e;
      ++n;
    }
  }
  CHECK(std::sqrt(sum / n) < 0.1);
}

TEST_CASE("run_pe output shape and values") {
  const auto d = run_pe(standard_atmosphere_profile(400.0, 2), short_run());
  CHECK(d.n_range() == 50);
  CHECK(d.n_alt() == 151);
  CHECK(d.range_axis.front() == doctest::Approx(100.0));
  CHECK(d.altitude_axis.back() == doctest::Approx(30.0));
  for (float v : d.f_values) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= 0.0F);
  }
  // Reflecting surface forces a null at z = 0.
  for (std::size_t i = 0; i < d.n_range(); ++i) CHECK(d.at(i, 0) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("domain files round trip and detect damage") {
  const auto d = run_pe(standard_atmosphere_profile(400.0, 2), short_run());
  const auto path = std::filesystem::temp_directory_path() / "ductwave_domain_test.dom";
  save_domain(d, path, {{"seed", 1}});
  const auto back = load_domain(path);
  CHECK(back.f_values == d.f_values);
  CHECK(back.range_axis == d.range_axis);
  CHECK(back.altitude_axis == d.altitude_axis);
  CHECK(back.config.frequency_hz == d.config.frequency_hz);

  const auto size = std::filesystem::file_size(path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size - 5));
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_domain(path), CorruptionError);
  std::filesystem::resize_file(path, size - 100);
  CHECK_THROWS_AS(load_domain(path), CorruptionError);
  std::filesystem::remove(path);
}

TEST_CASE("config json round trip") {
  SolverConfig c;
  c.frequency_hz = 10e9;
  c.antenna_pattern = AntennaPattern::Omni;
  c.boundary = SurfaceBoundary::None;
  const auto back = config_from_json(config_to_json(c));
  CHECK(back.frequency_hz == c.frequency_hz);
  CHECK(back.antenna_pattern == AntennaPattern::Omni);
  CHECK(back.boundary == SurfaceBoundary::None);
  CHECK_THROWS_AS(config_from_json({{"boundary", "rough"}}), ConfigurationError);
}
