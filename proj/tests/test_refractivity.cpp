#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <filesystem>
#include <limits>

#include "ductwave/errors.hpp"
#include "ductwave/refractivity.hpp"
#include "ductwave/rng.hpp"

using namespace ductwave;
using boost::multiprecision::cpp_dec_float_50;

namespace {

cpp_dec_float_50 reference_m(const AtmosphericLevel& l, double radius) {
  const cpp_dec_float_50 t(l.temperature_k);
  const cpp_dec_float_50 p(l.pressure_mb);
  const cpp_dec_float_50 e(l.vapor_pressure_mb);
  const cpp_dec_float_50 z(l.altitude_m);
  return cpp_dec_float_50("77.6") * p / t + cpp_dec_float_50(373256) * e / (t * t) +
         z / cpp_dec_float_50(radius) * cpp_dec_float_50(1000000);
}

}  // namespace

TEST_CASE("modified refractivity scalar examples") {
  CHECK(modified_refractivity({6371.0, 288.0, 0.0, 0.0}) == doctest::Approx(1000.0).epsilon(1e-15));
  CHECK(modified_refractivity({0.0, 300.0, 1013.25, 25.0}) == doctest::Approx(365.78).epsilon(0.0001));
  CHECK(modified_refractivity({0.0, 288.15, 1013.25, 10.2}) == doctest::Approx(318.73).epsilon(0.0001));
}

TEST_CASE("modified refractivity matches 50-digit evaluation") {
  DeterministicRng rng(404);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(0.0, 1100.0);
    const AtmosphericLevel l{rng.uniform(0.0, 3000.0), rng.uniform(200.0, 330.0), p, rng.uniform(0.0, std::min(p, 60.0))};
    const double got = modified_refractivity(l);
    const double want = static_cast<double>(reference_m(l, 6.371e6));
    REQUIRE(std::abs(got - want) <= 1e-12 * std::abs(want));
  }
}

TEST_CASE("curvature term alone") {
  for (double z : {0.0, 1.0, 30.0, 300.0, 5000.0}) {
    CHECK(modified_refractivity({z, 250.0, 0.0, 0.0}) == z / 6.371e6 * 1e6);
  }
}

TEST_CASE("modified refractivity monotonicity") {
  const AtmosphericLevel base{10.0, 290.0, 1000.0, 15.0};
  const double m0 = modified_refractivity(base);
  auto l = base;
  l.pressure_mb += 1.0;
  CHECK(modified_refractivity(l) > m0);
  l = base;
  l.vapor_pressure_mb += 1.0;
  CHECK(modified_refractivity(l) > m0);
  l = base;
  l.altitude_m += 1.0;
  CHECK(modified_refractivity(l) > m0);
  l = base;
  l.temperature_k += 1.0;
  CHECK(modified_refractivity(l) < m0);
}

TEST_CASE("modified refractivity rejects invalid levels") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(modified_refractivity({0.0, nan, 1000.0, 10.0}), InvalidInputError);
  CHECK_THROWS_AS(modified_refractivity({0.0, 0.0, 1000.0, 10.0}), InvalidInputError);
  CHECK_THROWS_AS(modified_refractivity({0.0, 290.0, 10.0, 20.0}), InvalidInputError);
  CHECK_THROWS_AS(modified_refractivity({-1.0, 290.0, 1000.0, 10.0}), InvalidInputError);
  CHECK_THROWS_AS(modified_refractivity({0.0, 290.0, 1000.0, 10.0}, {0.0}), InvalidInputError);
}

TEST_CASE("standard atmosphere") {
  const auto p = standard_atmosphere_profile(30.0, 2, 340.0, 0.118);
  REQUIRE(p.levels().size() == 2);
  CHECK(p.levels()[0].altitude_m == 0.0);
  CHECK(p.levels()[0].m_units == 340.0);
  CHECK(p.levels()[1].altitude_m == 30.0);
  CHECK(p.levels()[1].m_units == doctest::Approx(343.54).epsilon(1e-12));

  const auto q = standard_atmosphere_profile(300.0, 301);
  for (std::size_t i = 1; i < q.levels().size(); ++i) CHECK(q.levels()[i].m_units > q.levels()[i - 1].m_units);
}

TEST_CASE("profile invariants are enforced") {
  CHECK_THROWS_AS(ModifiedRefractivityProfile({{0.0, 300.0}}, "x"), InvalidInputError);
  CHECK_THROWS_AS(ModifiedRefractivityProfile({{0.0, 300.0}, {0.0, 301.0}}, "x"), InvalidInputError);
  CHECK_THROWS_AS(ModifiedRefractivityProfile({{0.0, 300.0}, {1.0, std::nan("")}}, "x"), InvalidInputError);
  const ModifiedRefractivityProfile p({{0.0, 300.0}, {10.0, 310.0}, {20.0, 305.0}}, "x");
  CHECK(p.value_at(5.0) == doctest::Approx(305.0));
  CHECK(p.value_at(15.0) == doctest::Approx(307.5));
  CHECK(p.value_at(30.0) == doctest::Approx(300.0));
}

TEST_CASE("evaporation duct shape") {
  const auto grid = default_profile_grid(100.0);
  DuctParameters params;
  params.family = ProfileFamily::Evaporation;

  SUBCASE("no duct is monotone") {
    params.duct_height_m = 0.0;
    const auto p = duct_profile(params, grid);
    for (std::size_t i = 1; i < p.levels().size(); ++i) CHECK(p.levels()[i].m_units > p.levels()[i - 1].m_units);
  }
  SUBCASE("minimum at the duct height") {
    params.duct_height_m = 24.0;
    const auto p = duct_profile(params, grid);
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < p.levels().size(); ++i) {
      if (p.levels()[i].m_units < p.levels()[argmin].m_units) argmin = i;
    }
    CHECK(p.levels()[argmin].altitude_m == doctest::Approx(24.0).epsilon(1e-9));
    int sign_changes = 0;
    for (std::size_t i = 2; i < p.levels().size(); ++i) {
      const double d0 = p.levels()[i - 1].m_units - p.levels()[i - 2].m_units;
      const double d1 = p.levels()[i].m_units - p.levels()[i - 1].m_units;
      if ((d0 < 0) != (d1 < 0)) ++sign_changes;
    }
    CHECK(sign_changes == 1);
  }
  SUBCASE("height limit") {
    params.duct_height_m = 41.0;
    CHECK_THROWS_AS(duct_profile(params, grid), InvalidInputError);
  }
}

TEST_CASE("standard family delegates") {
  const auto grid = default_profile_grid(50.0);
  DuctParameters params;
  params.family = ProfileFamily::Standard;
  params.base_m_units = 333.0;
  const auto p = duct_profile(params, grid);
  const ModifiedRefractivityProfile direct = standard_atmosphere_profile(50.0, 2, 333.0);
  for (const auto& l : p.levels()) CHECK(l.m_units == doctest::Approx(direct.value_at(l.altitude_m)).epsilon(1e-12));
}

TEST_CASE("trilinear families trap inside their layer") {
  const auto grid = default_profile_grid(400.0);
  DuctParameters params;
  params.family = ProfileFamily::Elevated;
  params.duct_height_m = 150.0;
  params.strength_m_units = 20.0;
  const auto p = duct_profile(params, grid);
  CHECK(p.value_at(150.0) < p.value_at(120.0));
  CHECK(p.value_at(100.0) > p.value_at(50.0));
  CHECK(p.value_at(300.0) > p.value_at(150.0));
  CHECK_THROWS_AS(parse_profile_family("tropical"), ConfigurationError);
}

TEST_CASE("family sampling is deterministic") {
  const auto spec = default_family_spec(ProfileFamily::Evaporation);
  const auto a = sample_profile_family(7, spec, 100);
  const auto b = sample_profile_family(7, spec, 100);
  REQUIRE(a.size() == 100);
  CHECK(a == b);
  CHECK(sample_profile_family(7, spec, 1).size() == 1);
  CHECK(sample_profile_family(8, spec, 100) != a);
  for (const auto& p : a) {
    const double h = p.parameters().at("duct_height_m").get<double>();
    CHECK(h >= 2.0);
    CHECK(h <= 35.0);
  }
  auto bad = spec;
  bad.duct_height = {5.0, 1.0};
  CHECK_THROWS_AS(sample_profile_family(7, bad, 3), ConfigurationError);
}

TEST_CASE("profile json round trip") {
  const auto spec = default_family_spec(ProfileFamily::SurfaceTrilinear);
  const auto p = sample_profile_family(3, spec, 1).front();
  const auto path = std::filesystem::temp_directory_path() / "ductwave_profile_test.json";
  save_profile(p, path);
  CHECK(load_profile(path) == p);
  std::filesystem::remove(path);
}
