#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ductwave/errors.hpp"
#include "ductwave/propagation_factor.hpp"

using namespace ductwave;

TEST_CASE("f_to_fdb") {
  CHECK(f_to_fdb(1.0).db == 0.0);
  CHECK(f_to_fdb(10.0).db == doctest::Approx(10.0));
  CHECK(f_to_fdb(16.45).db == doctest::Approx(12.16).epsilon(5e-4));
  const auto floor = f_to_fdb(0.0);
  CHECK(floor.clamped);
  CHECK(floor.db == doctest::Approx(-90.0));
  CHECK(f_to_fdb(10.0, {20.0, 1e-9}).db == doctest::Approx(20.0));
  CHECK_THROWS_AS(f_to_fdb(-1e-3), InvalidInputError);
  CHECK_THROWS_AS(f_to_fdb(std::nan("")), InvalidInputError);
}

TEST_CASE("propagation loss") {
  SolverConfig c;
  const double k0 = c.wavenumber();
  CHECK(k0 == doctest::Approx(62.832).epsilon(1e-3));
  CHECK(propagation_loss(1.0, c, 1e6 / (2.0 * k0)).db == doctest::Approx(120.0));
  CHECK(std::abs(propagation_loss(1.0, c, 1e4).db - 121.98) < 0.02);
  CHECK(propagation_loss(1.0, c, 1e4).db - propagation_loss(2.0, c, 1e4).db == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK_THROWS_AS(propagation_loss(1.0, c, 0.0), InvalidInputError);
}

TEST_CASE("received power") {
  SolverConfig c;
  const double r = 1e3 / (2.0 * c.wavenumber());
  CHECK(received_power({1.0, 1.0, 1.0, r}, 0.0, c) == 0.0);
  CHECK(received_power({1.0, 1.0, 1.0, r}, 1.0, c) == doctest::Approx(1e-6));
  CHECK(received_power({1.0, 2.0, 1.0, r}, 1.0, c) == doctest::Approx(2e-6));
  CHECK(received_power({1.0, 1.0, 1.0, r}, 2.0, c) == doctest::Approx(4e-6));
  CHECK_THROWS_AS(received_power({1.0, 1.0, 1.0, 0.0}, 1.0, c), InvalidInputError);
}

TEST_CASE("two-ray reference") {
  SolverConfig c;
  const double lambda = c.wavelength();
  CHECK(lambda == doctest::Approx(0.09993).epsilon(1e-4));
  const double ht = c.antenna_height_m;
  const double r = 5000.0;
  // Phase difference 2 k0 ht hr / r equals pi at hr = lambda r / (4 ht).
  const double hr_max = lambda * r / (4.0 * ht);
  CHECK(two_ray_reference(c, {{r, hr_max}})[0] == doctest::Approx(2.0).epsilon(1e-12));
  for (int n = 1; n <= 2; ++n) {
    const double null = n * lambda * r / (2.0 * ht);
    CHECK(null == doctest::Approx(12.49 * n).epsilon(1e-3));
    CHECK(two_ray_reference(c, {{r, null}})[0] == doctest::Approx(0.0).epsilon(1e-9));
  }
}
