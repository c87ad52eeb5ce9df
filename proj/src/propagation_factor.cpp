#include "ductwave/propagation_factor.hpp"

#include <cmath>
#include <complex>

#include "ductwave/errors.hpp"

namespace ductwave {

DecibelValue f_to_fdb(double f, const DecibelOptions& options) {
  if (std::isnan(f) || f < 0.0) throw InvalidInputError("f_to_fdb: F must be non-negative");
  if (f < options.f_floor) return {options.factor * std::log10(options.f_floor), true};
  return {options.factor * std::log10(f), false};
}

DecibelValue propagation_loss(double f, const SolverConfig& config, double range_m, const DecibelOptions& options) {
  if (!(range_m > 0.0)) throw InvalidInputError("propagation_loss: range must be positive");
  if (std::isnan(f) || f < 0.0) throw InvalidInputError("propagation_loss: F must be non-negative");
  const bool clamped = f < options.f_floor;
  const double f_used = clamped ? options.f_floor : f;
  const double spreading = 2.0 * config.wavenumber() * range_m;
  return {20.0 * std::log10(spreading) - 20.0 * std::log10(f_used), clamped};
}

double received_power(const LinkBudget& budget, double f, const SolverConfig& config) {
  if (!(budget.range_m > 0.0)) throw InvalidInputError("received_power: range must be positive");
  if (!(budget.transmit_power_w > 0.0) || !(budget.transmit_gain > 0.0) || !(budget.receive_gain > 0.0)) {
    throw InvalidInputError("received_power: power and gains must be positive");
  }
  if (std::isnan(f) || f < 0.0) throw InvalidInputError("received_power: F must be non-negative");
  const double ratio = f / (2.0 * config.wavenumber() * budget.range_m);
  return budget.transmit_power_w * budget.transmit_gain * budget.receive_gain * ratio * ratio;
}

std::vector<double> two_ray_reference(const SolverConfig& config, const std::vector<RangeAltitude>& points) {
  const double k0 = config.wavenumber();
  const double ht = config.antenna_height_m;
  const std::complex<double> reflection(-1.0, 0.0);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double phase = 2.0 * k0 * ht * p.altitude_m / p.range_m;
    out.push_back(std::abs(1.0 + reflection * std::polar(1.0, phase)));
  }
  return out;
}

}  // namespace ductwave
