#pragma once

#include <utility>
#include <vector>

#include "ductwave/pe_solver.hpp"

namespace ductwave {

struct DecibelOptions {
  /// Multiplier of log10|F|. 10 as the dB conversion is printed; 20 is the
  /// conventional field-quantity form.
  double factor = 10.0;
  /// Floor substituted for F below it (and for F = 0).
  double f_floor = 1e-9;
};

struct DecibelValue {
  double db = 0.0;
  bool clamped = false;
};

DecibelValue f_to_fdb(double f, const DecibelOptions& options = {});

/// P_L = 20 log10(2 k0 R) - 20 log10(F).
DecibelValue propagation_loss(double f, const SolverConfig& config, double range_m,
                              const DecibelOptions& options = {});

struct LinkBudget {
  double transmit_power_w = 1.0;
  double transmit_gain = 1.0;
  double receive_gain = 1.0;
  double range_m = 1.0;
};

/// P_r = P_t G_t G_r (F / (2 k0 R))^2.
double received_power(const LinkBudget& budget, double f, const SolverConfig& config);

struct RangeAltitude {
  double range_m;
  double altitude_m;
};

/// Flat-earth two-ray propagation factor over a perfectly reflecting surface:
/// F = |1 - exp(i 2 k0 h_t h_r / r)|.
std::vector<double> two_ray_reference(const SolverConfig& config, const std::vector<RangeAltitude>& points);

}  // namespace ductwave
