#pragma once

#include <cstdint>
#include <vector>

#include "mixflow/core_models.hpp"

namespace mixflow {

struct NormalDist {
  double mean = 0.0;
  double sd = 0.0;

  friend bool operator==(const NormalDist&, const NormalDist&) = default;
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Heterogeneous HDV population. Second moments are standard deviations.
struct PopulationSpec {
  std::size_t count = 200;
  NormalDist alpha{0.04, 0.004};
  NormalDist beta{0.185, 0.018};
  NormalDist desired_headway{30.125, 3.0};
  /// tau = delay_coefficient / alpha.
  double delay_coefficient = 1.0 / 2500.0;
  std::uint64_t seed = 42;
  double lambda2 = 1.125; // s
  /// Equilibrium speed used to derive lambda3 from the sampled headway.
  double v_star = 13.4112;
  Bounds alpha_bounds{0.005, 0.2};
  Bounds beta_bounds{0.0, 0.5};
  Bounds headway_bounds{10.0, 60.0};

  friend bool operator==(const PopulationSpec&, const PopulationSpec&) = default;
};

/// Truncation bounds from the vehicle length: alpha in [0.005, 0.2],
/// beta in [0, 0.5], desired headway in [l_c + 5, 60].
PopulationSpec default_population_spec(double vehicle_length = 5.0);

void validate(const PopulationSpec& spec, double vehicle_length);

/// tau = c_tau / alpha. Throws std::domain_error for alpha <= 0.
double delay_from_sensitivity(double alpha, double c_tau);

/// Draws `count` drivers from one seeded stream; per driver the order is
/// alpha, beta, desired headway, each rejection-sampled into its bounds.
std::vector<HdvParams> sample_population(const PopulationSpec& spec, double vehicle_length = 5.0);

/// Every driver replaced by the population mean (alpha, beta, desired
/// headway, lambda2, lambda3) with zero delay.
std::vector<HdvParams> homogeneous_baseline(const std::vector<HdvParams>& population);

} // namespace mixflow
