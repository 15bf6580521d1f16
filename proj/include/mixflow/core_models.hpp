#pragma once

#include <cstddef>
#include <vector>

namespace mixflow {

/// Tanh-shaped desired-speed curve of the optimal velocity model:
///   V(gap) = amplitude * (tanh(slope * (gap - offset)) + shift)
/// Defaults are the Koshi/Bando motorway calibration with a 5 m vehicle.
struct OptimalVelocityFn {
  double amplitude = 16.8;      // m/s
  double slope = 0.0860;        // 1/m
  double offset = 25.0;         // m, 20 m plus the vehicle length
  double shift = 0.913;         // dimensionless
  double vehicle_length = 5.0;  // m

  /// Curve with the offset tied to the vehicle length (20 m + l_c).
  static OptimalVelocityFn bando(double vehicle_length = 5.0);

  friend bool operator==(const OptimalVelocityFn&, const OptimalVelocityFn&) = default;
};

/// Throws std::invalid_argument when a field violates its invariant.
void validate(const OptimalVelocityFn& ovf);

/// One human driver in the full velocity difference model with delay.
struct HdvParams {
  double alpha = 0.04;             // 1/s, sensitivity
  double beta = 0.185;             // 1/s, velocity-difference weight
  double tau = 0.0;                // s, perception-reaction delay
  double desired_headway = 30.125; // m
  double lambda2 = 1.125;          // s, time-headway slope
  double lambda3 = 0.0;            // m, constant headway term

  friend bool operator==(const HdvParams&, const HdvParams&) = default;
};

void validate(const HdvParams& p);

/// Constant headway term that makes lambda2 * v + lambda3 equal the desired
/// headway at the equilibrium speed.
double default_lambda3(double desired_headway, double lambda2, double v_star);

/// Gains of the linearized car-following law around equilibrium.
struct LinearGains {
  double k1 = 0.0; // 1/s^2, spacing error
  double k2 = 0.0; // 1/s,   own speed error
  double k3 = 0.0; // 1/s,   relative speed

  friend bool operator==(const LinearGains&, const LinearGains&) = default;
};

/// Decision variables of the CAV controller plus its headway policy.
/// lambda3 only shifts the equilibrium spacing; it never enters the
/// transfer function.
struct CavGains {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double lambda2 = 1.125; // s
  double lambda3 = 0.0;   // m

  friend bool operator==(const CavGains&, const CavGains&) = default;
};

/// Vehicle 0 is the uncontrolled leader, vehicle 1 the CAV, then the HDVs in
/// upstream order (nearest to the CAV first).
struct PlatoonSpec {
  double v_star = 13.4112; // m/s
  CavGains cav;
  std::vector<HdvParams> hdvs;
  double headway_min = 10.0; // m
  double headway_max = 50.0; // m

  friend bool operator==(const PlatoonSpec&, const PlatoonSpec&) = default;
};

void validate(const PlatoonSpec& spec, const OptimalVelocityFn& ovf);

double optimal_velocity(double gap, const OptimalVelocityFn& ovf);

/// dV/dgap.
double optimal_velocity_slope(double gap, const OptimalVelocityFn& ovf);

/// Unique gap with optimal_velocity(gap) == speed, found by bisection.
/// Throws std::range_error when no finite nonnegative gap exists.
double invert_optimal_velocity(double speed, const OptimalVelocityFn& ovf);

/// k1 = alpha * V'(desired_headway), k2 = alpha, k3 = beta.
LinearGains linearize_hdv(const HdvParams& p, const OptimalVelocityFn& ovf);

/// Uniform-flow reference: every vehicle at v_star, spaced by the cumulative
/// desired headways lambda2 * v_star + lambda3 behind a leader starting at 0.
class ReferenceTrajectory {
public:
  ReferenceTrajectory(std::vector<double> initial_positions, double v_star, double horizon);

  std::size_t vehicle_count() const { return initial_positions_.size(); }
  double v_star() const { return v_star_; }
  double horizon() const { return horizon_; }
  double initial_position(std::size_t vehicle) const;
  double position(std::size_t vehicle, double t) const;
  double spacing(std::size_t vehicle) const;

private:
  std::vector<double> initial_positions_;
  double v_star_;
  double horizon_;
};

/// References for the leader, the CAV and every HDV of the spec.
ReferenceTrajectory equilibrium_trajectory(const PlatoonSpec& spec, double horizon);

} // namespace mixflow
