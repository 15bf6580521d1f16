#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixflow/core_models.hpp"
#include "mixflow/platoon.hpp"

namespace mixflow {

/// Non-finite state during integration.
class IntegrationFault : public std::runtime_error {
public:
  IntegrationFault(const std::string& what, double time, std::size_t vehicle);
  double time() const noexcept { return time_; }
  std::size_t vehicle() const noexcept { return vehicle_; }

private:
  double time_;
  std::size_t vehicle_;
};

struct IntegratorConfig {
  double step = 0.01;     // s
  double horizon = 100.0; // s
  /// Keep every n-th step in the trajectory (the final step is always kept).
  std::size_t record_stride = 1;

  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

/// Leader disturbance on top of cruising at v_star.
struct Perturbation {
  enum class Kind { none, sinusoid, brake_pulse };

  Kind kind = Kind::none;
  double amplitude = 0.0; // m/s, sinusoid speed amplitude
  double omega = 0.0;     // rad/s
  double decel = 0.0;     // m/s^2, negative
  double duration = 0.0;  // s, braking phase; recovery takes as long
  double start = 0.0;     // s

  static Perturbation sinusoid(double amplitude, double omega);
  static Perturbation brake_pulse(double decel, double duration, double start);

  /// Characteristic period: 2 pi / omega, or the brake-and-recover time.
  double period() const;

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

std::string to_string(Perturbation::Kind kind);

struct AccelLimits {
  double min = -6.0; // m/s^2
  double max = 3.0;  // m/s^2
  friend bool operator==(const AccelLimits&, const AccelLimits&) = default;
};

/// Throws std::invalid_argument for negative amplitudes, a deceleration
/// outside [a_min, 0) or a pulse that would stop the leader.
void validate(const Perturbation& pert, double v_star, const AccelLimits& limits);

/// Prescribed leader kinematics; position 0 at t = 0.
struct LeaderState {
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
};
LeaderState leader_state(const Perturbation& pert, double v_star, double t);

// Car-following laws -------------------------------------------------------

struct DelayedObservation {
  double gap = 0.0;        // m, x_{i-1} - x_i at t - tau
  double speed = 0.0;      // m/s, own speed at t - tau
  double speed_diff = 0.0; // m/s, v_{i-1} - v_i at t - tau
};

/// alpha (max(V(gap), 0) - speed) + beta speed_diff on delayed observations.
double hdv_accel_nonlinear(const DelayedObservation& obs, const HdvParams& p, const OptimalVelocityFn& ovf);

/// Deviations from the equilibrium reference, sampled at t - tau.
struct DelayedDeviation {
  double pred_position = 0.0;
  double position = 0.0;
  double pred_speed = 0.0;
  double speed = 0.0;
};

/// k1 (dx_{i-1} - dx_i - lambda2 dv_i) - k2 dv_i + k3 (dv_{i-1} - dv_i).
double hdv_accel_linear(const DelayedDeviation& dev, const LinearGains& gains, double lambda2);

struct CavObservation {
  double gap = 0.0;
  double speed = 0.0;
  double pred_speed = 0.0;
};

/// k1 (gap - lambda2 v - lambda3) - k2 (v - v_star) + k3 (v_{i-1} - v).
double cav_accel(const CavObservation& obs, const CavGains& g, double v_star);

enum class ControllerKind { none, fvdm, acc, cacc, multi_pred };
std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& text);

struct ReferenceGains {
  double kv = 0.6; // 1/s
  double kp = 0.2; // 1/s^2
  double ka = 0.5; // dimensionless
  friend bool operator==(const ReferenceGains&, const ReferenceGains&) = default;
};

/// Desired headway lambda1 (v_i^2 - v_{i-1}^2) + lambda2 v_i + lambda3.
struct HeadwayPolicy {
  double lambda1 = 0.0;   // s^2/m
  double lambda2 = 1.125; // s
  double lambda3 = 0.0;   // m
  friend bool operator==(const HeadwayPolicy&, const HeadwayPolicy&) = default;
};

struct ReferenceInput {
  double gap = 0.0;
  double speed = 0.0;
  double pred_accel = 0.0;
  /// v_{i-1}, v_{i-2}, ... nearest predecessor first; must not be empty.
  std::span<const double> predecessor_speeds;
};

struct ReferenceCommand {
  double accel = 0.0;
  /// The multi-predecessor window reached past the first vehicle.
  bool window_truncated = false;
};

/// ACC, CACC or multi-predecessor CACC command clamped to the limits.
/// `window` is the multi-predecessor n (>= 2); ignored otherwise.
ReferenceCommand reference_controller_accel(ControllerKind kind, const ReferenceInput& in,
                                            const ReferenceGains& gains, const HeadwayPolicy& policy,
                                            const AccelLimits& limits, std::size_t window = 2);

// Simulation ---------------------------------------------------------------

enum class HdvModel { linear, nonlinear };
std::string to_string(HdvModel model);
HdvModel parse_hdv_model(const std::string& text);

struct SimulationSetup {
  PlatoonSpec spec;
  OptimalVelocityFn ovf;
  HdvModel hdv_model = HdvModel::nonlinear;
  /// Controller in the CAV slot; none removes the CAV from the platoon.
  ControllerKind controller = ControllerKind::fvdm;
  ReferenceGains reference_gains;
  double reference_lambda1 = 0.0;
  std::size_t multi_pred_window = 2;
  AccelLimits limits;
  Perturbation perturbation;
  IntegratorConfig integrator;
  /// Gap at or below which a collision is recorded; defaults to l_c.
  std::optional<double> collision_gap;
};

enum class VehicleRole { leader, cav, hdv };

struct VehicleSeries {
  VehicleRole role = VehicleRole::hdv;
  std::vector<double> x;
  std::vector<double> v;
  std::vector<double> a;
  /// x_{i-1} - x_i; NaN for the leader.
  std::vector<double> gap;
};

struct CollisionEvent {
  double time = 0.0;
  std::size_t vehicle = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<VehicleSeries> vehicles;
  std::optional<CollisionEvent> collision;
  bool window_truncated = false;

  std::size_t vehicle_count() const { return vehicles.size(); }
};

/// Throws std::invalid_argument when the step is not positive, exceeds a
/// quarter of the smallest positive delay, or the horizon is shorter than
/// ten perturbation periods.
void validate(const IntegratorConfig& cfg, std::span<const HdvParams> hdvs, const Perturbation& pert);

/// Fixed-step Heun integration of the platoon. Delayed states come from a
/// per-vehicle history with linear interpolation; for t <= 0 the history is
/// the equilibrium. The linear model integrates deviations from the
/// reference trajectory, the nonlinear one absolute states with the HDVs
/// spaced at V^-1(v_star).
Trajectory simulate(const SimulationSetup& setup);

/// Steady-state speed amplitude of one vehicle at the driving frequency,
/// from a projection onto sin/cos over the last `fraction` of the run
/// trimmed to whole periods.
double steady_state_amplitude(const Trajectory& traj, std::size_t vehicle, double omega, double v_star,
                              double fraction = 0.2);

// Safety ------------------------------------------------------------------

struct VehicleSafety {
  double min_ttc = 0.0;   // s; +inf when never closing
  double tet = 0.0;       // s
  double tit = 0.0;       // s^2
  std::size_t headway_violations = 0;
  bool collision = false;
};

struct SafetyReport {
  double ttc_threshold = 0.0;
  /// Index k describes vehicle k + 1 (the leader has no predecessor).
  std::vector<VehicleSafety> vehicles;
};

/// (gap - l_c) / (v_i - v_{i-1}) while closing, else +inf.
double time_to_collision(double gap, double speed, double pred_speed, double vehicle_length);

/// TET and TIT integrate over each sample interval using its left sample.
SafetyReport safety_metrics(const Trajectory& traj, double ttc_threshold, const SafetyEnvelope& env,
                            double vehicle_length);

} // namespace mixflow
