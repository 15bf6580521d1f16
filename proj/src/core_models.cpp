#include "mixflow/core_models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixflow {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw std::invalid_argument(what);
  }
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

OptimalVelocityFn OptimalVelocityFn::bando(double vehicle_length) {
  OptimalVelocityFn ovf;
  ovf.vehicle_length = vehicle_length;
  ovf.offset = 20.0 + vehicle_length;
  return ovf;
}

void validate(const OptimalVelocityFn& ovf) {
  require(finite(ovf.amplitude) && ovf.amplitude > 0.0, "optimal velocity amplitude must be > 0");
  require(finite(ovf.slope) && ovf.slope > 0.0, "optimal velocity slope must be > 0");
  require(finite(ovf.offset), "optimal velocity offset must be finite");
  require(finite(ovf.shift), "optimal velocity shift must be finite");
  require(finite(ovf.vehicle_length) && ovf.vehicle_length > 0.0, "vehicle length must be > 0");
}

void validate(const HdvParams& p) {
  require(finite(p.alpha) && p.alpha > 0.0, "HDV alpha must be > 0");
  require(finite(p.beta) && p.beta >= 0.0, "HDV beta must be >= 0");
  require(finite(p.tau) && p.tau >= 0.0, "HDV tau must be >= 0");
  require(finite(p.desired_headway) && p.desired_headway > 0.0, "HDV desired headway must be > 0");
  require(finite(p.lambda2) && p.lambda2 >= 0.0, "HDV lambda2 must be >= 0");
  require(finite(p.lambda3), "HDV lambda3 must be finite");
}

double default_lambda3(double desired_headway, double lambda2, double v_star) {
  return desired_headway - lambda2 * v_star;
}

void validate(const PlatoonSpec& spec, const OptimalVelocityFn& ovf) {
  validate(ovf);
  require(finite(spec.v_star) && spec.v_star > 0.0, "v_star must be > 0");
  require(finite(spec.headway_min) && spec.headway_min >= ovf.vehicle_length,
          "headway_min must be >= the vehicle length");
  require(finite(spec.headway_max) && spec.headway_max > spec.headway_min,
          "headway_max must exceed headway_min");
  require(finite(spec.cav.k1) && finite(spec.cav.k2) && finite(spec.cav.k3) && spec.cav.k1 >= 0.0 &&
              spec.cav.k2 >= 0.0 && spec.cav.k3 >= 0.0,
          "CAV gains must be nonnegative (k1, k2, k3 >= 0)");
  require(finite(spec.cav.lambda2) && spec.cav.lambda2 >= 0.0, "CAV lambda2 must be >= 0");
  require(finite(spec.cav.lambda3), "CAV lambda3 must be finite");
  for (const auto& p : spec.hdvs) {
    validate(p);
  }
}

double optimal_velocity(double gap, const OptimalVelocityFn& ovf) {
  if (!finite(gap) || gap < 0.0) {
    throw std::domain_error("optimal_velocity: gap must be finite and >= 0, got " + std::to_string(gap));
  }
  return ovf.amplitude * (std::tanh(ovf.slope * (gap - ovf.offset)) + ovf.shift);
}

double optimal_velocity_slope(double gap, const OptimalVelocityFn& ovf) {
  if (std::isnan(gap)) {
    throw std::domain_error("optimal_velocity_slope: gap is NaN");
  }
  if (std::isinf(gap)) {
    return 0.0;
  }
  const double th = std::tanh(ovf.slope * (gap - ovf.offset));
  return ovf.amplitude * ovf.slope * (1.0 - th * th);
}

double invert_optimal_velocity(double speed, const OptimalVelocityFn& ovf) {
  const double lower = ovf.amplitude * (ovf.shift - 1.0);
  const double upper = ovf.amplitude * (ovf.shift + 1.0);
  if (!finite(speed) || speed <= lower || speed >= upper) {
    throw std::range_error("invert_optimal_velocity: speed " + std::to_string(speed) +
                           " outside the open range of the optimal velocity curve");
  }
  double lo = 0.0;
  double hi = 10.0 * ovf.offset;
  if (optimal_velocity(lo, ovf) > speed || optimal_velocity(hi, ovf) < speed) {
    throw std::range_error("invert_optimal_velocity: no gap in [0, " + std::to_string(hi) +
                           "] m reaches speed " + std::to_string(speed));
  }
  // Bracket width shrinks to 1e-12 m, well inside the 1e-10 target.
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (optimal_velocity(mid, ovf) < speed) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

LinearGains linearize_hdv(const HdvParams& p, const OptimalVelocityFn& ovf) {
  validate(p);
  return LinearGains{p.alpha * optimal_velocity_slope(p.desired_headway, ovf), p.alpha, p.beta};
}

ReferenceTrajectory::ReferenceTrajectory(std::vector<double> initial_positions, double v_star,
                                         double horizon)
    : initial_positions_(std::move(initial_positions)), v_star_(v_star), horizon_(horizon) {}

double ReferenceTrajectory::initial_position(std::size_t vehicle) const {
  return initial_positions_.at(vehicle);
}

double ReferenceTrajectory::position(std::size_t vehicle, double t) const {
  return initial_positions_.at(vehicle) + t * v_star_;
}

double ReferenceTrajectory::spacing(std::size_t vehicle) const {
  if (vehicle == 0) {
    throw std::out_of_range("the leader has no spacing");
  }
  return initial_positions_.at(vehicle - 1) - initial_positions_.at(vehicle);
}

ReferenceTrajectory equilibrium_trajectory(const PlatoonSpec& spec, double horizon) {
  if (!finite(horizon) || horizon < 0.0) {
    throw std::invalid_argument("equilibrium_trajectory: horizon must be >= 0");
  }
  std::vector<double> x0;
  x0.reserve(spec.hdvs.size() + 2);
  x0.push_back(0.0);
  double cumulative = spec.cav.lambda2 * spec.v_star + spec.cav.lambda3;
  x0.push_back(-cumulative);
  for (const auto& p : spec.hdvs) {
    cumulative += p.lambda2 * spec.v_star + p.lambda3;
    x0.push_back(-cumulative);
  }
  return ReferenceTrajectory(std::move(x0), spec.v_star, horizon);
}

} // namespace mixflow
