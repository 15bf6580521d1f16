#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mixflow/core_models.hpp"

using namespace mixflow;

namespace {

// Reference values from a 40-digit evaluation of the tanh curve.
constexpr double kSpeedAtZeroGap = -1.011799560990463475;
constexpr double kSlopeAtDesired = 1.196848834867331129;
constexpr double kGapAt30Mph = 23.66021528398457122;

} // namespace

TEST_CASE("optimal velocity at reference gaps") {
  const OptimalVelocityFn ovf;
  CHECK(optimal_velocity(25.0, ovf) == doctest::Approx(16.8 * 0.913).epsilon(1e-15));
  CHECK(optimal_velocity(0.0, ovf) == doctest::Approx(kSpeedAtZeroGap).epsilon(1e-14));
  CHECK(optimal_velocity(1e6, ovf) == doctest::Approx(16.8 * 1.913).epsilon(1e-15));
  CHECK_THROWS_AS(optimal_velocity(std::numeric_limits<double>::infinity(), ovf), std::domain_error);
  CHECK_THROWS_AS(optimal_velocity(-1.0, ovf), std::domain_error);
  CHECK_THROWS_AS(optimal_velocity(std::nan(""), ovf), std::domain_error);
}

TEST_CASE("optimal velocity slope") {
  const OptimalVelocityFn ovf;
  CHECK(optimal_velocity_slope(25.0, ovf) == doctest::Approx(1.4448).epsilon(1e-15));
  CHECK(optimal_velocity_slope(30.125, ovf) == doctest::Approx(kSlopeAtDesired).epsilon(1e-14));
  CHECK(optimal_velocity_slope(std::numeric_limits<double>::infinity(), ovf) == 0.0);
  CHECK(optimal_velocity_slope(-std::numeric_limits<double>::infinity(), ovf) == 0.0);
  CHECK_THROWS(optimal_velocity_slope(std::nan(""), ovf));

  const double h = 1e-4;
  const double fd = (optimal_velocity(30.125 + h, ovf) - optimal_velocity(30.125 - h, ovf)) / (2 * h);
  CHECK(std::abs(fd - optimal_velocity_slope(30.125, ovf)) <= 1e-6);
}

TEST_CASE("slope matches finite differences on random gaps") {
  const OptimalVelocityFn ovf;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> gap(5.0, 100.0);
  for (int i = 0; i < 100; ++i) {
    const double g = gap(rng);
    const double h = 1e-4;
    const double fd = (optimal_velocity(g + h, ovf) - optimal_velocity(g - h, ovf)) / (2 * h);
    const double exact = optimal_velocity_slope(g, ovf);
    CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-3));
  }
}

TEST_CASE("optimal velocity is strictly increasing") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(1.0, 40.0), slope(0.01, 0.3), offset(5.0, 50.0), shift(0.0, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    OptimalVelocityFn ovf{amp(rng), slope(rng), offset(rng), shift(rng), 5.0};
    double prev = optimal_velocity(0.0, ovf);
    int increasing = 0;
    for (int k = 1; k < 1000; ++k) {
      const double v = optimal_velocity(200.0 * k / 999.0, ovf);
      increasing += v > prev;
      prev = v;
    }
    // Far into saturation, tanh rounds to exactly 1 in double precision.
    const double sat_gap = ovf.offset + 18.0 / ovf.slope;
    if (sat_gap > 200.0) {
      CHECK(increasing == 999);
    }
    CHECK(optimal_velocity_slope(100.0, ovf) >= 0.0);
  }
}

TEST_CASE("inverse of the velocity curve") {
  const OptimalVelocityFn ovf;
  CHECK(invert_optimal_velocity(16.8 * 0.913, ovf) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(invert_optimal_velocity(13.4112, ovf) == doctest::Approx(kGapAt30Mph).epsilon(1e-11));
  CHECK(optimal_velocity(invert_optimal_velocity(13.4112, ovf), ovf) == doctest::Approx(13.4112).epsilon(1e-12));
  CHECK_THROWS_AS(invert_optimal_velocity(16.8 * 1.913, ovf), std::range_error);
  CHECK_THROWS_AS(invert_optimal_velocity(kSpeedAtZeroGap - 1.0, ovf), std::range_error);
}

TEST_CASE("linearization") {
  const OptimalVelocityFn ovf;
  HdvParams p;
  p.desired_headway = 25.0;
  const auto g = linearize_hdv(p, ovf);
  CHECK(g.k1 == doctest::Approx(0.057792).epsilon(1e-14));
  CHECK(g.k2 == 0.04);
  CHECK(g.k3 == 0.185);

  p.beta = 0.0;
  CHECK(linearize_hdv(p, ovf).k3 == 0.0);
  p.alpha = 0.0;
  CHECK_THROWS_AS(linearize_hdv(p, ovf), std::invalid_argument);
}

TEST_CASE("linearization equals its definition on random drivers") {
  const OptimalVelocityFn ovf;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(0.01, 1.0), b(0.0, 1.0), h(10.0, 60.0);
  for (int i = 0; i < 100; ++i) {
    HdvParams p;
    p.alpha = a(rng);
    p.beta = b(rng);
    p.desired_headway = h(rng);
    const double t = std::tanh(ovf.slope * (p.desired_headway - ovf.offset));
    const auto g = linearize_hdv(p, ovf);
    CHECK(g.k1 == p.alpha * (ovf.amplitude * ovf.slope * (1.0 - t * t)));
    CHECK(g.k2 == p.alpha);
    CHECK(g.k3 == p.beta);
  }
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(validate(OptimalVelocityFn{}));
  CHECK_THROWS_AS(validate(OptimalVelocityFn{-1.0, 0.086, 25.0, 0.913, 5.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(OptimalVelocityFn{16.8, 0.0, 25.0, 0.913, 5.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(OptimalVelocityFn{16.8, 0.086, 25.0, 0.913, 0.0}), std::invalid_argument);
  CHECK(OptimalVelocityFn::bando(5.0) == OptimalVelocityFn{});
  CHECK(OptimalVelocityFn::bando(7.0).offset == 27.0);

  HdvParams p;
  CHECK_NOTHROW(validate(p));
  p.tau = -0.1;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = HdvParams{};
  p.beta = -0.1;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);

  PlatoonSpec spec;
  CHECK_NOTHROW(validate(spec, OptimalVelocityFn{}));
  spec.headway_min = 4.0;
  CHECK_THROWS_AS(validate(spec, OptimalVelocityFn{}), std::invalid_argument);
  spec = PlatoonSpec{};
  spec.headway_max = spec.headway_min;
  CHECK_THROWS_AS(validate(spec, OptimalVelocityFn{}), std::invalid_argument);
  spec = PlatoonSpec{};
  spec.v_star = 0.0;
  CHECK_THROWS_AS(validate(spec, OptimalVelocityFn{}), std::invalid_argument);
  spec = PlatoonSpec{};
  spec.cav.k2 = -1.0;
  CHECK_THROWS_AS(validate(spec, OptimalVelocityFn{}), std::invalid_argument);
}

TEST_CASE("equilibrium references") {
  PlatoonSpec spec;
  spec.cav.lambda2 = 1.125;
  spec.cav.lambda3 = 0.0;
  const auto two = equilibrium_trajectory(spec, 10.0);
  REQUIRE(two.vehicle_count() == 2);
  CHECK(two.spacing(1) == doctest::Approx(15.0876).epsilon(1e-14));
  CHECK(two.position(1, 3.0) == doctest::Approx(two.position(0, 3.0) - 15.0876).epsilon(1e-14));
  CHECK_THROWS_AS(two.spacing(0), std::out_of_range);

  const auto at_zero = equilibrium_trajectory(spec, 0.0);
  CHECK(at_zero.horizon() == 0.0);
  CHECK(at_zero.initial_position(1) == doctest::Approx(-15.0876));
  CHECK_THROWS_AS(equilibrium_trajectory(spec, -1.0), std::invalid_argument);

  HdvParams p;
  p.lambda3 = default_lambda3(p.desired_headway, p.lambda2, spec.v_star);
  spec.cav.lambda3 = p.lambda3;
  spec.hdvs = {p, p};
  const auto three = equilibrium_trajectory(spec, 5.0);
  CHECK(three.spacing(2) == doctest::Approx(three.spacing(3)).epsilon(1e-15));
  CHECK(three.spacing(2) == doctest::Approx(30.125).epsilon(1e-14));
}

TEST_CASE("equilibrium is a fixed point of the nonlinear model") {
  const OptimalVelocityFn ovf;
  const double v = 13.4112;
  const double gap = invert_optimal_velocity(v, ovf);
  const double alpha = 0.04;
  CHECK(std::abs(alpha * (optimal_velocity(gap, ovf) - v)) <= 1e-12);
}
