#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mixflow/frequency.hpp"
#include "mixflow/simulator.hpp"

using namespace mixflow;

namespace {

constexpr double kVStar = 13.4112;

HdvParams driver(double alpha, double beta, double tau, double headway = 30.125) {
  HdvParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.tau = tau;
  p.desired_headway = headway;
  p.lambda3 = default_lambda3(headway, p.lambda2, kVStar);
  return p;
}

SimulationSetup base_setup(std::vector<HdvParams> hdvs, ControllerKind controller, HdvModel model) {
  SimulationSetup s;
  s.spec.v_star = kVStar;
  s.spec.cav = CavGains{0.05, 0.6, 0.4, 1.125, default_lambda3(30.125, 1.125, kVStar)};
  s.spec.hdvs = std::move(hdvs);
  s.controller = controller;
  s.hdv_model = model;
  return s;
}

double max_speed_deviation(const VehicleSeries& s) {
  double m = 0.0;
  for (double v : s.v) m = std::max(m, std::abs(v - kVStar));
  return m;
}

} // namespace

TEST_CASE("nonlinear driver law") {
  const OptimalVelocityFn ovf;
  const HdvParams p = driver(0.04, 0.185, 0.0);
  const double v25 = optimal_velocity(25.0, ovf);
  CHECK(hdv_accel_nonlinear({25.0, v25, 1.0}, p, ovf) == doctest::Approx(0.185).epsilon(1e-14));
  const double gap = invert_optimal_velocity(kVStar, ovf);
  CHECK(std::abs(hdv_accel_nonlinear({gap, kVStar, 0.0}, p, ovf)) <= 1e-12);

  HdvParams ovm = p;
  ovm.beta = 0.0;
  CHECK(hdv_accel_nonlinear({40.0, 12.0, 3.0}, ovm, ovf) ==
        doctest::Approx(0.04 * (optimal_velocity(40.0, ovf) - 12.0)).epsilon(1e-15));
  // Below the zero-speed gap the commanded speed is clamped at 0.
  CHECK(hdv_accel_nonlinear({1.0, 0.0, 0.0}, p, ovf) == 0.0);
}

TEST_CASE("linear driver law") {
  const LinearGains g{0.06, 0.04, 0.185};
  CHECK(hdv_accel_linear({0, 0, 0, 0}, g, 1.125) == 0.0);
  CHECK(hdv_accel_linear({1, 0, 0, 0}, g, 1.125) == 0.06);
  CHECK(hdv_accel_linear({0, 0, 0, 1}, g, 1.125) == doctest::Approx(-0.06 * 1.125 - 0.04 - 0.185));
  CHECK(hdv_accel_linear({0, 0, 1, 0}, g, 1.125) == 0.185);
}

TEST_CASE("CAV law") {
  const CavGains g{0.2, 0.5, 0.3, 1.125, 15.0};
  const double desired = 1.125 * kVStar + 15.0;
  CHECK(cav_accel({desired, kVStar, kVStar}, g, kVStar) == doctest::Approx(0.0).scale(1.0));
  CHECK(cav_accel({1.125 * (kVStar + 1) + 15.0, kVStar + 1, kVStar + 1}, g, kVStar) == doctest::Approx(-0.5));
  CHECK(cav_accel({desired + 1.0, kVStar, kVStar}, g, kVStar) == doctest::Approx(0.2));
  CHECK(cav_accel({desired, kVStar, kVStar + 1}, g, kVStar) == doctest::Approx(0.3));
}

TEST_CASE("reference controllers") {
  const ReferenceGains gains;
  const HeadwayPolicy policy{0.0, 1.125, 2.0};
  const AccelLimits limits;
  const double desired = 1.125 * 20.0 + 2.0;
  const std::vector<double> same{20.0, 20.0, 20.0};

  CHECK(reference_controller_accel(ControllerKind::acc, {desired, 20.0, 0.0, same}, gains, policy, limits).accel ==
        doctest::Approx(0.0).scale(1.0));
  CHECK(reference_controller_accel(ControllerKind::cacc, {desired, 20.0, 0.0, same}, gains, policy, limits).accel ==
        doctest::Approx(0.0).scale(1.0));
  CHECK(reference_controller_accel(ControllerKind::cacc, {desired, 20.0, 1.0, same}, gains, policy, limits).accel ==
        doctest::Approx(0.5));

  // Closing on a slower predecessor decelerates.
  const std::vector<double> slower{18.0};
  CHECK(reference_controller_accel(ControllerKind::acc, {desired, 20.0, 0.0, slower}, gains, policy, limits).accel ==
        doctest::Approx(-1.2));
  CHECK(reference_controller_accel(ControllerKind::acc, {desired + 100.0, 20.0, 0.0, same}, gains, policy, limits)
            .accel == limits.max);
  CHECK(reference_controller_accel(ControllerKind::acc, {0.0, 20.0, 0.0, slower}, gains, policy, limits).accel ==
        limits.min);

  // Quadratic headway term vanishes at equal speeds.
  const HeadwayPolicy quadratic{0.01, 1.125, 2.0};
  CHECK(reference_controller_accel(ControllerKind::acc, {desired, 20.0, 0.0, same}, gains, quadratic, limits).accel ==
        doctest::Approx(0.0).scale(1.0));

  const std::vector<double> chain{19.0, 18.0, 17.0};
  const auto full = reference_controller_accel(ControllerKind::multi_pred, {desired, 20.0, 0.0, chain}, gains, policy,
                                               limits, 3);
  CHECK(!full.window_truncated);
  CHECK(full.accel == doctest::Approx(0.6 * -1.0 + 0.6 / 2.0 * (-1.0 - 1.0)));
  const auto cut = reference_controller_accel(ControllerKind::multi_pred, {desired, 20.0, 0.0, chain}, gains, policy,
                                              limits, 6);
  CHECK(cut.window_truncated);
  CHECK_THROWS_AS(reference_controller_accel(ControllerKind::multi_pred, {desired, 20.0, 0.0, chain}, gains, policy,
                                             limits, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(reference_controller_accel(ControllerKind::fvdm, {desired, 20.0, 0.0, chain}, gains, policy, limits),
                  std::invalid_argument);

  for (auto k : {ControllerKind::none, ControllerKind::fvdm, ControllerKind::acc, ControllerKind::cacc,
                 ControllerKind::multi_pred}) {
    CHECK(parse_controller_kind(to_string(k)) == k);
  }
  CHECK(parse_hdv_model("linear") == HdvModel::linear);
  CHECK_THROWS_AS(parse_hdv_model("quadratic"), std::invalid_argument);
}

TEST_CASE("leader kinematics") {
  const auto sin = Perturbation::sinusoid(0.5, 0.4);
  const double h = 1e-5;
  for (double t : {0.3, 2.0, 17.0}) {
    const auto s = leader_state(sin, kVStar, t);
    CHECK((leader_state(sin, kVStar, t + h).x - leader_state(sin, kVStar, t - h).x) / (2 * h) ==
          doctest::Approx(s.v).epsilon(1e-8));
    CHECK((leader_state(sin, kVStar, t + h).v - leader_state(sin, kVStar, t - h).v) / (2 * h) ==
          doctest::Approx(s.a).epsilon(1e-6));
  }
  CHECK(leader_state(sin, kVStar, -1.0).v == kVStar);

  const auto brake = Perturbation::brake_pulse(-3.0, 2.0, 5.0);
  CHECK(leader_state(brake, kVStar, 4.0).v == kVStar);
  CHECK(leader_state(brake, kVStar, 7.0).v == doctest::Approx(kVStar - 6.0));
  CHECK(leader_state(brake, kVStar, 6.0).a == -3.0);
  CHECK(leader_state(brake, kVStar, 8.0).a == 3.0);
  CHECK(leader_state(brake, kVStar, 20.0).v == doctest::Approx(kVStar));
  CHECK(leader_state(brake, kVStar, 20.0).x == doctest::Approx(kVStar * 20.0 - 12.0));
  CHECK(brake.period() == 4.0);
  CHECK(sin.period() == doctest::Approx(2 * std::numbers::pi / 0.4));
}

TEST_CASE("perturbation and integrator validation") {
  const AccelLimits limits;
  CHECK_NOTHROW(validate(Perturbation::brake_pulse(-6.0, 1.0, 0.0), kVStar, limits));
  CHECK_THROWS_AS(validate(Perturbation::brake_pulse(-7.0, 1.0, 0.0), kVStar, limits), std::invalid_argument);
  CHECK_THROWS_AS(validate(Perturbation::brake_pulse(0.0, 1.0, 0.0), kVStar, limits), std::invalid_argument);
  CHECK_THROWS_AS(validate(Perturbation::brake_pulse(-5.0, 3.0, 0.0), kVStar, limits), std::invalid_argument);
  CHECK_THROWS_AS(validate(Perturbation::sinusoid(-0.1, 1.0), kVStar, limits), std::invalid_argument);
  CHECK_THROWS_AS(validate(Perturbation::sinusoid(0.1, 0.0), kVStar, limits), std::invalid_argument);

  const std::vector<HdvParams> hdvs{driver(0.04, 0.185, 0.01)};
  CHECK_NOTHROW(validate(IntegratorConfig{0.0025, 100.0, 1}, hdvs, Perturbation{}));
  CHECK_THROWS_AS(validate(IntegratorConfig{0.01, 100.0, 1}, hdvs, Perturbation{}), std::invalid_argument);
  CHECK_THROWS_AS(validate(IntegratorConfig{0.0, 100.0, 1}, hdvs, Perturbation{}), std::invalid_argument);
  CHECK_THROWS_AS(validate(IntegratorConfig{0.001, 50.0, 1}, hdvs, Perturbation::sinusoid(0.1, 1.0)),
                  std::invalid_argument);
  CHECK_NOTHROW(validate(IntegratorConfig{0.001, 63.0, 1}, hdvs, Perturbation::sinusoid(0.1, 1.0)));
}

TEST_CASE("equilibrium is preserved") {
  const std::vector<HdvParams> hdvs{driver(0.04, 0.185, 0.01), driver(0.05, 0.2, 0.008, 28.0),
                                    driver(0.035, 0.17, 0.0114, 33.0)};
  for (auto model : {HdvModel::linear, HdvModel::nonlinear}) {
    for (auto controller : {ControllerKind::fvdm, ControllerKind::none, ControllerKind::cacc}) {
      auto s = base_setup(hdvs, controller, model);
      s.integrator = {0.002, 100.0, 10};
      const auto traj = simulate(s);
      CHECK(!traj.collision);
      CHECK(traj.times.back() == doctest::Approx(100.0));
      for (const auto& v : traj.vehicles) {
        CHECK(max_speed_deviation(v) < 1e-9);
      }
    }
  }
}

TEST_CASE("trajectory layout") {
  auto s = base_setup({driver(0.04, 0.185, 0.0)}, ControllerKind::fvdm, HdvModel::nonlinear);
  s.integrator = {0.01, 1.0, 7};
  const auto traj = simulate(s);
  CHECK(traj.vehicle_count() == 3);
  CHECK(traj.vehicles[0].role == VehicleRole::leader);
  CHECK(traj.vehicles[1].role == VehicleRole::cav);
  CHECK(traj.vehicles[2].role == VehicleRole::hdv);
  // Samples 0, 7, ..., 98 plus the final step.
  CHECK(traj.times.size() == 16);
  CHECK(traj.times.back() == doctest::Approx(1.0));
  CHECK(std::is_sorted(traj.times.begin(), traj.times.end()));
  CHECK(std::isnan(traj.vehicles[0].gap[0]));
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    CHECK(traj.vehicles[2].gap[k] == doctest::Approx(traj.vehicles[1].x[k] - traj.vehicles[2].x[k]).epsilon(1e-14));
  }
  CHECK(traj.vehicles[2].gap[0] == doctest::Approx(invert_optimal_velocity(kVStar, OptimalVelocityFn{})));
  CHECK(traj.vehicles[1].gap[0] == doctest::Approx(30.125));
}

TEST_CASE("linear response matches the transfer function") {
  const OptimalVelocityFn ovf;
  const HdvParams p = driver(0.3, 0.25, 0.2, 30.0);
  const auto model = make_frequency_model(p, ovf);
  for (double w : {0.2, 0.6, 1.2}) {
    auto s = base_setup({p}, ControllerKind::none, HdvModel::linear);
    s.perturbation = Perturbation::sinusoid(0.1, w);
    const double period = 2 * std::numbers::pi / w;
    s.integrator = {0.01, std::max(60.0 * period, 300.0), 1};
    const auto traj = simulate(s);
    const double measured = steady_state_amplitude(traj, 1, w, kVStar) / 0.1;
    CHECK(measured == doctest::Approx(std::abs(hdv_transfer(w, model))).epsilon(0.01));
    CHECK(steady_state_amplitude(traj, 0, w, kVStar) == doctest::Approx(0.1).epsilon(1e-3));
  }
}

TEST_CASE("step halving converges at second order") {
  const std::vector<HdvParams> hdvs{driver(0.3, 0.25, 0.4, 30.0), driver(0.25, 0.2, 0.4, 32.0)};
  auto run = [&](double dt) {
    auto s = base_setup(hdvs, ControllerKind::fvdm, HdvModel::nonlinear);
    s.perturbation = Perturbation::sinusoid(0.5, 0.5);
    s.integrator = {dt, 130.0, 1000000};
    return simulate(s).vehicles.back().x.back();
  };
  const double a = run(0.1), b = run(0.05), c = run(0.025);
  const double order = std::log2(std::abs(a - b) / std::abs(b - c));
  CHECK(order >= 1.8);
}

TEST_CASE("string-unstable chain amplifies a sinusoid") {
  const HdvParams p = driver(0.04, 0.185, 0.01);
  const auto m = make_frequency_model(p, OptimalVelocityFn{});
  const double w = 0.1;
  REQUIRE(std::abs(hdv_transfer(w, m)) > 1.05);
  auto s = base_setup(std::vector<HdvParams>(5, p), ControllerKind::none, HdvModel::linear);
  s.perturbation = Perturbation::sinusoid(0.2, w);
  s.integrator = {0.0025, 1000.0, 4};
  const auto traj = simulate(s);
  for (std::size_t i = 1; i < traj.vehicle_count(); ++i) {
    const double ratio = steady_state_amplitude(traj, i, w, kVStar) / steady_state_amplitude(traj, i - 1, w, kVStar);
    CHECK(ratio == doctest::Approx(std::abs(hdv_transfer(w, m))).epsilon(0.01));
  }
}

TEST_CASE("string-stable chain attenuates a sinusoid") {
  const HdvParams p = driver(0.5, 0.3, 0.05, 30.0);
  const auto m = make_frequency_model(p, OptimalVelocityFn{});
  REQUIRE(hdv_stability_verdict(m).kind == StabilityVerdict::Kind::stable_all_frequencies);
  auto s = base_setup(std::vector<HdvParams>(4, p), ControllerKind::fvdm, HdvModel::linear);
  s.spec.cav = CavGains{0.1, 0.8, 0.5, 1.125, 0.0};
  s.perturbation = Perturbation::sinusoid(0.1, 0.5);
  s.integrator = {0.01, 400.0, 1};
  const auto traj = simulate(s);
  const double head = steady_state_amplitude(traj, 0, 0.5, kVStar);
  const double tail = steady_state_amplitude(traj, traj.vehicle_count() - 1, 0.5, kVStar);
  CHECK(tail <= head * 1.05);
}

TEST_CASE("collisions halt the run") {
  auto s = base_setup({driver(0.04, 0.185, 0.01)}, ControllerKind::none, HdvModel::nonlinear);
  s.perturbation = Perturbation::brake_pulse(-6.0, 2.0, 1.0);
  s.integrator = {0.0025, 60.0, 40};
  s.collision_gap = 20.0;
  const auto traj = simulate(s);
  REQUIRE(traj.collision);
  CHECK(traj.collision->vehicle == 1);
  CHECK(traj.times.back() == traj.collision->time);
  CHECK(traj.vehicles[1].gap.back() <= 20.0);
}

TEST_CASE("divergence raises a fault") {
  auto s = base_setup({driver(5.0, 2.0, 1.0, 30.0)}, ControllerKind::none, HdvModel::linear);
  s.perturbation = Perturbation::brake_pulse(-1.0, 1.0, 0.0);
  s.integrator = {0.01, 1e5, 100000};
  s.collision_gap = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(simulate(s), IntegrationFault);
}

TEST_CASE("multi-predecessor window truncation is flagged") {
  auto s = base_setup({driver(0.04, 0.185, 0.0)}, ControllerKind::multi_pred, HdvModel::nonlinear);
  s.multi_pred_window = 4;
  s.integrator = {0.01, 1.0, 10};
  CHECK(simulate(s).window_truncated);
  // The CAV directly follows the leader, so any window beyond one predecessor is cut.
  s.multi_pred_window = 2;
  CHECK(simulate(s).window_truncated);
}

TEST_CASE("time to collision") {
  CHECK(time_to_collision(25.0, 14.0, 10.0, 5.0) == 5.0);
  CHECK(std::isinf(time_to_collision(25.0, 10.0, 14.0, 5.0)));
  CHECK(std::isinf(time_to_collision(25.0, 10.0, 10.0, 5.0)));
}

TEST_CASE("safety metrics on a synthetic trajectory") {
  Trajectory traj;
  traj.vehicles.resize(2);
  for (int k = 0; k <= 100; ++k) {
    traj.times.push_back(0.1 * k);
    traj.vehicles[0].v.push_back(10.0);
    traj.vehicles[0].gap.push_back(std::nan(""));
    traj.vehicles[1].v.push_back(14.0);
    traj.vehicles[1].gap.push_back(9.0); // 4 m bumper to bumper, closing at 4 m/s
  }
  for (auto& v : traj.vehicles) {
    v.x.assign(101, 0.0);
    v.a.assign(101, 0.0);
  }
  SafetyEnvelope env;
  const auto r = safety_metrics(traj, 2.0, env, 5.0);
  REQUIRE(r.vehicles.size() == 1);
  CHECK(r.vehicles[0].min_ttc == doctest::Approx(1.0));
  CHECK(r.vehicles[0].tet == doctest::Approx(10.0));
  CHECK(r.vehicles[0].tit == doctest::Approx(10.0));
  CHECK(r.vehicles[0].headway_violations == 101);
  CHECK(!r.vehicles[0].collision);

  for (auto& v : traj.vehicles[1].v) v = 8.0;
  const auto opening = safety_metrics(traj, 2.0, env, 5.0);
  CHECK(std::isinf(opening.vehicles[0].min_ttc));
  CHECK(opening.vehicles[0].tet == 0.0);
  CHECK(opening.vehicles[0].tit == 0.0);
}

TEST_CASE("safety metric invariants on a braking platoon") {
  std::vector<HdvParams> hdvs;
  for (int i = 0; i < 5; ++i) hdvs.push_back(driver(0.04 + 0.002 * i, 0.185, 0.01));
  auto s = base_setup(hdvs, ControllerKind::none, HdvModel::nonlinear);
  s.perturbation = Perturbation::brake_pulse(-5.0, 2.0, 5.0);
  s.integrator = {0.0025, 60.0, 4};
  const auto traj = simulate(s);
  const auto r = safety_metrics(traj, 3.0, SafetyEnvelope{}, 5.0);
  for (const auto& v : r.vehicles) {
    CHECK(v.tet >= 0.0);
    CHECK(v.tet <= traj.times.back());
    CHECK(v.tit >= 0.0);
    CHECK((v.min_ttc > 0.0 || v.collision));
  }
}
