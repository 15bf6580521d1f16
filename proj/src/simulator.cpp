#include "mixflow/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mixflow {

IntegrationFault::IntegrationFault(const std::string& what, double time, std::size_t vehicle)
    : std::runtime_error(what + " (t = " + std::to_string(time) + " s, vehicle " + std::to_string(vehicle) + ")"),
      time_(time), vehicle_(vehicle) {}

Perturbation Perturbation::sinusoid(double amplitude, double omega) {
  Perturbation p;
  p.kind = Kind::sinusoid;
  p.amplitude = amplitude;
  p.omega = omega;
  return p;
}

Perturbation Perturbation::brake_pulse(double decel, double duration, double start) {
  Perturbation p;
  p.kind = Kind::brake_pulse;
  p.decel = decel;
  p.duration = duration;
  p.start = start;
  return p;
}

double Perturbation::period() const {
  switch (kind) {
  case Kind::none: return 0.0;
  case Kind::sinusoid: return 2.0 * std::numbers::pi / omega;
  case Kind::brake_pulse: return 2.0 * duration;
  }
  return 0.0;
}

std::string to_string(Perturbation::Kind kind) {
  switch (kind) {
  case Perturbation::Kind::none: return "none";
  case Perturbation::Kind::sinusoid: return "sinusoid";
  case Perturbation::Kind::brake_pulse: return "brake_pulse";
  }
  return "?";
}

void validate(const Perturbation& pert, double v_star, const AccelLimits& limits) {
  switch (pert.kind) {
  case Perturbation::Kind::none: return;
  case Perturbation::Kind::sinusoid:
    if (!(pert.amplitude >= 0.0) || !std::isfinite(pert.amplitude)) {
      throw std::invalid_argument("sinusoid amplitude must be >= 0");
    }
    if (!(pert.omega > 0.0) || !std::isfinite(pert.omega)) {
      throw std::invalid_argument("sinusoid omega must be > 0");
    }
    return;
  case Perturbation::Kind::brake_pulse:
    if (!(pert.decel < 0.0) || pert.decel < limits.min) {
      throw std::invalid_argument("brake pulse deceleration must lie in [a_min, 0)");
    }
    if (!(pert.duration > 0.0) || !(pert.start >= 0.0)) {
      throw std::invalid_argument("brake pulse needs duration > 0 and start >= 0");
    }
    if (-pert.decel * pert.duration >= v_star) {
      throw std::invalid_argument("brake pulse would stop the leader");
    }
    return;
  }
}

namespace {

// Integral over [0, t] of clamp(u - s, 0, d).
double ramp_integral(double t, double s, double d) {
  if (t <= s) return 0.0;
  if (t <= s + d) return 0.5 * (t - s) * (t - s);
  return 0.5 * d * d + d * (t - s - d);
}

double ramp(double t, double s, double d) { return std::clamp(t - s, 0.0, d); }

} // namespace

LeaderState leader_state(const Perturbation& pert, double v_star, double t) {
  if (t <= 0.0 || pert.kind == Perturbation::Kind::none) {
    return {v_star * t, v_star, 0.0};
  }
  if (pert.kind == Perturbation::Kind::sinusoid) {
    const double w = pert.omega;
    const double A = pert.amplitude;
    return {v_star * t + A * (1.0 - std::cos(w * t)) / w, v_star + A * std::sin(w * t), A * w * std::cos(w * t)};
  }
  const double d = pert.decel;
  const double s1 = pert.start;
  const double s2 = pert.start + pert.duration;
  const double D = pert.duration;
  LeaderState out;
  out.x = v_star * t + d * ramp_integral(t, s1, D) - d * ramp_integral(t, s2, D);
  out.v = v_star + d * ramp(t, s1, D) - d * ramp(t, s2, D);
  if (t > s1 && t < s2) {
    out.a = d;
  } else if (t > s2 && t < s2 + D) {
    out.a = -d;
  }
  return out;
}

double hdv_accel_nonlinear(const DelayedObservation& obs, const HdvParams& p, const OptimalVelocityFn& ovf) {
  const double target = std::max(optimal_velocity(std::max(obs.gap, 0.0), ovf), 0.0);
  return p.alpha * (target - obs.speed) + p.beta * obs.speed_diff;
}

double hdv_accel_linear(const DelayedDeviation& dev, const LinearGains& gains, double lambda2) {
  return gains.k1 * (dev.pred_position - dev.position - lambda2 * dev.speed) - gains.k2 * dev.speed +
         gains.k3 * (dev.pred_speed - dev.speed);
}

double cav_accel(const CavObservation& obs, const CavGains& g, double v_star) {
  const double desired = g.lambda2 * obs.speed + g.lambda3;
  return g.k1 * (obs.gap - desired) - g.k2 * (obs.speed - v_star) + g.k3 * (obs.pred_speed - obs.speed);
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
  case ControllerKind::none: return "none";
  case ControllerKind::fvdm: return "fvdm";
  case ControllerKind::acc: return "acc";
  case ControllerKind::cacc: return "cacc";
  case ControllerKind::multi_pred: return "multi_pred";
  }
  return "?";
}

ControllerKind parse_controller_kind(const std::string& text) {
  if (text == "none") return ControllerKind::none;
  if (text == "fvdm") return ControllerKind::fvdm;
  if (text == "acc") return ControllerKind::acc;
  if (text == "cacc") return ControllerKind::cacc;
  if (text == "multi_pred") return ControllerKind::multi_pred;
  throw std::invalid_argument("unknown controller '" + text + "'");
}

ReferenceCommand reference_controller_accel(ControllerKind kind, const ReferenceInput& in,
                                            const ReferenceGains& gains, const HeadwayPolicy& policy,
                                            const AccelLimits& limits, std::size_t window) {
  if (in.predecessor_speeds.empty()) {
    throw std::invalid_argument("reference controller needs the predecessor speed");
  }
  const double pred_speed = in.predecessor_speeds.front();
  const double desired =
      policy.lambda1 * (in.speed * in.speed - pred_speed * pred_speed) + policy.lambda2 * in.speed + policy.lambda3;
  ReferenceCommand out;
  double a = gains.kv * (pred_speed - in.speed) + gains.kp * (in.gap - desired);
  switch (kind) {
  case ControllerKind::acc:
    break;
  case ControllerKind::cacc:
    a += gains.ka * in.pred_accel;
    break;
  case ControllerKind::multi_pred: {
    if (window < 2) {
      throw std::invalid_argument("multi-predecessor window must be >= 2");
    }
    const auto& speeds = in.predecessor_speeds;
    std::size_t pairs = window - 1;
    if (pairs > speeds.size() - 1) {
      pairs = speeds.size() - 1;
      out.window_truncated = true;
    }
    double sum = 0.0;
    for (std::size_t j = 1; j <= pairs; ++j) {
      sum += speeds[j] - speeds[j - 1];
    }
    a += gains.kv / static_cast<double>(window - 1) * sum;
    break;
  }
  default:
    throw std::invalid_argument("reference_controller_accel: not a reference controller");
  }
  out.accel = std::clamp(a, limits.min, limits.max);
  return out;
}

std::string to_string(HdvModel model) { return model == HdvModel::linear ? "linear" : "nonlinear"; }

HdvModel parse_hdv_model(const std::string& text) {
  if (text == "linear") return HdvModel::linear;
  if (text == "nonlinear") return HdvModel::nonlinear;
  throw std::invalid_argument("unknown HDV model '" + text + "'");
}

void validate(const IntegratorConfig& cfg, std::span<const HdvParams> hdvs, const Perturbation& pert) {
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) {
    throw std::invalid_argument("integrator step must be > 0");
  }
  if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon)) {
    throw std::invalid_argument("integrator horizon must be >= 0");
  }
  if (cfg.record_stride == 0) {
    throw std::invalid_argument("record stride must be >= 1");
  }
  for (const auto& p : hdvs) {
    if (p.tau > 0.0 && cfg.step > p.tau / 4.0 * (1.0 + 1e-12)) {
      throw std::invalid_argument("integrator step " + std::to_string(cfg.step) +
                                  " s exceeds a quarter of the delay " + std::to_string(p.tau) + " s");
    }
  }
  if (pert.kind != Perturbation::Kind::none && cfg.horizon < 10.0 * pert.period() * (1.0 - 1e-12)) {
    throw std::invalid_argument("horizon must cover at least ten perturbation periods");
  }
}

namespace {

// Fixed-capacity history of (x, v) per integration step.
class History {
public:
  explicit History(std::size_t capacity) : x_(capacity), v_(capacity) {}

  void push(long step, double x, double v) {
    const auto k = static_cast<std::size_t>(step) % x_.size();
    x_[k] = x;
    v_[k] = v;
    latest_ = step;
  }

  bool holds(long step) const {
    return step >= 0 && step <= latest_ && latest_ - step < static_cast<long>(x_.size());
  }
  double x(long step) const { return x_[static_cast<std::size_t>(step) % x_.size()]; }
  double v(long step) const { return v_[static_cast<std::size_t>(step) % v_.size()]; }

private:
  std::vector<double> x_;
  std::vector<double> v_;
  long latest_ = -1;
};

struct Kinematics {
  double x = 0.0;
  double v = 0.0;
};

class PlatoonIntegrator {
public:
  explicit PlatoonIntegrator(const SimulationSetup& setup) : setup_(setup) {
    const auto& spec = setup.spec;
    validate(spec, setup.ovf);
    validate(setup.perturbation, spec.v_star, setup.limits);
    validate(setup.integrator, spec.hdvs, setup.perturbation);

    linear_ = setup.hdv_model == HdvModel::linear;
    dt_ = setup.integrator.step;
    v_star_ = spec.v_star;
    collision_gap_ = setup.collision_gap.value_or(setup.ovf.vehicle_length);

    roles_.push_back(VehicleRole::leader);
    taus_.push_back(0.0);
    hdv_index_.push_back(-1);
    if (setup.controller != ControllerKind::none) {
      roles_.push_back(VehicleRole::cav);
      taus_.push_back(0.0);
      hdv_index_.push_back(-1);
    }
    for (std::size_t h = 0; h < spec.hdvs.size(); ++h) {
      roles_.push_back(VehicleRole::hdv);
      taus_.push_back(spec.hdvs[h].tau);
      hdv_index_.push_back(static_cast<long>(h));
      gains_.push_back(linearize_hdv(spec.hdvs[h], setup.ovf));
    }

    // Equilibrium positions.
    x0_.assign(roles_.size(), 0.0);
    for (std::size_t i = 1; i < roles_.size(); ++i) {
      double spacing = 0.0;
      if (roles_[i] == VehicleRole::cav) {
        spacing = spec.cav.lambda2 * v_star_ + spec.cav.lambda3;
      } else {
        const auto& p = spec.hdvs[static_cast<std::size_t>(hdv_index_[i])];
        spacing = linear_ ? p.lambda2 * v_star_ + p.lambda3 : invert_optimal_velocity(v_star_, setup.ovf);
      }
      x0_[i] = x0_[i - 1] - spacing;
    }

    double max_tau = 0.0;
    for (double t : taus_) max_tau = std::max(max_tau, t);
    const auto capacity = static_cast<std::size_t>(std::ceil(max_tau / dt_)) + 4;
    history_.assign(roles_.size(), History(capacity));
  }

  Trajectory run() {
    const std::size_t n = roles_.size();
    const long steps = std::lround(setup_.integrator.horizon / dt_);
    const std::size_t stride = setup_.integrator.record_stride;

    Trajectory traj;
    traj.vehicles.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      traj.vehicles[i].role = roles_[i];
    }

    std::vector<Kinematics> state(n), predicted(n);
    std::vector<double> acc(n), acc_pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = equilibrium(i, 0.0);
    }
    state[0] = leader_frame(0.0);
    push_history(0, state);

    for (long step = 0;; ++step) {
      const double t = static_cast<double>(step) * dt_;
      accelerations(step, state, acc, traj.window_truncated);
      const bool last = step == steps;
      if (last || step % static_cast<long>(stride) == 0) {
        record(traj, t, state, acc);
      }
      if (last) {
        break;
      }

      const double t_next = static_cast<double>(step + 1) * dt_;
      for (std::size_t i = 1; i < n; ++i) {
        predicted[i] = {state[i].x + dt_ * state[i].v, floor_speed(state[i].v + dt_ * acc[i])};
      }
      predicted[0] = leader_frame(t_next);
      accelerations(step + 1, predicted, acc_pred, traj.window_truncated);

      for (std::size_t i = 1; i < n; ++i) {
        state[i].x += 0.5 * dt_ * (state[i].v + predicted[i].v);
        state[i].v = floor_speed(state[i].v + 0.5 * dt_ * (acc[i] + acc_pred[i]));
        if (!std::isfinite(state[i].x) || !std::isfinite(state[i].v)) {
          throw IntegrationFault("non-finite state", t_next, i);
        }
      }
      state[0] = leader_frame(t_next);
      push_history(step + 1, state);

      for (std::size_t i = 1; i < n; ++i) {
        if (gap(i, state) <= collision_gap_) {
          traj.collision = CollisionEvent{t_next, i};
          break;
        }
      }
      if (traj.collision) {
        accelerations(step + 1, state, acc, traj.window_truncated);
        record(traj, t_next, state, acc);
        break;
      }
    }
    return traj;
  }

private:
  double floor_speed(double v) const { return linear_ ? v : std::max(v, 0.0); }

  // Frame: absolute states (nonlinear) or deviations from the reference (linear).
  Kinematics equilibrium(std::size_t i, double t) const {
    if (linear_) return {0.0, 0.0};
    return {x0_[i] + v_star_ * t, v_star_};
  }

  Kinematics leader_frame(double t) const {
    const auto s = leader_state(setup_.perturbation, v_star_, t);
    if (linear_) return {s.x - v_star_ * t, s.v - v_star_};
    return {s.x, s.v};
  }

  double gap(std::size_t i, const std::vector<Kinematics>& s) const {
    if (linear_) {
      return (x0_[i - 1] - x0_[i]) + (s[i - 1].x - s[i].x);
    }
    return s[i - 1].x - s[i].x;
  }

  double speed(std::size_t i, const std::vector<Kinematics>& s) const {
    return linear_ ? s[i].v + v_star_ : s[i].v;
  }

  void push_history(long step, const std::vector<Kinematics>& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      history_[i].push(step, s[i].x, s[i].v);
    }
  }

  Kinematics sample(std::size_t i, long step) const {
    if (step < 0) {
      return equilibrium(i, static_cast<double>(step) * dt_);
    }
    if (!history_[i].holds(step)) {
      throw IntegrationFault("delayed state outside the stored history", static_cast<double>(step) * dt_, i);
    }
    return {history_[i].x(step), history_[i].v(step)};
  }

  // State of vehicle i at (stage step - tau), stage step being the time the
  // accelerations are evaluated at.
  Kinematics delayed(std::size_t i, long stage, double tau, const std::vector<Kinematics>& s) const {
    if (tau == 0.0) {
      return s[i];
    }
    const double u = static_cast<double>(stage) - tau / dt_;
    if (i == 0) {
      return leader_frame(u * dt_);
    }
    const double base = std::floor(u);
    const long j = static_cast<long>(base);
    const double frac = u - base;
    const Kinematics lo = sample(i, j);
    if (frac == 0.0) {
      return lo;
    }
    const Kinematics hi = sample(i, j + 1);
    return {lo.x + frac * (hi.x - lo.x), lo.v + frac * (hi.v - lo.v)};
  }

  void accelerations(long stage, const std::vector<Kinematics>& s, std::vector<double>& acc, bool& truncated) const {
    const double t = static_cast<double>(stage) * dt_;
    acc[0] = leader_state(setup_.perturbation, v_star_, t).a;
    std::vector<double> pred_speeds;
    for (std::size_t i = 1; i < s.size(); ++i) {
      double a = 0.0;
      if (roles_[i] == VehicleRole::cav) {
        if (setup_.controller == ControllerKind::fvdm) {
          a = cav_accel({gap(i, s), speed(i, s), speed(i - 1, s)}, setup_.spec.cav, v_star_);
        } else {
          pred_speeds.clear();
          for (std::size_t k = i; k-- > 0;) {
            pred_speeds.push_back(speed(k, s));
          }
          const HeadwayPolicy policy{setup_.reference_lambda1, setup_.spec.cav.lambda2, setup_.spec.cav.lambda3};
          const auto cmd = reference_controller_accel(setup_.controller,
                                                      {gap(i, s), speed(i, s), acc[i - 1], pred_speeds},
                                                      setup_.reference_gains, policy, setup_.limits,
                                                      setup_.multi_pred_window);
          truncated = truncated || cmd.window_truncated;
          a = cmd.accel;
        }
      } else {
        const auto h = static_cast<std::size_t>(hdv_index_[i]);
        const auto& p = setup_.spec.hdvs[h];
        const Kinematics self = delayed(i, stage, p.tau, s);
        const Kinematics pred = delayed(i - 1, stage, p.tau, s);
        if (linear_) {
          a = hdv_accel_linear({pred.x, self.x, pred.v, self.v}, gains_[h], p.lambda2);
        } else {
          a = hdv_accel_nonlinear({pred.x - self.x, self.v, pred.v - self.v}, p, setup_.ovf);
        }
      }
      if (!std::isfinite(a)) {
        throw IntegrationFault("non-finite acceleration", t, i);
      }
      acc[i] = a;
    }
  }

  void record(Trajectory& traj, double t, const std::vector<Kinematics>& s, const std::vector<double>& acc) const {
    traj.times.push_back(t);
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto& series = traj.vehicles[i];
      const double ref = linear_ ? x0_[i] + v_star_ * t : 0.0;
      series.x.push_back(s[i].x + ref);
      series.v.push_back(speed(i, s));
      series.a.push_back(acc[i]);
      series.gap.push_back(i == 0 ? std::numeric_limits<double>::quiet_NaN() : gap(i, s));
    }
  }

  const SimulationSetup& setup_;
  bool linear_ = false;
  double dt_ = 0.0;
  double v_star_ = 0.0;
  double collision_gap_ = 0.0;
  std::vector<VehicleRole> roles_;
  std::vector<double> taus_;
  std::vector<long> hdv_index_;
  std::vector<LinearGains> gains_;
  std::vector<double> x0_;
  std::vector<History> history_;
};

} // namespace

Trajectory simulate(const SimulationSetup& setup) { return PlatoonIntegrator(setup).run(); }

double steady_state_amplitude(const Trajectory& traj, std::size_t vehicle, double omega, double v_star,
                              double fraction) {
  if (traj.times.size() < 2 || vehicle >= traj.vehicle_count()) {
    throw std::invalid_argument("steady_state_amplitude: trajectory too short or vehicle out of range");
  }
  const double period = 2.0 * std::numbers::pi / omega;
  const double t_end = traj.times.back();
  const double span = fraction * (t_end - traj.times.front());
  const double periods = std::floor(span / period);
  if (periods < 1.0) {
    throw std::invalid_argument("steady_state_amplitude: window shorter than one period");
  }
  const double t_start = t_end - periods * period;
  const auto& v = traj.vehicles[vehicle].v;
  double s = 0.0, c = 0.0, length = 0.0;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double t0 = traj.times[k];
    const double t1 = traj.times[k + 1];
    if (t0 < t_start) {
      continue;
    }
    const double h = t1 - t0;
    const double d0 = v[k] - v_star;
    const double d1 = v[k + 1] - v_star;
    s += 0.5 * h * (d0 * std::sin(omega * t0) + d1 * std::sin(omega * t1));
    c += 0.5 * h * (d0 * std::cos(omega * t0) + d1 * std::cos(omega * t1));
    length += h;
  }
  return 2.0 / length * std::hypot(s, c);
}

double time_to_collision(double gap, double speed, double pred_speed, double vehicle_length) {
  const double closing = speed - pred_speed;
  if (!(closing > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return (gap - vehicle_length) / closing;
}

SafetyReport safety_metrics(const Trajectory& traj, double ttc_threshold, const SafetyEnvelope& env,
                            double vehicle_length) {
  SafetyReport report;
  report.ttc_threshold = ttc_threshold;
  const std::size_t samples = traj.times.size();
  for (std::size_t i = 1; i < traj.vehicle_count(); ++i) {
    const auto& self = traj.vehicles[i];
    const auto& pred = traj.vehicles[i - 1];
    VehicleSafety vs;
    vs.min_ttc = std::numeric_limits<double>::infinity();
    vs.collision = traj.collision && traj.collision->vehicle == i;
    for (std::size_t k = 0; k < samples; ++k) {
      const double gap = self.gap[k];
      const double ttc = time_to_collision(gap, self.v[k], pred.v[k], vehicle_length);
      vs.min_ttc = std::min(vs.min_ttc, ttc);
      if (gap <= vehicle_length) {
        vs.collision = true;
      }
      if (gap < env.headway_min || gap > env.headway_max) {
        ++vs.headway_violations;
      }
      if (k + 1 < samples && ttc < ttc_threshold) {
        const double h = traj.times[k + 1] - traj.times[k];
        vs.tet += h;
        vs.tit += (ttc_threshold - std::max(ttc, 0.0)) * h;
      }
    }
    report.vehicles.push_back(vs);
  }
  return report;
}

} // namespace mixflow
