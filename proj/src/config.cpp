#include "mixflow/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mixflow {

using nlohmann::json;
using nlohmann::ordered_json;

ConfigError::ConfigError(const std::string& key, const std::string& message)
    : std::runtime_error(key + ": " + message), key_(key) {}

double SpeedValue::meters_per_second() const { return unit_convert(value, unit, Unit::meters_per_second); }

std::vector<double> SweepConfig::omegas() const {
  if (points == 0) return {};
  if (points == 1) return {omega_min};
  return log_grid(omega_min, omega_max, points);
}

void synchronize(ExperimentConfig& cfg) {
  cfg.population.seed = cfg.seed;
  if (cfg.v_star.unit == Unit::meters_per_second || cfg.v_star.unit == Unit::miles_per_hour) {
    cfg.population.v_star = cfg.v_star.meters_per_second();
  }
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError(path_.empty() ? "<root>" : path_, "expected a JSON object");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = child(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = child(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key), "expected a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = child(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key), "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = child(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    if (const json* v = child(key)) {
      Section sub(*v, path(key));
      fn(sub);
      sub.finish();
    }
  }

  template <typename Parse, typename T>
  void enumeration(const std::string& key, T& out, Parse&& parse) {
    std::string s;
    text(key, s);
    if (s.empty() && !node_.contains(key)) return;
    try {
      out = parse(s);
    } catch (const std::exception& e) {
      throw ConfigError(path(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError(path(key), "unknown key");
      }
    }
  }

private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

Unit parse_unit_or_throw(const std::string& text) {
  try {
    return parse_unit(text);
  } catch (const std::exception&) {
    throw std::invalid_argument("unknown unit '" + text + "' (expected m/s, mph, m or mi)");
  }
}

void read_speed(Section& s, SpeedValue& out) {
  s.number("value", out.value);
  s.enumeration("unit", out.unit, parse_unit_or_throw);
}

void read_normal(Section& s, NormalDist& d) {
  s.number("mean", d.mean);
  s.number("sd", d.sd);
}

void read_bounds(Section& s, Bounds& b) {
  s.number("lo", b.lo);
  s.number("hi", b.hi);
}

void read_axis(Section& s, GainAxis& a) {
  s.number("min", a.min);
  s.number("max", a.max);
  s.count("steps", a.steps);
}

BandMode parse_band_mode(const std::string& text) {
  if (text == "below_critical") return BandMode::below_critical;
  if (text == "full") return BandMode::full;
  throw std::invalid_argument("unknown band mode '" + text + "' (expected below_critical or full)");
}

std::string band_mode_name(BandMode mode) { return mode == BandMode::full ? "full" : "below_critical"; }

Perturbation::Kind parse_perturbation_kind(const std::string& text) {
  if (text == "none") return Perturbation::Kind::none;
  if (text == "sinusoid") return Perturbation::Kind::sinusoid;
  if (text == "brake_pulse") return Perturbation::Kind::brake_pulse;
  throw std::invalid_argument("unknown perturbation '" + text + "' (expected none, sinusoid or brake_pulse)");
}

void read_perturbation(Section& s, Perturbation& p) {
  p = Perturbation{};
  s.enumeration("kind", p.kind, parse_perturbation_kind);
  switch (p.kind) {
  case Perturbation::Kind::none: break;
  case Perturbation::Kind::sinusoid:
    s.number("amplitude", p.amplitude);
    s.number("omega", p.omega);
    break;
  case Perturbation::Kind::brake_pulse:
    s.number("decel", p.decel);
    s.number("duration", p.duration);
    s.number("start", p.start);
    break;
  }
}

ordered_json speed_json(const SpeedValue& v) {
  return ordered_json{{"value", v.value}, {"unit", std::string(unit_name(v.unit))}};
}

ordered_json normal_json(const NormalDist& d) { return ordered_json{{"mean", d.mean}, {"sd", d.sd}}; }
ordered_json bounds_json(const Bounds& b) { return ordered_json{{"lo", b.lo}, {"hi", b.hi}}; }
ordered_json axis_json(const GainAxis& a) {
  return ordered_json{{"min", a.min}, {"max", a.max}, {"steps", a.steps}};
}

ordered_json perturbation_json(const Perturbation& p) {
  ordered_json out{{"kind", to_string(p.kind)}};
  if (p.kind == Perturbation::Kind::sinusoid) {
    out["amplitude"] = p.amplitude;
    out["omega"] = p.omega;
  } else if (p.kind == Perturbation::Kind::brake_pulse) {
    out["decel"] = p.decel;
    out["duration"] = p.duration;
    out["start"] = p.start;
  }
  return out;
}

template <typename Fn>
void rethrow_as(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

bool finite_all(std::initializer_list<double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

} // namespace

ordered_json to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["scenario"] = cfg.scenario;
  j["seed"] = cfg.seed;
  j["v_star"] = speed_json(cfg.v_star);
  if (cfg.initial_speed) {
    j["initial_speed"] = speed_json(*cfg.initial_speed);
  }
  const auto& o = cfg.ovf;
  j["optimal_velocity"] = {{"amplitude", o.amplitude},
                           {"slope", o.slope},
                           {"offset", o.offset},
                           {"shift", o.shift},
                           {"vehicle_length", o.vehicle_length}};
  const auto& p = cfg.population;
  j["population"] = {{"count", p.count},
                     {"alpha", normal_json(p.alpha)},
                     {"beta", normal_json(p.beta)},
                     {"desired_headway", normal_json(p.desired_headway)},
                     {"delay_coefficient", p.delay_coefficient},
                     {"lambda2", p.lambda2},
                     {"alpha_bounds", bounds_json(p.alpha_bounds)},
                     {"beta_bounds", bounds_json(p.beta_bounds)},
                     {"headway_bounds", bounds_json(p.headway_bounds)}};
  j["cav"] = {{"k1", cfg.cav.k1},
              {"k2", cfg.cav.k2},
              {"k3", cfg.cav.k3},
              {"lambda2", cfg.cav.lambda2},
              {"lambda3", cfg.cav.lambda3}};
  j["grid"] = {{"k1", axis_json(cfg.grid.k1)},
               {"k2", axis_json(cfg.grid.k2)},
               {"k3", axis_json(cfg.grid.k3)},
               {"lambda2", cfg.grid.lambda2},
               {"lambda3", cfg.grid.lambda3}};
  j["weights"] = {{"stable", cfg.weights.stable}, {"safe", cfg.weights.safe}};
  j["band"] = {{"mode", band_mode_name(cfg.band.mode)},
               {"points", cfg.band.points},
               {"lower_ratio", cfg.band.lower_ratio},
               {"refine_iterations", cfg.band.refine_iterations},
               {"full_lo", cfg.band.full_lo},
               {"full_hi", cfg.band.full_hi}};
  j["envelope"] = {{"headway_min", cfg.envelope.headway_min},
                   {"headway_max", cfg.envelope.headway_max},
                   {"disturbance_magnitude", cfg.envelope.disturbance_magnitude},
                   {"ttc_threshold", cfg.envelope.ttc_threshold}};
  j["sweep"] = {{"omega_min", cfg.sweep.omega_min}, {"omega_max", cfg.sweep.omega_max}, {"points", cfg.sweep.points}};
  const auto& s = cfg.simulation;
  ordered_json sim;
  sim["hdv_model"] = to_string(s.hdv_model);
  sim["controller"] = to_string(s.controller);
  sim["platoon_size"] = s.platoon_size;
  sim["reference_gains"] = {{"kv", s.reference_gains.kv}, {"kp", s.reference_gains.kp}, {"ka", s.reference_gains.ka}};
  sim["reference_lambda1"] = s.reference_lambda1;
  sim["multi_pred_window"] = s.multi_pred_window;
  sim["accel_limits"] = {{"min", s.limits.min}, {"max", s.limits.max}};
  sim["perturbation"] = perturbation_json(s.perturbation);
  sim["integrator"] = {{"step", s.integrator.step},
                       {"horizon", s.integrator.horizon},
                       {"record_stride", s.integrator.record_stride}};
  if (s.collision_gap) {
    sim["collision_gap"] = *s.collision_gap;
  }
  j["simulation"] = sim;
  j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  root.text("scenario", cfg.scenario);
  root.u64("seed", cfg.seed);
  root.object("v_star", [&](Section& s) { read_speed(s, cfg.v_star); });
  root.object("initial_speed", [&](Section& s) {
    SpeedValue v;
    read_speed(s, v);
    cfg.initial_speed = v;
  });
  root.object("optimal_velocity", [&](Section& s) {
    s.number("amplitude", cfg.ovf.amplitude);
    s.number("slope", cfg.ovf.slope);
    s.number("offset", cfg.ovf.offset);
    s.number("shift", cfg.ovf.shift);
    s.number("vehicle_length", cfg.ovf.vehicle_length);
  });
  root.object("population", [&](Section& s) {
    auto& p = cfg.population;
    s.count("count", p.count);
    s.object("alpha", [&](Section& d) { read_normal(d, p.alpha); });
    s.object("beta", [&](Section& d) { read_normal(d, p.beta); });
    s.object("desired_headway", [&](Section& d) { read_normal(d, p.desired_headway); });
    s.number("delay_coefficient", p.delay_coefficient);
    s.number("lambda2", p.lambda2);
    s.object("alpha_bounds", [&](Section& b) { read_bounds(b, p.alpha_bounds); });
    s.object("beta_bounds", [&](Section& b) { read_bounds(b, p.beta_bounds); });
    s.object("headway_bounds", [&](Section& b) { read_bounds(b, p.headway_bounds); });
  });
  root.object("cav", [&](Section& s) {
    s.number("k1", cfg.cav.k1);
    s.number("k2", cfg.cav.k2);
    s.number("k3", cfg.cav.k3);
    s.number("lambda2", cfg.cav.lambda2);
    s.number("lambda3", cfg.cav.lambda3);
  });
  root.object("grid", [&](Section& s) {
    s.object("k1", [&](Section& a) { read_axis(a, cfg.grid.k1); });
    s.object("k2", [&](Section& a) { read_axis(a, cfg.grid.k2); });
    s.object("k3", [&](Section& a) { read_axis(a, cfg.grid.k3); });
    s.number("lambda2", cfg.grid.lambda2);
    s.number("lambda3", cfg.grid.lambda3);
  });
  root.object("weights", [&](Section& s) {
    s.number("stable", cfg.weights.stable);
    s.number("safe", cfg.weights.safe);
  });
  root.object("band", [&](Section& s) {
    s.enumeration("mode", cfg.band.mode, parse_band_mode);
    s.count("points", cfg.band.points);
    s.number("lower_ratio", cfg.band.lower_ratio);
    s.count("refine_iterations", cfg.band.refine_iterations);
    s.number("full_lo", cfg.band.full_lo);
    s.number("full_hi", cfg.band.full_hi);
  });
  root.object("envelope", [&](Section& s) {
    s.number("headway_min", cfg.envelope.headway_min);
    s.number("headway_max", cfg.envelope.headway_max);
    s.number("disturbance_magnitude", cfg.envelope.disturbance_magnitude);
    s.number("ttc_threshold", cfg.envelope.ttc_threshold);
  });
  root.object("sweep", [&](Section& s) {
    s.number("omega_min", cfg.sweep.omega_min);
    s.number("omega_max", cfg.sweep.omega_max);
    s.count("points", cfg.sweep.points);
  });
  root.object("simulation", [&](Section& s) {
    auto& sim = cfg.simulation;
    s.enumeration("hdv_model", sim.hdv_model, parse_hdv_model);
    s.enumeration("controller", sim.controller, parse_controller_kind);
    s.count("platoon_size", sim.platoon_size);
    s.object("reference_gains", [&](Section& g) {
      g.number("kv", sim.reference_gains.kv);
      g.number("kp", sim.reference_gains.kp);
      g.number("ka", sim.reference_gains.ka);
    });
    s.number("reference_lambda1", sim.reference_lambda1);
    s.count("multi_pred_window", sim.multi_pred_window);
    s.object("accel_limits", [&](Section& l) {
      l.number("min", sim.limits.min);
      l.number("max", sim.limits.max);
    });
    s.object("perturbation", [&](Section& p) { read_perturbation(p, sim.perturbation); });
    s.object("integrator", [&](Section& i) {
      i.number("step", sim.integrator.step);
      i.number("horizon", sim.integrator.horizon);
      i.count("record_stride", sim.integrator.record_stride);
    });
    if (s.child("collision_gap")) {
      double gap = 0.0;
      s.number("collision_gap", gap);
      sim.collision_gap = gap;
    }
  });
  root.text("output_dir", cfg.output_dir);
  root.finish();
  synchronize(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  return from_json(doc);
}

std::optional<std::filesystem::path> bundled_preset(const std::string& name) {
#ifdef MIXFLOW_PRESET_DIR
  const std::filesystem::path candidate = std::filesystem::path(MIXFLOW_PRESET_DIR) / name;
  if (std::filesystem::is_regular_file(candidate)) {
    return candidate;
  }
#else
  (void)name;
#endif
  return std::nullopt;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::filesystem::path resolved = path;
  if (!std::filesystem::exists(resolved) && !path.has_parent_path()) {
    if (auto preset = bundled_preset(path.string())) {
      resolved = *preset;
    }
  }
  std::ifstream in(resolved);
  if (!in) {
    throw ConfigError(path.string(), "cannot open config file '" + path.string() + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), std::string(e.what()).substr(e.key().size() + 2) + " (in " + path.string() + ")");
  }
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // Where results land does not change them.
  auto doc = to_json(cfg);
  doc.erase("output_dir");
  return fnv1a(doc.dump());
}

void validate(const ExperimentConfig& cfg) {
  require(!cfg.scenario.empty(), "scenario", "must not be empty");
  require(cfg.v_star.unit == Unit::meters_per_second || cfg.v_star.unit == Unit::miles_per_hour, "v_star.unit",
          "expected a speed unit (m/s or mph)");
  require(cfg.v_star.value > 0.0 && std::isfinite(cfg.v_star.value), "v_star.value", "must be > 0");
  if (cfg.initial_speed) {
    require(cfg.initial_speed->unit == Unit::meters_per_second || cfg.initial_speed->unit == Unit::miles_per_hour,
            "initial_speed.unit", "expected a speed unit (m/s or mph)");
    require(cfg.initial_speed->value >= 0.0, "initial_speed.value", "must be >= 0");
  }
  rethrow_as("optimal_velocity", [&] { validate(cfg.ovf); });

  ExperimentConfig synced = cfg;
  synchronize(synced);
  rethrow_as("population", [&] { validate(synced.population, cfg.ovf.vehicle_length); });

  const std::pair<const char*, double> gains[] = {{"k1", cfg.cav.k1}, {"k2", cfg.cav.k2}, {"k3", cfg.cav.k3}};
  for (const auto& [name, value] : gains) {
    require(value >= 0.0 && std::isfinite(value), std::string("cav.") + name,
            "gains must be nonnegative (k1, k2, k3 >= 0), got " + std::to_string(value));
  }
  require(cfg.cav.lambda2 >= 0.0 && finite_all({cfg.cav.lambda2, cfg.cav.lambda3}), "cav.lambda2",
          "must be finite and >= 0");

  rethrow_as("grid", [&] { validate(cfg.grid); });
  require(cfg.weights.stable >= 0.0 && cfg.weights.safe >= 0.0 && finite_all({cfg.weights.stable, cfg.weights.safe}),
          "weights", "must be finite and >= 0");

  require(cfg.band.points >= 1, "band.points", "must be >= 1");
  require(cfg.band.lower_ratio > 0.0 && cfg.band.lower_ratio < 1.0, "band.lower_ratio", "must lie in (0, 1)");
  require(cfg.band.full_lo > 0.0 && cfg.band.full_hi > cfg.band.full_lo && std::isfinite(cfg.band.full_hi),
          "band.full_lo", "need 0 < full_lo < full_hi");

  const auto& env = cfg.envelope;
  require(env.headway_max > env.headway_min, "envelope.headway_max", "must exceed headway_min");
  require(env.disturbance_magnitude > 0.0 && std::isfinite(env.disturbance_magnitude),
          "envelope.disturbance_magnitude", "must be > 0");
  require(env.ttc_threshold > 0.0 && std::isfinite(env.ttc_threshold), "envelope.ttc_threshold", "must be > 0");
  const double mean_headway = cfg.population.desired_headway.mean;
  require(mean_headway > env.headway_min && mean_headway < env.headway_max, "envelope",
          "mean desired headway must lie strictly inside [headway_min, headway_max]");

  require(cfg.sweep.omega_min > 0.0 && std::isfinite(cfg.sweep.omega_max) && cfg.sweep.omega_max >= cfg.sweep.omega_min,
          "sweep", "need 0 < omega_min <= omega_max");
  require(cfg.sweep.points < 2 || cfg.sweep.omega_max > cfg.sweep.omega_min, "sweep.omega_max",
          "must exceed omega_min when points >= 2");

  const auto& sim = cfg.simulation;
  require(sim.platoon_size <= cfg.population.count, "simulation.platoon_size", "exceeds population.count");
  require(sim.multi_pred_window >= 2, "simulation.multi_pred_window", "must be >= 2");
  require(sim.limits.min < 0.0 && sim.limits.max > 0.0, "simulation.accel_limits", "need min < 0 < max");
  require(finite_all({sim.reference_gains.kv, sim.reference_gains.kp, sim.reference_gains.ka, sim.reference_lambda1}),
          "simulation.reference_gains", "must be finite");
  if (sim.collision_gap) {
    require(*sim.collision_gap > 0.0, "simulation.collision_gap", "must be > 0");
  }
  rethrow_as("simulation.perturbation",
             [&] { validate(sim.perturbation, cfg.v_star.meters_per_second(), sim.limits); });

  // The step guard depends on the sampled delays of the simulated drivers.
  std::vector<HdvParams> drivers;
  rethrow_as("population", [&] { drivers = sample_population(synced); });
  drivers.resize(std::min(drivers.size(), sim.platoon_size));
  rethrow_as("simulation.integrator", [&] { validate(sim.integrator, drivers, sim.perturbation); });

  require(!cfg.output_dir.empty(), "output_dir", "must not be empty");
}

std::vector<HdvParams> sample_population(const ExperimentConfig& cfg) {
  ExperimentConfig synced = cfg;
  synchronize(synced);
  return sample_population(synced.population, cfg.ovf.vehicle_length);
}

SafetyEnvelope envelope_for(const ExperimentConfig& cfg, const std::vector<HdvParams>& population) {
  return make_envelope(cfg.envelope.headway_min, cfg.envelope.headway_max, cfg.envelope.disturbance_magnitude,
                       population);
}

PlatoonSpec platoon_for(const ExperimentConfig& cfg, const std::vector<HdvParams>& population) {
  PlatoonSpec spec;
  spec.v_star = cfg.v_star.meters_per_second();
  spec.cav = cfg.cav;
  const std::size_t n = std::min(cfg.simulation.platoon_size, population.size());
  spec.hdvs.assign(population.begin(), population.begin() + static_cast<std::ptrdiff_t>(n));
  spec.headway_min = cfg.envelope.headway_min;
  spec.headway_max = cfg.envelope.headway_max;
  return spec;
}

SimulationSetup simulation_setup(const ExperimentConfig& cfg, const PlatoonSpec& platoon) {
  SimulationSetup setup;
  setup.spec = platoon;
  setup.ovf = cfg.ovf;
  setup.hdv_model = cfg.simulation.hdv_model;
  setup.controller = cfg.simulation.controller;
  setup.reference_gains = cfg.simulation.reference_gains;
  setup.reference_lambda1 = cfg.simulation.reference_lambda1;
  setup.multi_pred_window = cfg.simulation.multi_pred_window;
  setup.limits = cfg.simulation.limits;
  setup.perturbation = cfg.simulation.perturbation;
  setup.integrator = cfg.simulation.integrator;
  setup.collision_gap = cfg.simulation.collision_gap;
  return setup;
}

} // namespace mixflow
