#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixflow/core_models.hpp"
#include "mixflow/optimizer.hpp"
#include "mixflow/platoon.hpp"
#include "mixflow/population.hpp"
#include "mixflow/simulator.hpp"
#include "mixflow/units.hpp"

namespace mixflow {

/// Bad configuration: unreadable file, malformed JSON, unknown or mistyped
/// key, or a value violating an invariant. `key()` is the dotted path.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& key, const std::string& message);
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

struct SpeedValue {
  double value = 0.0;
  Unit unit = Unit::meters_per_second;

  double meters_per_second() const;
  friend bool operator==(const SpeedValue&, const SpeedValue&) = default;
};

struct EnvelopeConfig {
  double headway_min = 10.0;           // m
  double headway_max = 50.0;           // m
  double disturbance_magnitude = 20.0; // m
  double ttc_threshold = 3.0;          // s

  friend bool operator==(const EnvelopeConfig&, const EnvelopeConfig&) = default;
};

/// Log-spaced frequencies, endpoints included; zero points is allowed.
struct SweepConfig {
  double omega_min = 1e-3; // rad/s
  double omega_max = 1.0;  // rad/s
  std::size_t points = 200;

  std::vector<double> omegas() const;
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct SimulationConfig {
  HdvModel hdv_model = HdvModel::nonlinear;
  ControllerKind controller = ControllerKind::fvdm;
  /// HDVs taken from the front of the sampled population.
  std::size_t platoon_size = 10;
  ReferenceGains reference_gains;
  double reference_lambda1 = 0.0;
  std::size_t multi_pred_window = 2;
  AccelLimits limits;
  Perturbation perturbation;
  IntegratorConfig integrator;
  std::optional<double> collision_gap;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct ExperimentConfig {
  std::string scenario = "custom";
  SpeedValue v_star{30.0, Unit::miles_per_hour};
  /// Informational upstream free-flow speed.
  std::optional<SpeedValue> initial_speed;
  OptimalVelocityFn ovf;
  /// `seed` and `v_star` inside are mirrored from the top-level fields.
  PopulationSpec population;
  CavGains cav;
  GainGrid grid;
  ObjectiveWeights weights;
  BandOptions band;
  EnvelopeConfig envelope;
  SweepConfig sweep;
  SimulationConfig simulation;
  std::string output_dir = "out";
  std::uint64_t seed = 42;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Copies the top-level seed and v_star into the population spec.
void synchronize(ExperimentConfig& cfg);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig from_json(const nlohmann::json& doc);
ExperimentConfig parse_config(const std::string& text);
/// A missing path falls back to a bundled preset of the same file name.
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

/// Throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical dump without output_dir.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a(const std::string& bytes);

std::optional<std::filesystem::path> bundled_preset(const std::string& name);

std::vector<HdvParams> sample_population(const ExperimentConfig& cfg);
SafetyEnvelope envelope_for(const ExperimentConfig& cfg, const std::vector<HdvParams>& population);
/// Platoon for the simulator: the configured CAV and the first
/// `simulation.platoon_size` drivers of the population.
PlatoonSpec platoon_for(const ExperimentConfig& cfg, const std::vector<HdvParams>& population);
SimulationSetup simulation_setup(const ExperimentConfig& cfg, const PlatoonSpec& platoon);

} // namespace mixflow
