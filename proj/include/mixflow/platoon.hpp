#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mixflow/core_models.hpp"
#include "mixflow/frequency.hpp"

namespace mixflow {

/// Maximum number of HDVs behind one CAV whose head-to-tail gain stays
/// bounded, minimized over the frequencies examined.
struct StabilizableResult {
  /// nullopt: no crossing within the given population ("unbounded").
  std::optional<std::size_t> n_star;
  double binding_omega = 0.0;
  /// Cumulative log sum at n_star (at the population size when unbounded).
  double log_margin_at_n = 0.0;
  std::size_t population_size = 0;
  std::size_t evaluated_points = 0;
  /// Frequencies where the head term is -inf (|1 - T_A| = 0); never binding.
  std::size_t degenerate_points = 0;
  /// Frequencies where the head term alone is already > 0 (count 0 reported).
  std::size_t head_exceeds_points = 0;

  bool unbounded() const { return !n_star.has_value(); }
  /// n_star, or population_size + 1 when unbounded; used for ordering.
  std::size_t capped() const { return n_star.value_or(population_size + 1); }
};

/// Headway bounds and disturbance size for the safety-constrained count.
struct SafetyEnvelope {
  double headway_min = 10.0;            // m
  double headway_max = 50.0;            // m
  double disturbance_magnitude = 20.0;  // m
  double mean_desired_headway = 30.125; // m

  /// min(mean - headway_min, headway_max - mean).
  double margin() const;
  /// margin / disturbance_magnitude.
  double eta() const;

  friend bool operator==(const SafetyEnvelope&, const SafetyEnvelope&) = default;
};

/// Envelope whose mean desired headway is taken from the population.
SafetyEnvelope make_envelope(double headway_min, double headway_max, double disturbance_magnitude,
                             std::span<const HdvParams> hdvs);
void validate(const SafetyEnvelope& env);

/// |T_A(j w)| * prod |T_i(j w)|, accumulated as a sum of logs.
double head_to_tail_gain(double omega, const CavGains& cav, std::span<const HdvFrequencyModel> hdvs);

/// Result of the prefix search at one frequency.
struct PrefixCount {
  std::optional<std::size_t> n; // nullopt: unbounded
  double log_margin = 0.0;      // head + sum of the first n (or all) log gains
  bool head_exceeds = false;
  bool degenerate = false;
};

/// Largest n with head + sum_{i<=m} log_gains[i] <= 0 for every m <= n
/// (first sign change of the cumulative sum).
PrefixCount count_prefix(double head, std::span<const double> log_gains);

enum class BandMode { below_critical, full };

struct BandOptions {
  BandMode mode = BandMode::below_critical;
  std::size_t points = 512;
  /// Lower band edge as a fraction of the critical frequency.
  double lower_ratio = 1e-3;
  /// Local bisection steps around the grid argmin; 0 disables refinement.
  std::size_t refine_iterations = 12;
  double full_lo = 1e-4;
  double full_hi = 1e2;

  friend bool operator==(const BandOptions&, const BandOptions&) = default;
};

struct FrequencyBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// (w0 * lower_ratio, w0) with w0 the platoon critical frequency, or the
/// full band.
FrequencyBand stability_band(std::span<const HdvFrequencyModel> hdvs, const BandOptions& opts);

/// `points` log-spaced frequencies strictly inside (lo, hi).
std::vector<double> band_grid(const FrequencyBand& band, std::size_t points);

/// Precomputed HDV log gains on a frequency grid; reusable for any CAV
/// gains. Immutable after construction.
class StabilizabilitySearch {
public:
  StabilizabilitySearch(std::vector<HdvFrequencyModel> hdvs, std::vector<double> omegas,
                        std::size_t refine_iterations = 0);

  std::size_t population_size() const { return hdvs_.size(); }
  std::span<const double> omegas() const { return omegas_; }
  std::span<const HdvFrequencyModel> hdvs() const { return hdvs_; }

  /// Per-frequency inner results (before the min over frequency).
  PrefixCount stable_at(std::size_t omega_index, const CavGains& cav) const;
  PrefixCount safe_at(std::size_t omega_index, const CavGains& cav, double eta) const;

  /// Min over the grid (plus local refinement when enabled).
  StabilizableResult stable(const CavGains& cav) const;
  StabilizableResult safe(const CavGains& cav, double eta) const;

  /// Cumulative log gain of the first n HDVs at a grid frequency.
  double prefix_log_gain(std::size_t omega_index, std::size_t n) const;

private:
  template <typename Head>
  StabilizableResult minimize(Head&& head) const;
  PrefixCount count_from_table(std::size_t omega_index, double head) const;
  PrefixCount count_at(double omega, double head) const;

  std::vector<HdvFrequencyModel> hdvs_;
  std::vector<double> omegas_;
  std::size_t refine_iterations_;
  std::size_t stride_;
  // Row per frequency: cumulative sums P[1..N] and their running maximum.
  std::vector<double> prefix_;
  std::vector<double> running_max_;
};

StabilizableResult max_stabilizable(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                    const BandOptions& opts = {});
StabilizableResult max_safe_stabilizable(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                         const SafetyEnvelope& env, const BandOptions& opts = {});

struct PlatoonObjective {
  StabilizableResult stable;
  StabilizableResult safe;
};

PlatoonObjective overall_objective(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                   const SafetyEnvelope& env, const BandOptions& opts = {});

/// Search object over the band derived from the population.
StabilizabilitySearch make_band_search(std::span<const HdvFrequencyModel> hdvs, const BandOptions& opts);

} // namespace mixflow
