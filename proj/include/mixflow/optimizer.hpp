#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mixflow/core_models.hpp"
#include "mixflow/platoon.hpp"

namespace mixflow {

struct GainAxis {
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 1;

  /// Evenly spaced values; a single step yields {min}.
  std::vector<double> values() const;
  friend bool operator==(const GainAxis&, const GainAxis&) = default;
};

struct GainGrid {
  GainAxis k1{0.0, 0.5, 21};
  GainAxis k2{0.0, 2.0, 21};
  GainAxis k3{0.0, 2.0, 21};
  double lambda2 = 1.125; // s
  double lambda3 = 0.0;   // m

  std::size_t cell_count() const { return k1.steps * k2.steps * k3.steps; }
  friend bool operator==(const GainGrid&, const GainGrid&) = default;
};

/// Throws std::invalid_argument: negative axis minimum, max < min, zero
/// steps, or a single-step axis whose min and max differ.
void validate(const GainGrid& grid);

struct ObjectiveWeights {
  double stable = 0.5;
  double safe = 0.5;
  friend bool operator==(const ObjectiveWeights&, const ObjectiveWeights&) = default;
};

/// Nonnegative gains satisfying the CAV string-stability inequality.
bool feasible(const CavGains& g);

enum class CellStatus {
  feasible,
  negative_gain,
  string_unstable,
  /// k1 = k3 = 0: T_A is identically zero, the CAV ignores its predecessor.
  decoupled,
};

std::string to_string(CellStatus status);
CellStatus classify_cell(const CavGains& g);

struct GridCell {
  CavGains gains;
  CellStatus status = CellStatus::feasible;
  std::optional<PlatoonObjective> objective;
  double score = 0.0;
};

struct HeatmapRow {
  double a = 0.0;
  double b = 0.0;
  const GridCell* cell = nullptr;
};

/// Two swept axes with the third held at the best cell's value.
struct HeatmapSlice {
  std::string axis_a;
  std::string axis_b;
  std::string fixed_axis;
  double fixed_value = 0.0;
  std::vector<HeatmapRow> rows;
};

struct OptimizationReport {
  CavGains best_gains;
  PlatoonObjective best_objective;
  double best_score = 0.0;
  /// Cells in k1-major, then k2, then k3 order.
  std::vector<GridCell> cells;
  std::size_t infeasible_count = 0;
  std::size_t negative_count = 0;
  std::size_t string_unstable_count = 0;
  std::size_t decoupled_count = 0;
  std::size_t population_size = 0;
  double eta = 0.0;
  FrequencyBand band;
  /// Indices into cells whose (n_stable, n_safe) pair is not dominated.
  std::vector<std::size_t> pareto;
  /// Indices of every cell attaining best_score.
  std::vector<std::size_t> argmax;

  /// k2 / k3 at the optimum (NaN when k3 = 0).
  double k2_over_k3() const;
  HeatmapSlice slice(const std::string& axis_a, const std::string& axis_b) const;
  const GridCell& best_cell() const;
};

/// Weighted sum with unbounded counts mapped to population size + 1.
double scalarize(const PlatoonObjective& objective, const ObjectiveWeights& weights);

/// Exhaustive search over the grid. Ties resolve to the smallest k1, then
/// k2, then k3. Throws std::invalid_argument when no cell is feasible.
OptimizationReport grid_search(const GainGrid& grid, const std::vector<HdvParams>& population,
                               const OptimalVelocityFn& ovf, const SafetyEnvelope& env,
                               const BandOptions& band = {}, const ObjectiveWeights& weights = {},
                               std::size_t workers = 0);

struct SweepRow {
  double omega = 0.0;
  PrefixCount stable;
  PrefixCount safe;
  PrefixCount stable_baseline;
  PrefixCount safe_baseline;
};

/// Per-frequency counts for the population and for its homogeneous,
/// zero-delay baseline. Requires feasible gains.
std::vector<SweepRow> frequency_sweep(const CavGains& g, const std::vector<HdvParams>& population,
                                      const OptimalVelocityFn& ovf, const SafetyEnvelope& env,
                                      const std::vector<double>& omegas);

} // namespace mixflow
