#include "mixflow/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mixflow/parallel.hpp"
#include "mixflow/population.hpp"

namespace mixflow {

std::vector<double> GainAxis::values() const {
  std::vector<double> out(steps);
  if (steps == 1) {
    out[0] = min;
    return out;
  }
  for (std::size_t i = 0; i < steps; ++i) {
    out[i] = min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  out.back() = max;
  return out;
}

void validate(const GainGrid& grid) {
  const std::pair<const char*, const GainAxis*> axes[] = {{"k1", &grid.k1}, {"k2", &grid.k2}, {"k3", &grid.k3}};
  for (const auto& [name, axis] : axes) {
    const std::string n(name);
    if (!(axis->min >= 0.0) || !std::isfinite(axis->max)) {
      throw std::invalid_argument("gain grid axis " + n + ": gains must be nonnegative (k1, k2, k3 >= 0)");
    }
    if (axis->max < axis->min) {
      throw std::invalid_argument("gain grid axis " + n + ": max < min");
    }
    if (axis->steps == 0) {
      throw std::invalid_argument("gain grid axis " + n + ": steps must be >= 1");
    }
    if (axis->steps == 1 && axis->max != axis->min) {
      throw std::invalid_argument("gain grid axis " + n + ": a swept axis needs steps >= 2");
    }
  }
  if (!(grid.lambda2 >= 0.0)) {
    throw std::invalid_argument("gain grid lambda2 must be >= 0");
  }
}

bool feasible(const CavGains& g) {
  const bool nonnegative = g.k1 >= 0.0 && g.k2 >= 0.0 && g.k3 >= 0.0 && g.lambda2 >= 0.0;
  return nonnegative && std::isfinite(g.k1 + g.k2 + g.k3 + g.lambda2) && cav_string_stable(g);
}

std::string to_string(CellStatus status) {
  switch (status) {
  case CellStatus::feasible: return "feasible";
  case CellStatus::negative_gain: return "negative_gain";
  case CellStatus::string_unstable: return "string_unstable";
  case CellStatus::decoupled: return "decoupled";
  }
  return "?";
}

CellStatus classify_cell(const CavGains& g) {
  if (g.k1 < 0.0 || g.k2 < 0.0 || g.k3 < 0.0) {
    return CellStatus::negative_gain;
  }
  if (!cav_string_stable(g)) {
    return CellStatus::string_unstable;
  }
  if (g.k1 == 0.0 && g.k3 == 0.0) {
    return CellStatus::decoupled;
  }
  return CellStatus::feasible;
}

double scalarize(const PlatoonObjective& objective, const ObjectiveWeights& weights) {
  return weights.stable * static_cast<double>(objective.stable.capped()) +
         weights.safe * static_cast<double>(objective.safe.capped());
}

double OptimizationReport::k2_over_k3() const {
  if (best_gains.k3 == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return best_gains.k2 / best_gains.k3;
}

const GridCell& OptimizationReport::best_cell() const { return cells.at(argmax.at(0)); }

namespace {

double axis_value(const CavGains& g, const std::string& axis) {
  if (axis == "k1") return g.k1;
  if (axis == "k2") return g.k2;
  if (axis == "k3") return g.k3;
  throw std::invalid_argument("unknown gain axis '" + axis + "'");
}

bool dominates(const PlatoonObjective& a, const PlatoonObjective& b) {
  const auto as = a.stable.capped(), ae = a.safe.capped();
  const auto bs = b.stable.capped(), be = b.safe.capped();
  return as >= bs && ae >= be && (as > bs || ae > be);
}

} // namespace

HeatmapSlice OptimizationReport::slice(const std::string& axis_a, const std::string& axis_b) const {
  const std::string axes[] = {"k1", "k2", "k3"};
  std::string fixed;
  for (const auto& a : axes) {
    if (a != axis_a && a != axis_b) {
      fixed = a;
    }
  }
  if (axis_a == axis_b || fixed.empty()) {
    throw std::invalid_argument("heatmap slice needs two distinct gain axes");
  }
  HeatmapSlice out{axis_a, axis_b, fixed, axis_value(best_gains, fixed), {}};
  for (const auto& cell : cells) {
    if (axis_value(cell.gains, fixed) == out.fixed_value) {
      out.rows.push_back({axis_value(cell.gains, axis_a), axis_value(cell.gains, axis_b), &cell});
    }
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const HeatmapRow& x, const HeatmapRow& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return out;
}

OptimizationReport grid_search(const GainGrid& grid, const std::vector<HdvParams>& population,
                               const OptimalVelocityFn& ovf, const SafetyEnvelope& env, const BandOptions& band,
                               const ObjectiveWeights& weights, std::size_t workers) {
  validate(grid);
  validate(env);
  const auto models = make_frequency_models(population, ovf);

  OptimizationReport report;
  report.population_size = population.size();
  report.eta = env.eta();

  const auto k1s = grid.k1.values();
  const auto k2s = grid.k2.values();
  const auto k3s = grid.k3.values();
  report.cells.reserve(grid.cell_count());
  for (double k1 : k1s) {
    for (double k2 : k2s) {
      for (double k3 : k3s) {
        GridCell cell;
        cell.gains = CavGains{k1, k2, k3, grid.lambda2, grid.lambda3};
        cell.status = classify_cell(cell.gains);
        report.cells.push_back(cell);
      }
    }
  }
  for (const auto& cell : report.cells) {
    switch (cell.status) {
    case CellStatus::feasible: break;
    case CellStatus::negative_gain: ++report.negative_count; break;
    case CellStatus::string_unstable: ++report.string_unstable_count; break;
    case CellStatus::decoupled: ++report.decoupled_count; break;
    }
  }
  report.infeasible_count = report.negative_count + report.string_unstable_count + report.decoupled_count;
  if (report.infeasible_count == report.cells.size()) {
    throw std::invalid_argument("grid_search: no feasible cell (negative gains: " +
                                std::to_string(report.negative_count) +
                                ", string-stability violations: " + std::to_string(report.string_unstable_count) +
                                ", decoupled: " + std::to_string(report.decoupled_count) + ")");
  }

  const bool trivially_stable =
      models.empty() || (band.mode == BandMode::below_critical &&
                         std::none_of(models.begin(), models.end(), [](const HdvFrequencyModel& m) {
                           return hdv_stability_verdict(m).critical_omega.has_value();
                         }));
  std::optional<StabilizabilitySearch> search;
  if (!trivially_stable) {
    search.emplace(make_band_search(models, band));
    const auto w = search->omegas();
    report.band = {w.front(), w.back()};
  }

  parallel_for(
      report.cells.size(),
      [&](std::size_t i) {
        GridCell& cell = report.cells[i];
        if (cell.status != CellStatus::feasible) {
          return;
        }
        if (search) {
          cell.objective = PlatoonObjective{search->stable(cell.gains), search->safe(cell.gains, report.eta)};
        } else {
          cell.objective = overall_objective(cell.gains, models, env, band);
        }
        cell.score = scalarize(*cell.objective, weights);
      },
      workers);

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& cell : report.cells) {
    if (cell.objective) {
      best = std::max(best, cell.score);
    }
  }
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    if (report.cells[i].objective && report.cells[i].score == best) {
      report.argmax.push_back(i);
    }
  }
  const GridCell& winner = report.cells[report.argmax.front()];
  report.best_gains = winner.gains;
  report.best_objective = *winner.objective;
  report.best_score = winner.score;

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const auto& ci = report.cells[i];
    if (!ci.objective) {
      continue;
    }
    const bool dominated = std::any_of(report.cells.begin(), report.cells.end(), [&](const GridCell& cj) {
      return cj.objective && dominates(*cj.objective, *ci.objective);
    });
    if (!dominated) {
      report.pareto.push_back(i);
    }
  }
  return report;
}

std::vector<SweepRow> frequency_sweep(const CavGains& g, const std::vector<HdvParams>& population,
                                      const OptimalVelocityFn& ovf, const SafetyEnvelope& env,
                                      const std::vector<double>& omegas) {
  if (!feasible(g)) {
    throw std::invalid_argument("frequency_sweep: CAV gains are not feasible");
  }
  validate(env);
  std::vector<SweepRow> rows;
  if (omegas.empty()) {
    return rows;
  }
  const double eta = env.eta();
  const StabilizabilitySearch hetero(make_frequency_models(population, ovf), omegas);
  const StabilizabilitySearch base(make_frequency_models(homogeneous_baseline(population), ovf), omegas);
  rows.reserve(omegas.size());
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    rows.push_back(SweepRow{omegas[k], hetero.stable_at(k, g), hetero.safe_at(k, g, eta), base.stable_at(k, g),
                            base.safe_at(k, g, eta)});
  }
  return rows;
}

} // namespace mixflow
