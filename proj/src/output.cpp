#include "mixflow/output.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unistd.h>

#include "mixflow/frequency.hpp"
#include "mixflow/platoon.hpp"
#include "mixflow/population.hpp"

namespace mixflow {

using nlohmann::ordered_json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_count(const std::optional<std::size_t>& n) {
  return n ? std::to_string(*n) : std::string("unbounded");
}

ordered_json count_json(const std::optional<std::size_t>& n) {
  if (n) return *n;
  return "unbounded";
}

namespace {

ordered_json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

ordered_json result_json(const StabilizableResult& r) {
  return ordered_json{{"n_star", count_json(r.n_star)},
                      {"binding_omega", number_or_null(r.binding_omega)},
                      {"log_margin", number_or_null(r.log_margin_at_n)},
                      {"evaluated_points", r.evaluated_points},
                      {"degenerate_points", r.degenerate_points},
                      {"head_exceeds_points", r.head_exceeds_points}};
}

ordered_json gains_json(const CavGains& g) {
  return ordered_json{{"k1", g.k1}, {"k2", g.k2}, {"k3", g.k3}, {"lambda2", g.lambda2}, {"lambda3", g.lambda3}};
}

ordered_json objective_json(const PlatoonObjective& o, double eta) {
  return ordered_json{{"stable", result_json(o.stable)}, {"safe", result_json(o.safe)}, {"eta", eta}};
}

std::string role_name(VehicleRole role) {
  switch (role) {
  case VehicleRole::leader: return "leader";
  case VehicleRole::cav: return "cav";
  case VehicleRole::hdv: return "hdv";
  }
  return "?";
}

} // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("output directory '" + dir.string() + "' does not exist");
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place at '" + path.string() + "'");
  }
}

std::string heatmap_csv(const HeatmapSlice& slice) {
  std::string out = std::string(kHeatmapHeader) + "\n";
  for (const auto& row : slice.rows) {
    const GridCell& c = *row.cell;
    out += format_double(row.a) + "," + format_double(row.b) + ",";
    if (c.objective) {
      out += format_count(c.objective->stable.n_star) + "," + format_count(c.objective->safe.n_star) + ",1\n";
    } else {
      out += "NA,NA,0\n";
    }
  }
  return out;
}

std::string pareto_csv(const OptimizationReport& report) {
  std::string out = std::string(kParetoHeader) + "\n";
  for (std::size_t i : report.pareto) {
    const GridCell& c = report.cells[i];
    out += format_double(c.gains.k1) + "," + format_double(c.gains.k2) + "," + format_double(c.gains.k3) + "," +
           format_count(c.objective->stable.n_star) + "," + format_count(c.objective->safe.n_star) + "," +
           format_double(c.score) + "\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) {
    out += format_double(r.omega) + "," + format_count(r.stable.n) + "," + format_count(r.safe.n) + "," +
           format_count(r.stable_baseline.n) + "," + format_count(r.safe_baseline.n) + "\n";
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const std::string t = format_double(traj.times[k]) + ",";
    for (std::size_t i = 0; i < traj.vehicle_count(); ++i) {
      const auto& s = traj.vehicles[i];
      out += t + std::to_string(i) + "," + format_double(s.x[k]) + "," + format_double(s.v[k]) + "," +
             format_double(s.a[k]) + "," + (i == 0 ? std::string() : format_double(s.gap[k])) + "\n";
    }
  }
  return out;
}

ordered_json stability_report_json(const ExperimentConfig& cfg, const std::vector<HdvParams>& population) {
  const auto models = make_frequency_models(population, cfg.ovf);
  const auto env = envelope_for(cfg, population);
  const auto baseline = homogeneous_baseline(population);
  const auto base_models = make_frequency_models(baseline, cfg.ovf);

  ordered_json report;
  report["scenario"] = cfg.scenario;
  report["v_star_mps"] = cfg.v_star.meters_per_second();
  report["population_size"] = population.size();

  const auto grid = default_check_grid();
  report["cav"] = {{"gains", gains_json(cfg.cav)},
                   {"string_margin", cav_string_margin(cfg.cav)},
                   {"string_stable", cav_string_stable(cfg.cav)},
                   {"peak_gain", cav_peak_gain(cfg.cav, grid)}};

  std::map<std::string, std::size_t> verdicts;
  ordered_json vehicles = ordered_json::array();
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto& p = population[i];
    const auto& m = models[i];
    const auto v = hdv_stability_verdict(m);
    ++verdicts[to_string(v.kind)];
    vehicles.push_back({{"index", i + 1},
                        {"alpha", p.alpha},
                        {"beta", p.beta},
                        {"tau", p.tau},
                        {"desired_headway", p.desired_headway},
                        {"k1", m.gains.k1},
                        {"k2", m.gains.k2},
                        {"k3", m.gains.k3},
                        {"aggregate_damping", m.aggregate()},
                        {"verdict", to_string(v.kind)},
                        {"critical_omega", v.critical_omega ? ordered_json(*v.critical_omega) : ordered_json()},
                        {"numeric_edge", numeric_instability_edge(m, grid)}});
  }
  ordered_json platoon;
  platoon["verdict_counts"] = verdicts;
  try {
    const auto cf = platoon_critical_frequency(models);
    platoon["critical_omega"] = cf.omega;
    platoon["excluded"] = cf.excluded.size();
  } catch (const std::domain_error&) {
    platoon["critical_omega"] = nullptr;
    platoon["excluded"] = population.size();
  }
  report["platoon"] = platoon;

  if (cav_string_stable(cfg.cav)) {
    report["objective"] = objective_json(overall_objective(cfg.cav, models, env, cfg.band), env.eta());
    report["baseline_objective"] =
        objective_json(overall_objective(cfg.cav, base_models, envelope_for(cfg, baseline), cfg.band), env.eta());
  } else {
    report["objective"] = nullptr;
    report["baseline_objective"] = nullptr;
  }
  report["vehicles"] = vehicles;
  return report;
}

ordered_json optimization_report_json(const OptimizationReport& report) {
  ordered_json out;
  out["best_gains"] = gains_json(report.best_gains);
  out["best_objective"] = objective_json(report.best_objective, report.eta);
  out["best_score"] = report.best_score;
  out["k2_over_k3"] = number_or_null(report.k2_over_k3());
  ordered_json argmax = ordered_json::array();
  for (std::size_t i : report.argmax) {
    const auto& g = report.cells[i].gains;
    argmax.push_back({g.k1, g.k2, g.k3});
  }
  out["argmax"] = argmax;
  out["cells"] = report.cells.size();
  out["infeasible"] = {{"total", report.infeasible_count},
                       {"negative_gain", report.negative_count},
                       {"string_unstable", report.string_unstable_count},
                       {"decoupled", report.decoupled_count}};
  out["population_size"] = report.population_size;
  out["band"] = {report.band.lo, report.band.hi};
  out["pareto_size"] = report.pareto.size();
  return out;
}

ordered_json safety_report_json(const SafetyReport& report, const Trajectory& traj) {
  ordered_json out;
  out["ttc_threshold"] = report.ttc_threshold;
  out["horizon"] = traj.times.empty() ? 0.0 : traj.times.back();
  if (traj.collision) {
    out["collision"] = {{"time", traj.collision->time}, {"vehicle", traj.collision->vehicle}};
  } else {
    out["collision"] = nullptr;
  }
  out["window_truncated"] = traj.window_truncated;
  ordered_json vehicles = ordered_json::array();
  for (std::size_t k = 0; k < report.vehicles.size(); ++k) {
    const auto& v = report.vehicles[k];
    vehicles.push_back({{"vehicle", k + 1},
                        {"role", role_name(traj.vehicles[k + 1].role)},
                        {"min_ttc", number_or_null(v.min_ttc)},
                        {"tet", v.tet},
                        {"tit", v.tit},
                        {"headway_violations", v.headway_violations},
                        {"collision", v.collision}});
  }
  out["vehicles"] = vehicles;
  return out;
}

ordered_json population_json(const std::vector<HdvParams>& population) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto& p = population[i];
    arr.push_back({{"index", i + 1},
                   {"alpha", p.alpha},
                   {"beta", p.beta},
                   {"tau", p.tau},
                   {"desired_headway", p.desired_headway},
                   {"lambda2", p.lambda2},
                   {"lambda3", p.lambda3}});
  }
  return ordered_json{{"count", population.size()}, {"drivers", arr}};
}

ordered_json manifest_json(const ExperimentConfig& cfg, const std::string& command,
                           const std::vector<std::string>& files, const std::string& timestamp) {
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return ordered_json{{"tool", "mixflow"},     {"version", MIXFLOW_VERSION}, {"command", command},
                      {"scenario", cfg.scenario}, {"seed", cfg.seed},       {"config_hash", hash},
                      {"files", files},        {"timestamp", timestamp}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace mixflow
