#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixflow/config.hpp"
#include "mixflow/optimizer.hpp"
#include "mixflow/simulator.hpp"

namespace mixflow {

inline constexpr const char* kHeatmapHeader = "k_a,k_b,n_stable,n_safe,feasible";
inline constexpr const char* kSweepHeader = "omega,n_stable,n_safe,n_stable_baseline,n_safe_baseline";
inline constexpr const char* kTrajectoryHeader = "t,vehicle,x,v,a,gap";
inline constexpr const char* kParetoHeader = "k1,k2,k3,n_stable,n_safe,score";

/// 17 significant digits.
std::string format_double(double x);
/// The count, or "unbounded".
std::string format_count(const std::optional<std::size_t>& n);
nlohmann::ordered_json count_json(const std::optional<std::size_t>& n);

/// Writes to a sibling temporary file, then renames it over `path`.
/// Throws std::runtime_error when the directory is not writable.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string heatmap_csv(const HeatmapSlice& slice);
std::string pareto_csv(const OptimizationReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string trajectory_csv(const Trajectory& traj);

nlohmann::ordered_json stability_report_json(const ExperimentConfig& cfg, const std::vector<HdvParams>& population);
nlohmann::ordered_json optimization_report_json(const OptimizationReport& report);
nlohmann::ordered_json safety_report_json(const SafetyReport& report, const Trajectory& traj);
nlohmann::ordered_json population_json(const std::vector<HdvParams>& population);
nlohmann::ordered_json manifest_json(const ExperimentConfig& cfg, const std::string& command,
                                     const std::vector<std::string>& files, const std::string& timestamp);

/// ISO-8601 UTC wall-clock time.
std::string utc_timestamp();

} // namespace mixflow
