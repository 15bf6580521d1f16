#pragma once

#include <string_view>

namespace mixflow {

enum class Unit { meters_per_second, miles_per_hour, meters, miles };

inline constexpr double kMetersPerSecondPerMph = 0.44704;
inline constexpr double kMetersPerMile = 1609.344;

/// Converts between speed units (mph, m/s) or length units (mi, m).
/// Throws std::invalid_argument for a speed/length mix.
double unit_convert(double value, Unit from, Unit to);

/// Accepts "m/s", "mph", "m", "mi".
Unit parse_unit(std::string_view text);
std::string_view unit_name(Unit unit);

} // namespace mixflow
