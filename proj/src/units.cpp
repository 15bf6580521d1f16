#include "mixflow/units.hpp"

#include <stdexcept>
#include <string>

namespace mixflow {

namespace {

bool is_speed(Unit u) { return u == Unit::meters_per_second || u == Unit::miles_per_hour; }

// Factor to the SI unit of the same dimension.
double to_si(Unit u) {
  switch (u) {
  case Unit::meters_per_second:
  case Unit::meters:
    return 1.0;
  case Unit::miles_per_hour:
    return kMetersPerSecondPerMph;
  case Unit::miles:
    return kMetersPerMile;
  }
  throw std::invalid_argument("unknown unit");
}

} // namespace

double unit_convert(double value, Unit from, Unit to) {
  if (is_speed(from) != is_speed(to)) {
    throw std::invalid_argument("unit_convert: cannot convert " + std::string(unit_name(from)) +
                                " to " + std::string(unit_name(to)));
  }
  if (from == to) {
    return value;
  }
  if (to_si(to) == 1.0) {
    return value * to_si(from);
  }
  return value / to_si(to);
}

Unit parse_unit(std::string_view text) {
  if (text == "m/s") return Unit::meters_per_second;
  if (text == "mph") return Unit::miles_per_hour;
  if (text == "m") return Unit::meters;
  if (text == "mi") return Unit::miles;
  throw std::invalid_argument("unsupported unit '" + std::string(text) + "'");
}

std::string_view unit_name(Unit unit) {
  switch (unit) {
  case Unit::meters_per_second: return "m/s";
  case Unit::miles_per_hour: return "mph";
  case Unit::meters: return "m";
  case Unit::miles: return "mi";
  }
  return "?";
}

} // namespace mixflow
