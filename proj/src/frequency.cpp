#include "mixflow/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixflow {

namespace {

constexpr double kSingularMagnitude = 1e-300;

void check_omega(double omega) {
  if (!std::isfinite(omega) || omega < 0.0) {
    throw std::domain_error("frequency must be finite and >= 0, got " + std::to_string(omega));
  }
}

// |den|^2 below the threshold squared underflows, so test the magnitude.
void check_den_sq(double den_sq, double omega) {
  if (!(den_sq > 0.0) || std::sqrt(den_sq) < kSingularMagnitude) {
    throw SingularityError(omega);
  }
}

} // namespace

SingularityError::SingularityError(double omega)
    : std::runtime_error("transfer function singular at omega = " + std::to_string(omega) + " rad/s"),
      omega_(omega) {}

HdvFrequencyModel make_frequency_model(const HdvParams& p, const OptimalVelocityFn& ovf) {
  return HdvFrequencyModel{linearize_hdv(p, ovf), p.lambda2, p.tau};
}

std::vector<HdvFrequencyModel> make_frequency_models(std::span<const HdvParams> hdvs,
                                                     const OptimalVelocityFn& ovf) {
  std::vector<HdvFrequencyModel> out;
  out.reserve(hdvs.size());
  for (const auto& p : hdvs) {
    out.push_back(make_frequency_model(p, ovf));
  }
  return out;
}

Complex hdv_transfer(double omega, const HdvFrequencyModel& m) {
  check_omega(omega);
  const Complex s(0.0, omega);
  const Complex delay = std::exp(-s * m.tau);
  const Complex num = (m.gains.k1 + s * m.gains.k3) * delay;
  const Complex den = s * s + s * m.aggregate() * delay + m.gains.k1 * delay;
  if (std::abs(den) < kSingularMagnitude) {
    throw SingularityError(omega);
  }
  return num / den;
}

double hdv_gain_sq(double omega, const HdvFrequencyModel& m) {
  check_omega(omega);
  const double k1 = m.gains.k1;
  const double k3 = m.gains.k3;
  const double K = m.aggregate();
  const double w2 = omega * omega;
  const double wt = omega * m.tau;
  const double f = -2.0 * w2 * omega * K * std::sin(wt) - 2.0 * w2 * k1 * std::cos(wt);
  const double den = w2 * K * K + w2 * w2 + k1 * k1 + f;
  check_den_sq(den, omega);
  return (k1 * k1 + w2 * k3 * k3) / den;
}

bool cav_dc_limit_applies(double omega, const CavGains& g) {
  return omega == 0.0 && g.k1 == 0.0;
}

Complex cav_transfer(double omega, const CavGains& g) {
  check_omega(omega);
  const double K = g.k2 + g.k3 + g.k1 * g.lambda2;
  if (cav_dc_limit_applies(omega, g)) {
    if (K < kSingularMagnitude) {
      throw SingularityError(omega);
    }
    return Complex(g.k3 / K, 0.0);
  }
  const Complex s(0.0, omega);
  const Complex den = s * s + s * K + g.k1;
  if (std::abs(den) < kSingularMagnitude) {
    throw SingularityError(omega);
  }
  return (g.k1 + s * g.k3) / den;
}

double cav_gain_sq(double omega, const CavGains& g) {
  check_omega(omega);
  const double K = g.k2 + g.k3 + g.k1 * g.lambda2;
  const double w2 = omega * omega;
  if (cav_dc_limit_applies(omega, g)) {
    if (K < kSingularMagnitude) {
      throw SingularityError(omega);
    }
    return (g.k3 / K) * (g.k3 / K);
  }
  const double d = g.k1 - w2;
  const double den = d * d + w2 * K * K;
  check_den_sq(den, omega);
  return (g.k1 * g.k1 + w2 * g.k3 * g.k3) / den;
}

double cav_string_margin(const CavGains& g) {
  const double k1 = g.k1, k2 = g.k2, k3 = g.k3, l2 = g.lambda2;
  return k2 * k2 + k1 * k1 * l2 * l2 + 2.0 * k2 * k3 + 2.0 * k1 * k2 * l2 + 2.0 * k1 * k3 * l2 - 2.0 * k1;
}

bool cav_string_stable(const CavGains& g) { return cav_string_margin(g) >= 0.0; }

std::string to_string(StabilityVerdict::Kind kind) {
  switch (kind) {
  case StabilityVerdict::Kind::stable_all_frequencies: return "stable_all_frequencies";
  case StabilityVerdict::Kind::unstable_below_critical: return "unstable_below_critical";
  case StabilityVerdict::Kind::unstable_all_frequencies: return "unstable_all_frequencies";
  case StabilityVerdict::Kind::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

double sufficient_condition_threshold(const HdvFrequencyModel& m) {
  const double K = m.aggregate();
  return m.gains.k3 * m.gains.k3 + 2.0 * m.gains.k1 - K * K;
}

StabilityVerdict hdv_stability_verdict(const HdvFrequencyModel& m) {
  using Kind = StabilityVerdict::Kind;
  const double K = m.aggregate();
  const double threshold = sufficient_condition_threshold(m);
  const double delay_factor = 1.0 - 2.0 * K * m.tau;
  if (!std::isfinite(threshold) || !std::isfinite(delay_factor)) {
    return {Kind::inconclusive, std::nullopt};
  }
  if (delay_factor <= 0.0) {
    return {Kind::unstable_all_frequencies, std::nullopt};
  }
  if (threshold <= 0.0) {
    return {Kind::stable_all_frequencies, std::nullopt};
  }
  const double omega0 = std::sqrt(threshold / delay_factor);
  if (!std::isfinite(omega0) || omega0 <= 0.0) {
    return {Kind::inconclusive, std::nullopt};
  }
  return {Kind::unstable_below_critical, omega0};
}

CriticalFrequency platoon_critical_frequency(std::span<const HdvFrequencyModel> models) {
  CriticalFrequency out;
  out.omega = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto verdict = hdv_stability_verdict(models[i]);
    if (verdict.critical_omega) {
      out.omega = std::min(out.omega, *verdict.critical_omega);
    } else {
      out.excluded.push_back(i);
    }
  }
  if (!std::isfinite(out.omega)) {
    throw std::domain_error("no unstable band: no vehicle has a finite critical frequency");
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi) || n == 0) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and n >= 1");
  }
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_check_grid() { return log_grid(1e-4, 1e2, 2048); }

double numeric_instability_edge(const HdvFrequencyModel& m, std::span<const double> omegas) {
  double edge = 0.0;
  for (double w : omegas) {
    if (hdv_gain_sq(w, m) > 1.0) {
      edge = std::max(edge, w);
    }
  }
  return edge;
}

double cav_peak_gain(const CavGains& g, std::span<const double> omegas) {
  double peak = 0.0;
  for (double w : omegas) {
    peak = std::max(peak, std::abs(cav_transfer(w, g)));
  }
  return peak;
}

} // namespace mixflow
