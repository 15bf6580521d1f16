#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixflow/core_models.hpp"

namespace mixflow {

using Complex = std::complex<double>;

/// Raised when a transfer-function denominator vanishes on the imaginary
/// axis (|den| < 1e-300), i.e. a characteristic root sits at s = j*omega.
class SingularityError : public std::runtime_error {
public:
  explicit SingularityError(double omega);
  double omega() const noexcept { return omega_; }

private:
  double omega_;
};

/// Linearized delayed HDV seen from the frequency domain.
struct HdvFrequencyModel {
  LinearGains gains;
  double lambda2 = 0.0; // s
  double tau = 0.0;     // s

  /// Aggregate damping K = k2 + k3 + k1 * lambda2.
  double aggregate() const { return gains.k2 + gains.k3 + gains.k1 * lambda2; }

  friend bool operator==(const HdvFrequencyModel&, const HdvFrequencyModel&) = default;
};

HdvFrequencyModel make_frequency_model(const HdvParams& p, const OptimalVelocityFn& ovf);
std::vector<HdvFrequencyModel> make_frequency_models(std::span<const HdvParams> hdvs,
                                                     const OptimalVelocityFn& ovf);

/// T_i(j w) = (k1 + j w k3) e^{-j w tau} / (-w^2 + (j w K + k1) e^{-j w tau}).
Complex hdv_transfer(double omega, const HdvFrequencyModel& m);

/// Closed form of |T_i(j w)|^2 with the delay folded into sin/cos terms.
double hdv_gain_sq(double omega, const HdvFrequencyModel& m);

/// T_A(j w) = (k1 + j w k3) / (-w^2 + j w (k2 + k3 + k1 lambda2) + k1).
/// At k1 = 0, w = 0 the continuous limit k3 / (k2 + k3) is returned
/// (see cav_dc_limit_applies).
Complex cav_transfer(double omega, const CavGains& g);

/// Closed form of |T_A(j w)|^2.
double cav_gain_sq(double omega, const CavGains& g);

/// True when cav_transfer(0, g) is defined by the k1 -> 0 limit rather than
/// by direct evaluation.
bool cav_dc_limit_applies(double omega, const CavGains& g);

/// k2^2 + k1^2 l2^2 + 2 k2 k3 + 2 k1 k2 l2 + 2 k1 k3 l2 - 2 k1; the CAV is
/// string stable at every frequency iff this is >= 0.
double cav_string_margin(const CavGains& g);
bool cav_string_stable(const CavGains& g);

struct StabilityVerdict {
  enum class Kind { stable_all_frequencies, unstable_below_critical, unstable_all_frequencies, inconclusive };

  Kind kind = Kind::inconclusive;
  /// Present only for unstable_below_critical; always > 0.
  std::optional<double> critical_omega;

  friend bool operator==(const StabilityVerdict&, const StabilityVerdict&) = default;
};

std::string to_string(StabilityVerdict::Kind kind);

/// k3^2 + 2 k1 - K^2: right-hand side of the delay-robust sufficient condition
/// (1 - 2 K tau) w^2 >= k3^2 + 2 k1 - K^2.
double sufficient_condition_threshold(const HdvFrequencyModel& m);

/// Classifies an HDV by the sufficient condition. For unstable_below_critical
/// every w >= critical_omega is guaranteed |T| <= 1; nothing is claimed below.
StabilityVerdict hdv_stability_verdict(const HdvFrequencyModel& m);

struct CriticalFrequency {
  double omega = 0.0;
  /// Indices of models without a finite critical frequency.
  std::vector<std::size_t> excluded;
};

/// Minimum of the per-vehicle critical frequencies. Models without a finite
/// one are skipped and listed; throws std::domain_error("no unstable band")
/// when none remain.
CriticalFrequency platoon_critical_frequency(std::span<const HdvFrequencyModel> models);

/// n log-spaced points covering [lo, hi] inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Default grid for numeric checks: 2048 points on [1e-4, 1e2] rad/s.
std::vector<double> default_check_grid();

/// Largest grid frequency at which |T_i| exceeds 1, or 0 when the grid shows
/// no amplification. A numeric counterpart to the closed-form critical
/// frequency, which is only sufficient.
double numeric_instability_edge(const HdvFrequencyModel& m, std::span<const double> omegas);

/// max over the grid of |T_A(j w)|.
double cav_peak_gain(const CavGains& g, std::span<const double> omegas);

} // namespace mixflow
