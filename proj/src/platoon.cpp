#include "mixflow/platoon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_abs_cav(double omega, const CavGains& cav) { return 0.5 * std::log(cav_gain_sq(omega, cav)); }

double log_abs_one_minus_cav(double omega, const CavGains& cav) {
  return std::log(std::abs(Complex(1.0, 0.0) - cav_transfer(omega, cav)));
}

bool all_stable(std::span<const HdvFrequencyModel> hdvs) {
  return std::all_of(hdvs.begin(), hdvs.end(), [](const HdvFrequencyModel& m) {
    return hdv_stability_verdict(m).kind == StabilityVerdict::Kind::stable_all_frequencies;
  });
}

StabilizableResult unbounded_result(std::size_t population) {
  StabilizableResult r;
  r.population_size = population;
  r.binding_omega = std::numeric_limits<double>::quiet_NaN();
  return r;
}

// Orders frequency results: a smaller count binds; among equal finite counts
// the one closer to crossing (larger margin) binds.
bool binds_tighter(const PrefixCount& a, const PrefixCount& b, std::size_t population) {
  const std::size_t ca = a.n.value_or(population + 1);
  const std::size_t cb = b.n.value_or(population + 1);
  if (ca != cb) {
    return ca < cb;
  }
  return a.log_margin > b.log_margin;
}

} // namespace

double SafetyEnvelope::margin() const {
  return std::min(mean_desired_headway - headway_min, headway_max - mean_desired_headway);
}

double SafetyEnvelope::eta() const { return margin() / disturbance_magnitude; }

SafetyEnvelope make_envelope(double headway_min, double headway_max, double disturbance_magnitude,
                             std::span<const HdvParams> hdvs) {
  SafetyEnvelope env;
  env.headway_min = headway_min;
  env.headway_max = headway_max;
  env.disturbance_magnitude = disturbance_magnitude;
  if (!hdvs.empty()) {
    double sum = 0.0;
    for (const auto& p : hdvs) {
      sum += p.desired_headway;
    }
    env.mean_desired_headway = sum / static_cast<double>(hdvs.size());
  }
  return env;
}

void validate(const SafetyEnvelope& env) {
  if (!(env.disturbance_magnitude > 0.0) || !std::isfinite(env.disturbance_magnitude)) {
    throw std::invalid_argument("disturbance magnitude must be > 0");
  }
  if (!(env.headway_max > env.headway_min)) {
    throw std::invalid_argument("headway_max must exceed headway_min");
  }
  if (!(env.margin() > 0.0)) {
    throw std::invalid_argument("mean desired headway must lie strictly inside [headway_min, headway_max]");
  }
}

double head_to_tail_gain(double omega, const CavGains& cav, std::span<const HdvFrequencyModel> hdvs) {
  if (!(omega > 0.0)) {
    throw std::domain_error("head_to_tail_gain: omega must be > 0");
  }
  const double ta_sq = cav_gain_sq(omega, cav);
  if (ta_sq == 0.0) {
    return 0.0;
  }
  double log_sum = 0.5 * std::log(ta_sq);
  for (const auto& m : hdvs) {
    log_sum += 0.5 * std::log(hdv_gain_sq(omega, m));
  }
  return std::exp(log_sum);
}

PrefixCount count_prefix(double head, std::span<const double> log_gains) {
  PrefixCount out;
  if (head == -kInf) {
    out.degenerate = true;
    out.log_margin = -kInf;
    return out;
  }
  if (head > 0.0) {
    out.n = 0;
    out.head_exceeds = true;
    out.log_margin = head;
    return out;
  }
  double sum = head;
  for (std::size_t i = 0; i < log_gains.size(); ++i) {
    const double next = sum + log_gains[i];
    if (next > 0.0) {
      out.n = i;
      out.log_margin = sum;
      return out;
    }
    sum = next;
  }
  out.log_margin = sum;
  return out;
}

FrequencyBand stability_band(std::span<const HdvFrequencyModel> hdvs, const BandOptions& opts) {
  if (opts.mode == BandMode::full) {
    return {opts.full_lo, opts.full_hi};
  }
  const double w0 = platoon_critical_frequency(hdvs).omega;
  return {w0 * opts.lower_ratio, w0};
}

std::vector<double> band_grid(const FrequencyBand& band, std::size_t points) {
  if (!(band.lo > 0.0) || !(band.hi > band.lo) || points == 0) {
    throw std::invalid_argument("empty frequency band");
  }
  auto grid = log_grid(band.lo, band.hi, points + 2);
  return {grid.begin() + 1, grid.end() - 1};
}

StabilizabilitySearch::StabilizabilitySearch(std::vector<HdvFrequencyModel> hdvs, std::vector<double> omegas,
                                             std::size_t refine_iterations)
    : hdvs_(std::move(hdvs)), omegas_(std::move(omegas)), refine_iterations_(refine_iterations),
      stride_(hdvs_.size()) {
  if (omegas_.empty()) {
    throw std::invalid_argument("empty frequency band");
  }
  for (double w : omegas_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::domain_error("search frequencies must be finite and > 0");
    }
  }
  prefix_.resize(omegas_.size() * stride_);
  running_max_.resize(omegas_.size() * stride_);
  for (std::size_t k = 0; k < omegas_.size(); ++k) {
    double sum = 0.0;
    double peak = -kInf;
    for (std::size_t i = 0; i < stride_; ++i) {
      sum += 0.5 * std::log(hdv_gain_sq(omegas_[k], hdvs_[i]));
      peak = std::max(peak, sum);
      prefix_[k * stride_ + i] = sum;
      running_max_[k * stride_ + i] = peak;
    }
  }
}

double StabilizabilitySearch::prefix_log_gain(std::size_t omega_index, std::size_t n) const {
  if (n == 0) {
    return 0.0;
  }
  return prefix_.at(omega_index * stride_ + n - 1);
}

PrefixCount StabilizabilitySearch::count_from_table(std::size_t omega_index, double head) const {
  PrefixCount out;
  if (head == -kInf) {
    out.degenerate = true;
    out.log_margin = -kInf;
    return out;
  }
  if (head > 0.0) {
    out.n = 0;
    out.head_exceeds = true;
    out.log_margin = head;
    return out;
  }
  // First m with head + P[m] > 0 is the first m whose running max exceeds -head.
  const auto row = std::span<const double>(running_max_).subspan(omega_index * stride_, stride_);
  const auto it = std::upper_bound(row.begin(), row.end(), -head);
  if (it == row.end()) {
    out.log_margin = head + prefix_log_gain(omega_index, stride_);
    return out;
  }
  const auto n = static_cast<std::size_t>(it - row.begin());
  out.n = n;
  out.log_margin = head + prefix_log_gain(omega_index, n);
  return out;
}

PrefixCount StabilizabilitySearch::count_at(double omega, double head) const {
  std::vector<double> logs(hdvs_.size());
  for (std::size_t i = 0; i < hdvs_.size(); ++i) {
    logs[i] = 0.5 * std::log(hdv_gain_sq(omega, hdvs_[i]));
  }
  return count_prefix(head, logs);
}

PrefixCount StabilizabilitySearch::stable_at(std::size_t omega_index, const CavGains& cav) const {
  return count_from_table(omega_index, log_abs_cav(omegas_.at(omega_index), cav));
}

PrefixCount StabilizabilitySearch::safe_at(std::size_t omega_index, const CavGains& cav, double eta) const {
  const double w = omegas_.at(omega_index);
  return count_from_table(omega_index, log_abs_one_minus_cav(w, cav) - std::log(eta));
}

template <typename Head>
StabilizableResult StabilizabilitySearch::minimize(Head&& head) const {
  const std::size_t population = hdvs_.size();
  StabilizableResult result;
  result.population_size = population;

  std::size_t best_index = 0;
  PrefixCount best;
  bool have_best = false;
  for (std::size_t k = 0; k < omegas_.size(); ++k) {
    const PrefixCount c = count_from_table(k, head(omegas_[k]));
    ++result.evaluated_points;
    result.degenerate_points += c.degenerate ? 1 : 0;
    result.head_exceeds_points += c.head_exceeds ? 1 : 0;
    if (!have_best || binds_tighter(c, best, population)) {
      best = c;
      best_index = k;
      have_best = true;
    }
  }
  double best_omega = omegas_[best_index];

  if (refine_iterations_ > 0 && best.n.has_value() && omegas_.size() > 1) {
    double lo = omegas_[best_index == 0 ? 0 : best_index - 1];
    double hi = omegas_[std::min(best_index + 1, omegas_.size() - 1)];
    for (std::size_t it = 0; it < refine_iterations_; ++it) {
      const double left = std::sqrt(lo * best_omega);
      const double right = std::sqrt(best_omega * hi);
      const PrefixCount cl = count_at(left, head(left));
      const PrefixCount cr = count_at(right, head(right));
      result.evaluated_points += 2;
      result.degenerate_points += (cl.degenerate ? 1 : 0) + (cr.degenerate ? 1 : 0);
      result.head_exceeds_points += (cl.head_exceeds ? 1 : 0) + (cr.head_exceeds ? 1 : 0);
      if (binds_tighter(cl, best, population) && !binds_tighter(cr, cl, population)) {
        hi = best_omega;
        best_omega = left;
        best = cl;
      } else if (binds_tighter(cr, best, population)) {
        lo = best_omega;
        best_omega = right;
        best = cr;
      } else {
        lo = left;
        hi = right;
      }
    }
  }

  result.n_star = best.n;
  result.binding_omega = best_omega;
  result.log_margin_at_n = best.log_margin;
  return result;
}

StabilizableResult StabilizabilitySearch::stable(const CavGains& cav) const {
  return minimize([&](double w) { return log_abs_cav(w, cav); });
}

StabilizableResult StabilizabilitySearch::safe(const CavGains& cav, double eta) const {
  if (!(eta > 0.0)) {
    throw std::domain_error("eta must be > 0");
  }
  const double log_eta = std::log(eta);
  return minimize([&](double w) { return log_abs_one_minus_cav(w, cav) - log_eta; });
}

StabilizabilitySearch make_band_search(std::span<const HdvFrequencyModel> hdvs, const BandOptions& opts) {
  auto band = stability_band(hdvs, opts);
  return StabilizabilitySearch({hdvs.begin(), hdvs.end()}, band_grid(band, opts.points), opts.refine_iterations);
}

StabilizableResult max_stabilizable(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                    const BandOptions& opts) {
  return make_band_search(hdvs, opts).stable(cav);
}

StabilizableResult max_safe_stabilizable(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                         const SafetyEnvelope& env, const BandOptions& opts) {
  validate(env);
  return make_band_search(hdvs, opts).safe(cav, env.eta());
}

PlatoonObjective overall_objective(const CavGains& cav, std::span<const HdvFrequencyModel> hdvs,
                                   const SafetyEnvelope& env, const BandOptions& opts) {
  validate(env);
  if (hdvs.empty() || (opts.mode == BandMode::below_critical && all_stable(hdvs))) {
    return {unbounded_result(hdvs.size()), unbounded_result(hdvs.size())};
  }
  BandOptions effective = opts;
  if (opts.mode == BandMode::below_critical) {
    const bool has_band = std::any_of(hdvs.begin(), hdvs.end(), [](const HdvFrequencyModel& m) {
      return hdv_stability_verdict(m).critical_omega.has_value();
    });
    if (!has_band) {
      effective.mode = BandMode::full;
    }
  }
  const auto search = make_band_search(hdvs, effective);
  return {search.stable(cav), search.safe(cav, env.eta())};
}

} // namespace mixflow
