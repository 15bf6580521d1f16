#include "mixflow/population.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace mixflow {

namespace {

// Rejection sampling gives up once more than 99% of at least 100 attempts
// fell outside the bounds.
double draw_truncated(std::mt19937_64& rng, const NormalDist& dist, const Bounds& bounds, const char* name) {
  std::normal_distribution<double> normal(dist.mean, dist.sd);
  std::size_t attempts = 0;
  while (true) {
    const double x = dist.sd > 0.0 ? normal(rng) : dist.mean;
    ++attempts;
    if (bounds.contains(x)) {
      return x;
    }
    if (attempts >= 100) {
      throw std::runtime_error(std::string("sample_population: rejection rate above 99% for ") + name +
                               " (degenerate truncation bounds)");
    }
  }
}

} // namespace

PopulationSpec default_population_spec(double vehicle_length) {
  PopulationSpec spec;
  spec.headway_bounds = {vehicle_length + 5.0, 60.0};
  return spec;
}

void validate(const PopulationSpec& spec, double vehicle_length) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(spec.alpha.sd >= 0.0 && spec.beta.sd >= 0.0 && spec.desired_headway.sd >= 0.0,
          "population standard deviations must be >= 0");
  require(spec.alpha_bounds.lo > 0.0 && spec.alpha_bounds.hi >= spec.alpha_bounds.lo,
          "alpha bounds must keep alpha > 0");
  require(spec.beta_bounds.lo >= 0.0 && spec.beta_bounds.hi >= spec.beta_bounds.lo,
          "beta bounds must keep beta >= 0");
  require(spec.headway_bounds.lo > vehicle_length && spec.headway_bounds.hi >= spec.headway_bounds.lo,
          "desired headway bounds must stay above the vehicle length");
  require(spec.delay_coefficient >= 0.0 && std::isfinite(spec.delay_coefficient),
          "delay coefficient must be >= 0");
  require(spec.lambda2 >= 0.0, "lambda2 must be >= 0");
  require(spec.v_star > 0.0, "v_star must be > 0");
}

double delay_from_sensitivity(double alpha, double c_tau) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::domain_error("delay_from_sensitivity: alpha must be > 0");
  }
  return c_tau / alpha;
}

std::vector<HdvParams> sample_population(const PopulationSpec& spec, double vehicle_length) {
  validate(spec, vehicle_length);
  std::mt19937_64 rng(spec.seed);
  std::vector<HdvParams> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    HdvParams p;
    p.alpha = draw_truncated(rng, spec.alpha, spec.alpha_bounds, "alpha");
    p.beta = draw_truncated(rng, spec.beta, spec.beta_bounds, "beta");
    p.desired_headway = draw_truncated(rng, spec.desired_headway, spec.headway_bounds, "desired headway");
    p.tau = delay_from_sensitivity(p.alpha, spec.delay_coefficient);
    p.lambda2 = spec.lambda2;
    p.lambda3 = default_lambda3(p.desired_headway, p.lambda2, spec.v_star);
    out.push_back(p);
  }
  return out;
}

std::vector<HdvParams> homogeneous_baseline(const std::vector<HdvParams>& population) {
  if (population.empty()) {
    return {};
  }
  HdvParams mean{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& p : population) {
    mean.alpha += p.alpha;
    mean.beta += p.beta;
    mean.desired_headway += p.desired_headway;
    mean.lambda2 += p.lambda2;
    mean.lambda3 += p.lambda3;
  }
  const double n = static_cast<double>(population.size());
  mean.alpha /= n;
  mean.beta /= n;
  mean.desired_headway /= n;
  mean.lambda2 /= n;
  mean.lambda3 /= n;
  mean.tau = 0.0;
  return std::vector<HdvParams>(population.size(), mean);
}

} // namespace mixflow
