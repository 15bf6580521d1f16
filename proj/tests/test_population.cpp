#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixflow/population.hpp"

using namespace mixflow;

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

template <typename Get>
Moments moments(const std::vector<HdvParams>& pop, Get get) {
  Moments m;
  for (const auto& p : pop) m.mean += get(p);
  m.mean /= static_cast<double>(pop.size());
  for (const auto& p : pop) m.sd += (get(p) - m.mean) * (get(p) - m.mean);
  m.sd = std::sqrt(m.sd / static_cast<double>(pop.size() - 1));
  return m;
}

} // namespace

TEST_CASE("delay from sensitivity") {
  CHECK(delay_from_sensitivity(0.04, 1.0 / 2500.0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(delay_from_sensitivity(0.04, 0.04) == doctest::Approx(1.0).epsilon(1e-15));
  for (double a : {0.01, 0.037, 0.04, 0.125, 0.3}) {
    CHECK(delay_from_sensitivity(2.0 * a, 0.0004) == delay_from_sensitivity(a, 0.0004) / 2.0);
  }
  CHECK_THROWS_AS(delay_from_sensitivity(0.0, 0.0004), std::domain_error);
}

TEST_CASE("empty and deterministic draws") {
  PopulationSpec spec;
  spec.count = 0;
  CHECK(sample_population(spec).empty());

  spec.count = 50;
  const auto a = sample_population(spec);
  const auto b = sample_population(spec);
  CHECK(a == b);
  spec.seed = 43;
  CHECK(sample_population(spec) != a);
}

TEST_CASE("prefix stability of the stream") {
  PopulationSpec spec;
  spec.count = 10;
  const auto small = sample_population(spec);
  spec.count = 40;
  const auto large = sample_population(spec);
  CHECK(std::equal(small.begin(), small.end(), large.begin()));
}

TEST_CASE("sample means within three standard errors") {
  PopulationSpec spec;
  spec.count = 1000;
  const auto pop = sample_population(spec);
  const double n = std::sqrt(1000.0);
  CHECK(std::abs(moments(pop, [](const HdvParams& p) { return p.alpha; }).mean - 0.04) <= 3 * 0.004 / n);
  CHECK(std::abs(moments(pop, [](const HdvParams& p) { return p.beta; }).mean - 0.185) <= 3 * 0.018 / n);
  CHECK(std::abs(moments(pop, [](const HdvParams& p) { return p.desired_headway; }).mean - 30.125) <= 3 * 3.0 / n);
}

TEST_CASE("distribution fidelity over ten thousand draws") {
  PopulationSpec spec;
  spec.count = 10000;
  spec.seed = 1234;
  const auto pop = sample_population(spec);
  const double n = 10000.0;
  auto check = [&](Moments m, double mean, double sd) {
    CHECK(std::abs(m.mean - mean) <= 5 * sd / std::sqrt(n));
    CHECK(std::abs(m.sd - sd) <= 5 * sd / std::sqrt(2 * (n - 1)));
  };
  check(moments(pop, [](const HdvParams& p) { return p.alpha; }), 0.04, 0.004);
  check(moments(pop, [](const HdvParams& p) { return p.beta; }), 0.185, 0.018);
  check(moments(pop, [](const HdvParams& p) { return p.desired_headway; }), 30.125, 3.0);
}

TEST_CASE("every draw satisfies the driver invariants") {
  PopulationSpec spec;
  spec.count = 100000;
  spec.seed = 9;
  // Wide spreads so the truncation bounds are actually exercised.
  spec.alpha.sd = 0.05;
  spec.beta.sd = 0.2;
  spec.desired_headway.sd = 15.0;
  const auto pop = sample_population(spec);
  std::size_t bad = 0;
  for (const auto& p : pop) {
    try {
      validate(p);
    } catch (const std::invalid_argument&) {
      ++bad;
    }
    bad += !spec.alpha_bounds.contains(p.alpha) || !spec.beta_bounds.contains(p.beta) ||
           !spec.headway_bounds.contains(p.desired_headway);
    bad += p.tau != delay_from_sensitivity(p.alpha, spec.delay_coefficient);
    bad += p.lambda3 != default_lambda3(p.desired_headway, spec.lambda2, spec.v_star);
  }
  CHECK(bad == 0);
}

TEST_CASE("degenerate truncation is an error") {
  PopulationSpec spec;
  spec.alpha_bounds = {0.5, 0.6};
  CHECK_THROWS_AS(sample_population(spec), std::runtime_error);
  spec = PopulationSpec{};
  spec.alpha_bounds = {0.0, 0.2};
  CHECK_THROWS_AS(sample_population(spec), std::invalid_argument);
}

TEST_CASE("default bounds follow the vehicle length") {
  CHECK(default_population_spec(5.0).headway_bounds.lo == 10.0);
  CHECK(default_population_spec(7.0).headway_bounds.lo == 12.0);
}

TEST_CASE("homogeneous baseline") {
  PopulationSpec spec;
  spec.count = 25;
  const auto pop = sample_population(spec);
  const auto base = homogeneous_baseline(pop);
  REQUIRE(base.size() == pop.size());
  const auto m = moments(pop, [](const HdvParams& p) { return p.alpha; });
  for (const auto& p : base) {
    CHECK(p == base.front());
    CHECK(p.tau == 0.0);
  }
  CHECK(base.front().alpha == doctest::Approx(m.mean).epsilon(1e-14));
  CHECK(homogeneous_baseline({}).empty());
}
