#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "commtraj/channel.hpp"
#include "commtraj/errors.hpp"
#include "support.hpp"

using namespace commtraj;

namespace {

RateLadder qam_ladder() { return RateLadder::qam({2, 4, 6}, 1e-3); }

double db(double x) { return 10.0 * std::log10(x); }

// SNR at which (4/k)(1 - 1/sqrt(M)) Q(sqrt(3 s / (M - 1))) equals the target.
double threshold_oracle(int k, double ber) {
  const double M = std::pow(2.0, k);
  const double tail = ber / ((4.0 / k) * (1.0 - 1.0 / std::sqrt(M)));
  const double x = boost::math::quantile(boost::math::complement(boost::math::normal(), tail));
  return x * x * (M - 1.0) / 3.0;
}

double mc_expected_rate(double d, const ChannelParams& ch, const RateLadder& ladder,
                        int draws, std::uint64_t seed, double* stderr_out) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(ch.shadow_var_db));
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double h = std::pow(10.0, g(rng) / 20.0);
    const double r = ladder.rate_for_snr(snr(Vec2(d, 0.0), h, ch));
    sum += r;
    sum2 += r * r;
  }
  const double mean = sum / draws;
  *stderr_out = std::sqrt((sum2 / draws - mean * mean) / (draws - 1.0));
  return mean;
}

}  // namespace

TEST_CASE("snr plug-in values") {
  const ChannelParams ch;
  CHECK(snr({100.0, 0.0}, 1.0, ch) == doctest::Approx(1.0));
  CHECK(snr({0.0, 1.0}, 1.0, ch) == doctest::Approx(1e4));
  CHECK(snr({0.0, 10.0}, 2.0, ch) == doctest::Approx(400.0));
  CHECK_THROWS_AS(snr({0.5, 0.0}, 1.0, ch), ParameterError);
  CHECK_THROWS_AS(snr({0.0, 0.0}, 1.0, ch), ParameterError);
}

TEST_CASE("lognormal shadowing moment") {
  // 10 log10(h^2) ~ N(0, s2): E[h^2] = exp((ln 10 / 10)^2 s2 / 2).
  ChannelParams ch;
  ch.shadow_var_db = 4.0;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 2.0);
  const int n = 100000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += snr({30.0, 0.0}, std::pow(10.0, g(rng) / 20.0), ch);
  mean /= n;
  const double c = std::log(10.0) / 10.0;
  const double oracle = snr({30.0, 0.0}, 1.0, ch) * std::exp(c * c * 4.0 / 2.0);
  CHECK(mean == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("QAM thresholds") {
  const auto g = qam_thresholds(1e-3, {2, 4, 6});
  REQUIRE(g.size() == 3);
  CHECK(db(g[0]) == doctest::Approx(9.8).epsilon(0.005));
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(threshold_oracle(2 * static_cast<int>(i) + 2, 1e-3)).epsilon(1e-9));
  }
  CHECK(g[0] < g[1]);
  CHECK(g[1] < g[2]);

  // The approximation is already below 1/2 at zero SNR for these orders.
  for (double t : qam_thresholds(0.5, {2, 4, 6})) CHECK(t == 0.0);

  CHECK_THROWS_AS(qam_thresholds(0.0, {2}), ParameterError);
  CHECK_THROWS_AS(qam_thresholds(0.7, {2}), ParameterError);
  // Equal orders cannot give strictly increasing thresholds.
  CHECK_THROWS_AS(qam_thresholds(1e-3, {4, 4}), ConsistencyError);
}

TEST_CASE("rate ladder") {
  const RateLadder l = qam_ladder();
  CHECK(l.rates == std::vector<double>{0, 2, 4, 6});
  CHECK(l.rate_for_snr(0.0) == 0.0);
  CHECK(l.rate_for_snr(l.thresholds[1]) == 2.0);
  CHECK(l.rate_for_snr(std::nextafter(l.thresholds[2], 0.0)) == 2.0);
  CHECK(l.rate_for_snr(1e9) == 6.0);

  RateLadder bad = l;
  bad.tx_time = 2.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = l;
  bad.rates[2] = 1.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("expected rate") {
  const ChannelParams ch;
  const RateLadder l = qam_ladder();

  SUBCASE("deterministic channel is a step function") {
    ChannelParams flat = ch;
    flat.shadow_var_db = 0.0;
    const double r1 = switch_radius(l.thresholds[1], flat);
    const double r2 = switch_radius(l.thresholds[2], flat);
    CHECK(expected_rate_at_distance(0.5 * (r1 + r2), flat, l) == 2.0);
    CHECK(expected_rate_at_distance(r1 * 1.01, flat, l) == 0.0);
  }

  SUBCASE("vanishes far away") {
    CHECK(expected_rate_at_distance(1e4, ch, l) < 1e-12);
    CHECK(expected_rate_at_distance(1.0, ch, l) == doctest::Approx(6.0));
  }

  SUBCASE("monotone in distance") {
    double prev = expected_rate_at_distance(1.0, ch, l);
    for (double d = 1.25; d <= 150.0; d += 0.25) {
      const double v = expected_rate_at_distance(d, ch, l);
      CHECK(v <= prev);
      prev = v;
    }
  }

  SUBCASE("matches Monte Carlo") {
    for (double d : {12.0, 25.0, 31.0, 33.0}) {
      double se = 0.0;
      const double mc = mc_expected_rate(d, ch, l, 200000, 31, &se);
      const double exact = expected_rate_at_distance(d, ch, l);
      CAPTURE(d);
      CHECK(std::abs(mc - exact) <= std::max(3.0 * se, 1e-12));
      if (exact > 0.5) CHECK(mc == doctest::Approx(exact).epsilon(0.005));
    }
  }

  SUBCASE("depends only on the distance to the access point") {
    ChannelParams off = ch;
    off.ap_position = Vec2(3.0, -4.0);
    for (int k = 0; k < 8; ++k) {
      const double a = k * std::numbers::pi / 4;
      const Vec2 p = off.ap_position + 20.0 * Vec2(std::cos(a), std::sin(a));
      CHECK(expected_rate(p, off, l) == doctest::Approx(expected_rate_at_distance(20.0, ch, l)));
    }
  }

  CHECK_THROWS_AS(expected_rate_at_distance(0.2, ch, l), ParameterError);
}

TEST_CASE("quantizer") {
  const ChannelParams ch;
  const RateLadder l = qam_ladder();

  SUBCASE("structure of the reference map") {
    const QuantizedRateMap& m = testutil::reference().map;
    REQUIRE(m.size() == 6);
    CHECK(m.radii.size() == 5);
    CHECK(m.levels.front() == 0.0);
    CHECK(m.levels.back() == l.max_rate());
    for (size_t j = 1; j < m.radii.size(); ++j) CHECK(m.radii[j] < m.radii[j - 1]);
    for (size_t j = 1; j < m.levels.size(); ++j) CHECK(m.levels[j] > m.levels[j - 1]);
    CHECK_FALSE(m.duplicated_levels);
    CHECK(m.domain_radius == doctest::Approx(80.0));
    CHECK(region_radius(m, 1) == m.radii.front());
    CHECK(region_radius(m, 5) == m.radii.back());
    CHECK_THROWS_AS(region_radius(m, 0), ParameterError);
    CHECK_THROWS_AS(region_radius(m, 6), ParameterError);
  }

  SUBCASE("levels and pieces") {
    const QuantizedRateMap& m = testutil::reference().map;
    CHECK(m.level_at_distance(1e3) == 1);
    CHECK(m.level_at_distance(0.0) == 6);
    CHECK(m.level_at_distance(m.radii[0]) == 2);
    CHECK(m.level_at_distance(std::nextafter(m.radii[0], 1e9)) == 1);
    int pieces = 1;
    for (double d = 0.01; d < 80.0; d += 0.01) {
      if (m.value_at_distance(d) != m.value_at_distance(d - 0.01)) ++pieces;
    }
    CHECK(pieces == 6);
  }

  SUBCASE("interior levels are ring means of the expected rate") {
    // Stationarity in each free level: it equals the average of E[R] over
    // its ring.
    const QuantizedRateMap& m = testutil::reference().map;
    for (int j = 2; j <= 5; ++j) {
      const double outer = m.radii[j - 2], inner = m.radii[j - 1];
      const double mean = testutil::integrate(
                              [&](double d) { return expected_rate_at_distance(d, ch, l); },
                              inner, outer) /
                          (outer - inner);
      CAPTURE(j);
      CHECK(m.rate(j) == doctest::Approx(mean).epsilon(2e-3));
    }
  }

  SUBCASE("error is non-increasing in Q") {
    double prev = std::numeric_limits<double>::infinity();
    for (int q = 2; q <= 8; ++q) {
      const auto m = quantize_expected_rate(ch, l, q, 80.0);
      CHECK(m.error <= prev * (1 + 1e-12));
      prev = m.error;
    }
  }

  SUBCASE("deterministic channel recovers the switch radii") {
    ChannelParams flat = ch;
    flat.shadow_var_db = 0.0;
    const auto m = quantize_expected_rate(flat, l, 4, 80.0);
    for (int j = 1; j <= 3; ++j) {
      CHECK(m.radii[j - 1] == doctest::Approx(switch_radius(l.thresholds[j], flat)).epsilon(1e-4));
      CHECK(m.rate(j + 1) == doctest::Approx(l.rates[j]).epsilon(1e-3));
    }
    CHECK_FALSE(m.duplicated_levels);
  }

  SUBCASE("more levels than plateaus are flagged") {
    ChannelParams flat = ch;
    flat.shadow_var_db = 0.0;
    CHECK(quantize_expected_rate(flat, l, 6, 80.0).duplicated_levels);
  }

  SUBCASE("seeded and reproducible") {
    QuantizerConfig cfg;
    cfg.seed = 99;
    const auto a = quantize_expected_rate(ch, l, 5, 80.0, cfg);
    const auto b = quantize_expected_rate(ch, l, 5, 80.0, cfg);
    CHECK(a.radii == b.radii);
    CHECK(a.levels == b.levels);
  }

  CHECK_THROWS_AS(quantize_expected_rate(ch, l, 1, 80.0), ParameterError);
  CHECK_THROWS_AS(quantize_expected_rate(ch, l, 3, 0.0), ParameterError);
}
