#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "actdist/distribution.hpp"
#include "actdist/error.hpp"
#include "test_support.hpp"

using namespace actdist;
using actdist::testing::make_series;

namespace {

// inf{x : F_n(x) >= t}, scanning candidate values and counting directly.
double brute_force_quantile(const std::vector<double>& readings, double t) {
  std::vector<double> candidates = readings;
  std::sort(candidates.begin(), candidates.end());
  for (double x : candidates) {
    const auto below = std::count_if(readings.begin(), readings.end(), [&](double r) { return r <= x; });
    if (static_cast<double>(below) / static_cast<double>(readings.size()) >= t) return x;
  }
  return candidates.back();
}

std::vector<double> random_readings(std::mt19937_64& rng, std::size_t n, double p_zero) {
  std::bernoulli_distribution zero(p_zero);
  std::lognormal_distribution<double> active(5.0, 1.0);
  std::vector<double> r(n);
  for (auto& x : r) x = zero(rng) ? 0.0 : std::round(active(rng));
  return r;
}

}  // namespace

TEST_CASE("inactive_proportion") {
  CHECK(inactive_proportion(make_series({0, 0, 5, 0, 3})) == doctest::Approx(0.6));
  CHECK(inactive_proportion(make_series({2, 7})) == 0.0);
  CensorSpec c;
  c.lower = 100;
  CHECK(inactive_proportion(make_series({0, 50, 150}), c) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_WITH_AS(inactive_proportion(make_series({})), "empty series", Error);
}

TEST_CASE("censor_series") {
  CensorSpec lo;
  lo.lower = 100;
  CHECK(censor_series(make_series({0, 50, 150}), lo).readings == std::vector<double>{100, 100, 150});
  CensorSpec hi;
  hi.upper = 3500;
  CHECK(censor_series(make_series({4000, 200}), hi).readings == std::vector<double>{3500, 200});
  CHECK(censor_series(make_series({0, 5}), {}).readings == std::vector<double>{0, 5});

  CensorSpec bad;
  bad.lower = 10;
  bad.upper = 10;
  CHECK_THROWS_WITH_AS(censor_series(make_series({1}), bad), "invalid censor bounds", Error);

  SUBCASE("metadata is untouched") {
    auto s = make_series({0, 4000}, "abc", 2.5);
    s.covariates["age"] = 70;
    CensorSpec both{50.0, 3500.0};
    const auto out = censor_series(s, both);
    CHECK(out.timestamps == s.timestamps);
    CHECK(out.survey_weight == 2.5);
    CHECK(out.covariates == s.covariates);
  }
  SUBCASE("idempotent") {
    std::mt19937_64 rng(3);
    CensorSpec both{100.0, 3500.0};
    for (int rep = 0; rep < 50; ++rep) {
      const auto s = make_series(random_readings(rng, 200, 0.4));
      const auto once = censor_series(s, both);
      CHECK(censor_series(once, both).readings == once.readings);
    }
  }
}

TEST_CASE("empirical_quantiles") {
  const auto q = empirical_quantiles(make_series({0, 0, 2, 4}), 4);
  CHECK(std::vector<double>(q.values().begin(), q.values().end()) == std::vector<double>{0, 0, 2, 4});
  CHECK(q.level(0) == 0.125);
  CHECK(q.level(3) == 0.875);

  const auto c = empirical_quantiles(make_series({7, 7, 7, 7, 7}), 9);
  for (double v : c.values()) CHECK(v == 7);
  const auto one = empirical_quantiles(make_series({1}), 3);
  for (double v : one.values()) CHECK(v == 1);

  CHECK_THROWS_AS(empirical_quantiles(make_series({1, 2}), 1), Error);

  SUBCASE("matches brute-force generalized inverse") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 60; ++rep) {
      const std::size_t n = 1 + rng() % 40;
      const std::size_t m = 2 + rng() % 50;
      const auto r = random_readings(rng, n, 0.5);
      const auto grid = empirical_quantiles(r, m);
      for (std::size_t k = 0; k < m; ++k) {
        CHECK(grid[k] == brute_force_quantile(r, grid.level(k)));
      }
    }
  }
}

TEST_CASE("silverman_bandwidth") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(silverman_bandwidth(x) == doctest::Approx(0.9735846228506357).epsilon(1e-12));
  std::vector<double> scaled;
  for (double v : x) scaled.push_back(3.5 * v);
  CHECK(silverman_bandwidth(scaled) == doctest::Approx(3.5 * silverman_bandwidth(x)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(silverman_bandwidth(std::vector<double>{1, 1, 1}), "degenerate active sample",
                       Error);
  CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>{4}), Error);
  // Zero IQR with positive sd falls back to sd.
  CHECK(silverman_bandwidth(std::vector<double>{1, 1, 1, 1, 1, 9}) > 0.0);
}

TEST_CASE("kde_active") {
  SUBCASE("hand-evaluated single point") {
    const auto s = make_series({0, 10});
    DensityGridSpec grid;
    grid.lo = 5;
    grid.hi = 15;
    grid.points = 11;
    const auto d = kde_active(s, {}, 1.0, grid);
    CHECK(d.abscissae[5] == doctest::Approx(10.0));
    CHECK(d.ordinates[5] == doctest::Approx(0.19947114020071635).epsilon(1e-12));
  }
  SUBCASE("mass equals the active probability") {
    // Active readings well away from zero: the Gaussian kernel puts no
    // appreciable mass below the origin, where the curve is not evaluated.
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      auto r = random_readings(rng, 500, 0.3);
      for (double& x : r) x = x > 0 ? 300 + x : 0.0;
      const auto s = make_series(r);
      DensityGridSpec grid;
      grid.points = 4000;
      const auto d = kde_active(s, {}, std::nullopt, grid);
      CHECK(std::abs(d.integral() - (1.0 - inactive_proportion(s))) < 1e-3);
      CHECK(std::all_of(d.abscissae.begin(), d.abscissae.end(), [](double x) { return x > 0; }));
    }
  }
  SUBCASE("depends only on the multiset of readings") {
    std::mt19937_64 rng(8);
    auto r = random_readings(rng, 300, 0.4);
    const auto a = kde_active(make_series(r));
    std::shuffle(r.begin(), r.end(), rng);
    const auto b = kde_active(make_series(r));
    CHECK(a.abscissae == b.abscissae);
    for (std::size_t k = 0; k < a.ordinates.size(); ++k) {
      CHECK(a.ordinates[k] == doctest::Approx(b.ordinates[k]).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate active sample falls back to unit bandwidth with a warning") {
    std::vector<std::string> warnings;
    auto prev = set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
    const auto d = kde_active(make_series({0, 0, 30, 30}));
    set_warning_handler(prev);
    CHECK(d.bandwidth == 1.0);
    CHECK(warnings.size() == 1);
  }
  CHECK_THROWS_WITH_AS(kde_active(make_series({0, 0})), "all readings inactive", Error);
  CHECK_THROWS_AS(kde_active(make_series({1, 2}), {}, -1.0), Error);
}

TEST_CASE("build_mixed") {
  const auto d = build_mixed(make_series({0, 0, 2, 4}), {}, 4);
  CHECK(d.p_inactive == 0.5);
  CHECK(std::vector<double>(d.quantiles.values().begin(), d.quantiles.values().end()) ==
        std::vector<double>{0, 0, 2, 4});

  const auto zeros = build_mixed(make_series({0, 0, 0}), {}, 10, true);
  CHECK(zeros.p_inactive == 1.0);
  for (double v : zeros.quantiles.values()) CHECK(v == 0.0);
  CHECK_FALSE(zeros.active_density.has_value());

  CHECK(build_mixed(make_series({3, 1, 2}), {}, 10).p_inactive == 0.0);

  const auto dens = build_mixed(make_series({0, 1, 5, 9, 14}), {}, 10, true);
  REQUIRE(dens.active_density.has_value());

  SUBCASE("atom and monotonicity invariants") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 100; ++rep) {
      CensorSpec c;
      if (rep % 3 == 1) c.lower = 100;
      if (rep % 3 == 2) c.upper = 2000;
      const std::size_t m = 2 + rng() % 200;
      const auto s = make_series(random_readings(rng, 1 + rng() % 300, 0.5));
      const auto mix = build_mixed(s, c, m);
      for (std::size_t k = 0; k + 1 < m; ++k) CHECK(mix.quantiles[k] <= mix.quantiles[k + 1]);
      for (std::size_t k = 0; k < m; ++k) {
        if (mix.quantiles.level(k) <= mix.p_inactive - 0.5 / static_cast<double>(m)) {
          CHECK(mix.quantiles[k] == c.atom());
        }
      }
    }
  }
  SUBCASE("permutation invariance") {
    std::mt19937_64 rng(4);
    auto r = random_readings(rng, 400, 0.5);
    const auto a = build_mixed(make_series(r), {}, 100);
    std::shuffle(r.begin(), r.end(), rng);
    const auto b = build_mixed(make_series(r), {}, 100);
    CHECK(a.p_inactive == b.p_inactive);
    CHECK(a.quantiles == b.quantiles);
  }
  CHECK_THROWS_AS(build_mixed(make_series({-1.0, 2.0})), Error);
}

TEST_CASE("tac_per_day") {
  CHECK(tac_per_day(make_series(std::vector<double>(2880, 1.0))) == doctest::Approx(1440.0));
  CHECK(tac_per_day(make_series(std::vector<double>(100, 0.0))) == 0.0);
  CHECK(tac_per_day(make_series(std::vector<double>(1440, 2.0))) == doctest::Approx(2880.0));
  CHECK_THROWS_WITH_AS(tac_per_day(make_series({5})), "span undefined", Error);

  SUBCASE("recoverable from the distribution") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 20; ++rep) {
      const auto r = random_readings(rng, 1440, 0.5);
      const auto s = make_series(r);
      const double tac = tac_per_day(s);
      double sum = 0.0;
      for (double v : r) sum += v;
      CHECK(tac == doctest::Approx(sum / 1440.0 * 1440.0).epsilon(1e-12));
      // Grid mean matches the sample mean when m is a multiple of n.
      const auto exact = empirical_quantiles(r, 1440 * 2);
      CHECK(exact.mean() * 1440.0 == doctest::Approx(tac).epsilon(1e-10));
      // Coarser grids stay within the O(range / m) discretization error.
      const std::size_t m = 500;
      const auto coarse = empirical_quantiles(r, m);
      const double range = *std::max_element(r.begin(), r.end());
      CHECK(std::abs(coarse.mean() * 1440.0 - tac) <= 1440.0 * range / static_cast<double>(m));
    }
  }
}

TEST_CASE("validation") {
  auto s = make_series({1, 2});
  s.timestamps = {1, 1};
  CHECK_THROWS_AS(s.validate(), Error);
  s = make_series({1, 2});
  s.survey_weight = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS(QuantileGrid({2, 1}), Error);
  CHECK_THROWS_AS(QuantileGrid({-1, 1}), Error);
  CHECK_THROWS_AS(QuantileGrid(std::vector<double>{}), Error);
}
