#include <doctest.h>

#include <cmath>

#include "actdist/datagen.hpp"
#include "actdist/error.hpp"
#include "actdist/survey.hpp"

using namespace actdist;

namespace {

PopulationSpec three_strata(std::size_t n, std::size_t minutes, std::uint64_t seed) {
  PopulationSpec spec;
  spec.population_size = n;
  spec.minutes = minutes;
  spec.seed = seed;
  StratumSpec a;
  a.name = "low";
  a.proportion = 0.5;
  a.inactivity = {0.7, 0.9};
  a.age = {68, 75};
  a.mortality_rate = 0.3;
  StratumSpec b = a;
  b.name = "mid";
  b.proportion = 0.3;
  b.inactivity = {0.4, 0.6};
  b.law = IntensityLaw::gamma;
  b.age = {76, 80};
  StratumSpec c = a;
  c.name = "high";
  c.proportion = 0.2;
  c.inactivity = {0.1, 0.3};
  c.age = {81, 85};
  spec.strata = {a, b, c};
  return spec;
}

}  // namespace

TEST_CASE("allocate") {
  CHECK(allocate(1000, {0.5, 0.5}) == std::vector<std::size_t>{500, 500});
  CHECK(allocate(10, {1, 1, 1}) == std::vector<std::size_t>{4, 3, 3});
  CHECK(allocate(7, {0.1, 0.6, 0.3}) == std::vector<std::size_t>{1, 4, 2});
  CHECK(allocate(0, {1, 2}) == std::vector<std::size_t>{0, 0});
  CHECK_THROWS_AS(allocate(5, {}), Error);
}

TEST_CASE("simulate_population") {
  const auto spec = three_strata(200, 60, 7);
  const auto pop = simulate_population(spec);
  REQUIRE(pop.subjects.size() == 200);
  CHECK(pop.stratum_sizes == std::vector<std::size_t>{100, 60, 40});
  CHECK(pop.subjects.front().subject_id == "S1");
  CHECK(pop.subjects.back().labels.at("stratum") == "high");
  for (std::size_t i = 0; i < pop.subjects.size(); ++i) {
    const auto& s = pop.subjects[i];
    CHECK(s.readings.size() == 60);
    CHECK_NOTHROW(s.validate());
    const double age = s.covariates.at("age");
    CHECK(age == std::floor(age));
    const auto& st = spec.strata[pop.stratum[i]];
    CHECK(age >= st.age.lo);
    CHECK(age <= st.age.hi);
    CHECK(s.covariates.at("inactivity_rate") >= st.inactivity.lo);
    CHECK(s.covariates.at("inactivity_rate") <= st.inactivity.hi);
  }
  double sum = 0.0;
  for (const auto& s : pop.subjects) sum += s.covariates.at("age");
  CHECK(pop.true_means.at("age") == doctest::Approx(sum / 200.0).epsilon(1e-14));

  SUBCASE("deterministic from the seed") {
    const auto again = simulate_population(spec);
    for (std::size_t i = 0; i < pop.subjects.size(); ++i) {
      CHECK(again.subjects[i].readings == pop.subjects[i].readings);
      CHECK(again.subjects[i].covariates == pop.subjects[i].covariates);
    }
    auto other = spec;
    other.seed = 8;
    CHECK(simulate_population(other).subjects[0].readings != pop.subjects[0].readings);
  }
  SUBCASE("fully inactive stratum") {
    PopulationSpec idle;
    idle.population_size = 5;
    idle.minutes = 100;
    StratumSpec s;
    s.inactivity = {1.0, 1.0};
    idle.strata = {s};
    for (const auto& subj : simulate_population(idle).subjects) {
      for (double r : subj.readings) CHECK(r == 0.0);
    }
  }
  SUBCASE("inactive share concentrates at the subject's rate") {
    auto long_spec = three_strata(60, 10000, 3);
    const auto p = simulate_population(long_spec);
    std::size_t close = 0;
    for (const auto& s : p.subjects) {
      const double zeros = static_cast<double>(std::count(s.readings.begin(), s.readings.end(), 0.0));
      if (std::abs(zeros / 10000.0 - s.covariates.at("inactivity_rate")) <= 0.02) ++close;
    }
    CHECK(static_cast<double>(close) >= 0.95 * 60);
  }
  SUBCASE("invalid specs") {
    auto bad = spec;
    bad.strata[0].proportion = 0.9;
    CHECK_THROWS_AS(simulate_population(bad), Error);
    bad = spec;
    bad.strata[1].inactivity = {0.8, 0.2};
    CHECK_THROWS_AS(simulate_population(bad), Error);
    bad = spec;
    bad.population_size = 0;
    CHECK_THROWS_AS(simulate_population(bad), Error);
    bad = spec;
    bad.strata[2].age = {70.5, 80};
    CHECK_THROWS_AS(simulate_population(bad), Error);
  }
}

TEST_CASE("draw_sample") {
  const auto pop = simulate_population(three_strata(300, 10, 11));

  SUBCASE("census design") {
    for (auto kind : {DesignKind::stratified, DesignKind::poisson}) {
      DesignSpec census{kind, 300, {}};
      const auto s = draw_sample(pop, census, 1);
      CHECK(s.subjects.size() == 300);
      for (const auto& subj : s.subjects) CHECK(subj.survey_weight == 1.0);
    }
  }
  SUBCASE("stratified sizes and exact weights") {
    DesignSpec d{DesignKind::stratified, 60, {0.2, 0.3, 0.5}};
    const auto s = draw_sample(pop, d, 5);
    REQUIRE(s.subjects.size() == 60);
    std::vector<std::size_t> per(3);
    for (std::size_t k = 0; k < s.subjects.size(); ++k) {
      const std::size_t h = pop.stratum[s.population_index[k]];
      ++per[h];
      const double pi = static_cast<double>(allocate(60, {0.2, 0.3, 0.5})[h]) /
                        static_cast<double>(pop.stratum_sizes[h]);
      CHECK(s.inclusion_probability[k] == pi);
      CHECK(s.subjects[k].survey_weight == 1.0 / pi);
    }
    CHECK(per == std::vector<std::size_t>{12, 18, 30});
    std::vector<std::size_t> idx = s.population_index;
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());

    const auto again = draw_sample(pop, d, 5);
    CHECK(again.population_index == s.population_index);
    CHECK(draw_sample(pop, d, 6).population_index != s.population_index);
  }
  SUBCASE("poisson probabilities") {
    DesignSpec d{DesignKind::poisson, 50, {1, 2, 4}};
    const auto pi = inclusion_probabilities(pop, d);
    double expected = 0.0;
    for (double p : pi) expected += p;
    CHECK(expected == doctest::Approx(50.0));
    const auto s = draw_sample(pop, d, 9);
    for (std::size_t k = 0; k < s.subjects.size(); ++k) {
      CHECK(s.subjects[k].survey_weight == 1.0 / pi[s.population_index[k]]);
    }
  }
  SUBCASE("design consistency of the weighted mean") {
    DesignSpec d{DesignKind::stratified, 60, {0.1, 0.3, 0.6}};
    std::vector<double> ht;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      const auto s = draw_sample(pop, d, 1000 + rep);
      WeightedScalarSample x;
      for (const auto& subj : s.subjects) {
        x.values.push_back(subj.covariates.at("age"));
        x.weights.push_back(subj.survey_weight);
      }
      ht.push_back(ht_mean(x));
    }
    double mean = 0.0;
    for (double v : ht) mean += v;
    mean /= static_cast<double>(ht.size());
    double var = 0.0;
    for (double v : ht) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / static_cast<double>(ht.size() - 1) / static_cast<double>(ht.size()));
    CHECK(std::abs(mean - pop.true_means.at("age")) <= 3 * se);
  }
  SUBCASE("invalid designs") {
    CHECK_THROWS_AS(draw_sample(pop, {DesignKind::stratified, 301, {}}, 1), Error);
    CHECK_THROWS_AS(draw_sample(pop, {DesignKind::stratified, 0, {}}, 1), Error);
    CHECK_THROWS_AS(draw_sample(pop, {DesignKind::stratified, 10, {1, 1}}, 1), Error);
    CHECK_THROWS_AS(draw_sample(pop, {DesignKind::stratified, 10, {1, 1, -1}}, 1), Error);
  }
  SUBCASE("empty realized sample") {
    const auto tiny = simulate_population(three_strata(3, 5, 1));
    DesignSpec d{DesignKind::poisson, 1, {}};
    bool saw_empty = false;
    for (std::uint64_t seed = 0; seed < 50 && !saw_empty; ++seed) {
      try {
        draw_sample(tiny, d, seed);
      } catch (const Error& e) {
        CHECK(std::string(e.what()) == "empty sample; increase n");
        saw_empty = true;
      }
    }
    CHECK(saw_empty);
  }
}
