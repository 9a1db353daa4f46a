#include "actdist/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "actdist/error.hpp"

namespace actdist {

namespace {

// Independent stream per (seed, stream, index).
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kSubjectStream = 0x5eb1;
constexpr std::uint64_t kSampleStream = 0xd351;

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

void check_range(const Range& r, const std::string& what, double min, double max) {
  if (!(r.lo <= r.hi) || r.lo < min || r.hi > max) {
    throw Error("invalid " + what + " range");
  }
}

}  // namespace

void PopulationSpec::validate() const {
  if (population_size < 1) throw Error("population size must be at least 1");
  if (minutes < 1) throw Error("series length must be at least 1");
  if (strata.empty()) throw Error("population needs at least one stratum");
  double total = 0.0;
  for (const auto& s : strata) {
    if (!(s.proportion >= 0.0)) throw Error("stratum proportions must be nonnegative");
    total += s.proportion;
    check_range(s.inactivity, "inactivity", 0.0, 1.0);
    check_range(s.intensity_mean, "intensity mean", 1e-12, HUGE_VAL);
    check_range(s.intensity_spread, "intensity spread", 1e-12, HUGE_VAL);
    check_range(s.age, "age", 0.0, 200.0);
    if (std::floor(s.age.lo) != s.age.lo || std::floor(s.age.hi) != s.age.hi) {
      throw Error("age range must be whole years");
    }
    if (!(s.mortality_rate >= 0.0 && s.mortality_rate <= 1.0)) {
      throw Error("mortality rate must lie in [0, 1]");
    }
    if (!(s.response.noise_sd >= 0.0)) throw Error("noise sd must be nonnegative");
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("stratum proportions must sum to 1");
}

std::vector<std::size_t> allocate(std::size_t total, const std::vector<double>& shares) {
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (shares.empty() || !(sum > 0.0)) throw Error("allocation shares must be positive");
  std::vector<std::size_t> out(shares.size());
  std::vector<double> remainder(shares.size());
  std::size_t assigned = 0;
  for (std::size_t h = 0; h < shares.size(); ++h) {
    const double exact = static_cast<double>(total) * shares[h] / sum;
    out[h] = static_cast<std::size_t>(std::floor(exact));
    remainder[h] = exact - static_cast<double>(out[h]);
    assigned += out[h];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k % order.size()]];
  return out;
}

Population simulate_population(const PopulationSpec& spec) {
  spec.validate();
  Population pop;
  std::vector<double> shares;
  for (const auto& s : spec.strata) shares.push_back(s.proportion);
  pop.stratum_sizes = allocate(spec.population_size, shares);

  pop.subjects.reserve(spec.population_size);
  std::size_t index = 0;
  for (std::size_t h = 0; h < spec.strata.size(); ++h) {
    const auto& st = spec.strata[h];
    for (std::size_t k = 0; k < pop.stratum_sizes[h]; ++k, ++index) {
      auto rng = derived_rng(spec.seed, kSubjectStream, index);
      const double p = uniform(rng, st.inactivity);
      const double mean = uniform(rng, st.intensity_mean);
      const double spread = uniform(rng, st.intensity_spread);
      const int age = std::uniform_int_distribution<int>(static_cast<int>(st.age.lo),
                                                         static_cast<int>(st.age.hi))(rng);
      const double noise = st.response.noise_sd > 0.0
                               ? std::normal_distribution<double>(0.0, st.response.noise_sd)(rng)
                               : 0.0;
      const bool died = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < st.mortality_rate;

      ActivitySeries s;
      s.subject_id = "S" + std::to_string(index + 1);
      s.survey_weight = 1.0;
      s.timestamps.resize(spec.minutes);
      s.readings.resize(spec.minutes);
      std::bernoulli_distribution inactive(p);
      std::lognormal_distribution<double> lognormal(std::log(mean) - 0.5 * spread * spread,
                                                    spread);
      std::gamma_distribution<double> gamma(1.0 / (spread * spread), mean * spread * spread);
      for (std::size_t t = 0; t < spec.minutes; ++t) {
        s.timestamps[t] = static_cast<double>(t);
        if (inactive(rng)) {
          s.readings[t] = 0.0;
          continue;
        }
        double r = 0.0;
        // Redraw the (vanishingly rare) exact zero so it cannot pose as inactivity.
        while (!(r > 0.0)) r = st.law == IntensityLaw::lognormal ? lognormal(rng) : gamma(rng);
        s.readings[t] = r;
      }
      s.covariates["inactivity_rate"] = p;
      s.covariates["intensity_mean"] = mean;
      s.covariates["intensity_spread"] = spread;
      s.covariates["age"] = age;
      s.covariates["mortality"] = died ? 1.0 : 0.0;
      s.covariates["response"] = st.response.intercept + st.response.inactivity * p +
                                 st.response.intensity_mean * mean +
                                 st.response.intensity_spread * spread + noise;
      s.labels["stratum"] = st.name.empty() ? "stratum" + std::to_string(h + 1) : st.name;
      pop.subjects.push_back(std::move(s));
      pop.stratum.push_back(h);
    }
  }

  for (const auto& s : pop.subjects) {
    for (const auto& [name, value] : s.covariates) pop.true_means[name] += value;
  }
  for (auto& [name, total] : pop.true_means) total /= static_cast<double>(pop.subjects.size());
  return pop;
}

std::vector<double> inclusion_probabilities(const Population& population,
                                            const DesignSpec& design) {
  const std::size_t strata = population.stratum_sizes.size();
  const std::size_t big_n = population.subjects.size();
  if (design.sample_size < 1) throw Error("sample size must be at least 1");
  if (design.sample_size > big_n) throw Error("sample size exceeds population size");
  std::vector<double> shares = design.allocation;
  if (!shares.empty() && shares.size() != strata) {
    throw Error("allocation must have one entry per stratum");
  }
  for (double a : shares) {
    if (!(a > 0.0)) throw Error("allocation entries must be positive");
  }

  std::vector<double> pi(big_n);
  if (design.kind == DesignKind::stratified) {
    if (shares.empty()) {
      for (std::size_t sz : population.stratum_sizes) shares.push_back(static_cast<double>(sz));
    }
    const auto n_h = allocate(design.sample_size, shares);
    for (std::size_t h = 0; h < strata; ++h) {
      if (population.stratum_sizes[h] == 0) continue;
      if (n_h[h] == 0) throw Error("stratum " + std::to_string(h + 1) + " gets no sample");
      if (n_h[h] > population.stratum_sizes[h]) {
        throw Error("allocation exceeds the size of stratum " + std::to_string(h + 1));
      }
    }
    for (std::size_t i = 0; i < big_n; ++i) {
      const std::size_t h = population.stratum[i];
      pi[i] = static_cast<double>(n_h[h]) / static_cast<double>(population.stratum_sizes[h]);
    }
  } else {
    if (shares.empty()) shares.assign(strata, 1.0);
    double size_total = 0.0;
    for (std::size_t i = 0; i < big_n; ++i) size_total += shares[population.stratum[i]];
    for (std::size_t i = 0; i < big_n; ++i) {
      pi[i] = std::min(1.0, static_cast<double>(design.sample_size) *
                                shares[population.stratum[i]] / size_total);
    }
  }
  return pi;
}

SampledCohort draw_sample(const Population& population, const DesignSpec& design,
                          std::uint64_t seed) {
  const auto pi = inclusion_probabilities(population, design);
  auto rng = derived_rng(seed, kSampleStream, 0);
  std::vector<std::size_t> chosen;

  if (design.kind == DesignKind::stratified) {
    std::vector<std::vector<std::size_t>> members(population.stratum_sizes.size());
    for (std::size_t i = 0; i < population.subjects.size(); ++i) {
      members[population.stratum[i]].push_back(i);
    }
    for (auto& m : members) {
      if (m.empty()) continue;
      const auto take = static_cast<std::size_t>(
          std::llround(pi[m.front()] * static_cast<double>(m.size())));
      // Partial Fisher-Yates: the first `take` entries are a simple random sample.
      for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, m.size() - 1);
        std::swap(m[k], m[pick(rng)]);
      }
      std::sort(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(take));
      chosen.insert(chosen.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(chosen.begin(), chosen.end());
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < population.subjects.size(); ++i) {
      if (u(rng) < pi[i]) chosen.push_back(i);
    }
  }
  if (chosen.empty()) throw Error("empty sample; increase n");

  SampledCohort out;
  for (std::size_t i : chosen) {
    ActivitySeries s = population.subjects[i];
    s.survey_weight = 1.0 / pi[i];
    out.subjects.push_back(std::move(s));
    out.population_index.push_back(i);
    out.inclusion_probability.push_back(pi[i]);
  }
  return out;
}

}  // namespace actdist
