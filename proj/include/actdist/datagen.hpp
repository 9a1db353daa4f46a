#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "actdist/distribution.hpp"

namespace actdist {

enum class IntensityLaw { lognormal, gamma };

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Continuous response y = intercept + sum of coefficients times the
/// subject's latent parameters + Gaussian noise.
struct ResponseModel {
  double intercept = 0.0;
  double inactivity = 0.0;
  double intensity_mean = 0.0;
  double intensity_spread = 0.0;
  double noise_sd = 0.0;
};

/// One population stratum. Each subject draws its latent parameters
/// uniformly from the ranges, then its minutes i.i.d.: zero with probability
/// `inactivity`, otherwise a positive draw from `law` with the subject's
/// mean and spread. Spread is the log-scale sd for the log-normal law and the
/// coefficient of variation for the Gamma law.
struct StratumSpec {
  std::string name;
  double proportion = 1.0;
  Range inactivity{0.3, 0.7};
  IntensityLaw law = IntensityLaw::lognormal;
  Range intensity_mean{200.0, 800.0};
  Range intensity_spread{0.5, 1.0};
  Range age{68.0, 85.0};  // whole years, inclusive
  ResponseModel response;
  double mortality_rate = 0.0;
};

struct PopulationSpec {
  std::size_t population_size = 1000;
  std::size_t minutes = 1440;  // readings per subject, one per minute
  std::vector<StratumSpec> strata;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Subjects carry covariates inactivity_rate, intensity_mean,
/// intensity_spread, age, response, mortality and the label "stratum".
struct Population {
  std::vector<ActivitySeries> subjects;
  std::vector<std::size_t> stratum;
  std::vector<std::size_t> stratum_sizes;
  std::map<std::string, double> true_means;  // finite-population covariate means
};

enum class DesignKind { stratified, poisson };

/// `stratified`: fixed per-stratum sizes drawn without replacement, n split
/// by `allocation` (proportional to stratum size when empty).
/// `poisson`: independent Bernoulli selection with pi_i proportional to the
/// stratum's `allocation` entry (equal when empty), scaled to expected size n
/// and capped at one.
struct DesignSpec {
  DesignKind kind = DesignKind::stratified;
  std::size_t sample_size = 100;
  std::vector<double> allocation;
};

struct SampledCohort {
  std::vector<ActivitySeries> subjects;  // survey_weight = 1 / pi
  std::vector<std::size_t> population_index;
  std::vector<double> inclusion_probability;
};

/// Largest-remainder split of `total` by `shares`.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<double>& shares);

Population simulate_population(const PopulationSpec& spec);

/// Inclusion probability of every population subject under `design`.
std::vector<double> inclusion_probabilities(const Population& population, const DesignSpec& design);

SampledCohort draw_sample(const Population& population, const DesignSpec& design,
                          std::uint64_t seed);

}  // namespace actdist
