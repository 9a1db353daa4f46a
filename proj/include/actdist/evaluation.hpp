#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actdist/geometry.hpp"
#include "actdist/regression.hpp"

namespace actdist {

/// 13 log-spaced values from 1e-4 to 1e2.
std::vector<double> default_lambda_grid();

/// Type-7 quantiles {0.05, 0.15, ..., 0.95} of the positive pairwise
/// distances, deduplicated.
std::vector<double> default_bandwidth_grid(std::span<const double> distances, std::size_t n);

struct R2Options {
  std::vector<double> lambda_grid = default_lambda_grid();
  LooOptions loo;
};

struct RepresentationFit {
  double r2 = 0.0;
  double lambda = 0.0;
  double sigma = 0.0;
  std::vector<double> loo_predictions;
};

struct R2Comparison {
  std::string response;
  RepresentationFit distribution;
  RepresentationFit tac;
};

/// Fits kernel ridge regression with LOO-selected lambda on one
/// representation and scores it by survey-weighted LOO R^2. Weights are
/// rescaled to mean one so that the lambda grid has a fixed meaning.
RepresentationFit fit_representation(const SurveySample& sample, const R2Options& options = {});

R2Comparison compare_r2(const SurveySample& distribution_sample, const SurveySample& tac_sample,
                        const std::string& response_name, const R2Options& options = {});

enum class RiskGroup { a_risk, b_nonrisk, unassigned };

std::string to_string(RiskGroup g);

struct SubjectOutcome {
  std::optional<double> probability;  // empty when no LOO neighbors
  bool predicted = false;             // predicted to die
  bool actual = false;                // died
  double weight = 0.0;
};

struct ClassificationOutcome {
  std::vector<SubjectOutcome> subjects;
  double threshold = 0.5;
  double bandwidth = 0.0;
  // Survey-weighted confusion counts over subjects with a probability.
  double tp = 0.0;
  double fp = 0.0;
  double tn = 0.0;
  double fn = 0.0;
  std::size_t unclassified = 0;
  std::optional<double> auc;  // weighted empirical ROC area; needs both classes

  double total() const { return tp + fp + tn + fn; }
  double accuracy() const { return (tp + tn) / total(); }
};

/// Leave-one-out Nadaraya-Watson probabilities, thresholded at `threshold`
/// (label 1 when probability >= threshold).
ClassificationOutcome classify_mortality(const SurveySample& sample, const NwConfig& cfg,
                                         double threshold = 0.5);

RiskGroup risk_group(bool predicted_death, bool actual_death);
std::vector<RiskGroup> assign_risk_groups(const ClassificationOutcome& outcome);

struct AgeStratum {
  int lo;
  int hi;
  std::string label() const;
};

std::vector<AgeStratum> default_age_strata();

/// Closed-interval stratum for an integer age; throws for ages outside every
/// stratum.
std::string stratify_age(double age, std::span<const AgeStratum> strata);
std::string stratify_age(double age);

/// Weighted Fréchet summary per group label. Groups listed in `expected`
/// that have no members are skipped with a warning.
std::map<std::string, FrechetSummary> group_profiles(std::span<const QuantileGrid> grids,
                                                     std::span<const double> weights,
                                                     std::span<const std::string> labels,
                                                     std::span<const std::string> expected = {});

}  // namespace actdist
