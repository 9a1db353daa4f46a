#include "actdist/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "actdist/error.hpp"
#include "actdist/survey.hpp"

namespace actdist {

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(10.0, -4.0 + 0.5 * k));
  return grid;
}

std::vector<double> default_bandwidth_grid(std::span<const double> distances, std::size_t n) {
  if (distances.size() != n * n) throw Error("distance matrix size mismatch");
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distances[i * n + j] > 0.0) d.push_back(distances[i * n + j]);
    }
  }
  if (d.empty()) throw Error("degenerate predictor set");
  std::sort(d.begin(), d.end());
  std::vector<double> grid;
  for (int k = 0; k < 10; ++k) {
    const double p = 0.05 + 0.1 * k;
    const double h = (static_cast<double>(d.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, d.size() - 1);
    const double q = d[lo] + (h - static_cast<double>(lo)) * (d[hi] - d[lo]);
    if (grid.empty() || q > grid.back()) grid.push_back(q);
  }
  return grid;
}

namespace {

// Median heuristic, falling back when most pairs coincide. With every
// distance zero the Gram matrix is all ones whatever sigma is.
double kernel_scale(std::span<const double> d, std::span<const double> w) {
  const std::size_t n = w.size();
  WeightedScalarSample positive;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = d[i * n + j];
      if (dij > 0.0) {
        positive.values.push_back(dij * dij);
        positive.weights.push_back(w[i] * w[j]);
      }
    }
  }
  if (positive.values.empty()) {
    warn("constant predictor; kernel scale set to 1");
    return 1.0;
  }
  try {
    return median_heuristic_sigma(d, w);
  } catch (const Error&) {
    warn("most predictor pairs coincide; kernel scale from distinct pairs only");
    return std::sqrt(weighted_median(positive));
  }
}

}  // namespace

RepresentationFit fit_representation(const SurveySample& sample, const R2Options& options) {
  sample.validate();
  SurveySample scaled = sample;
  double total = 0.0;
  for (double w : sample.weights) total += w;
  const double mean_w = total / static_cast<double>(sample.size());
  for (double& w : scaled.weights) w /= mean_w;

  RepresentationFit fit;
  const Metric metric = resolve_metric(scaled, options.loo.metric);
  fit.sigma = kernel_scale(pairwise_distances(scaled.predictors, metric), scaled.weights);
  fit.lambda = krr_select_lambda(scaled, fit.sigma, options.lambda_grid, options.loo);
  fit.loo_predictions = krr_loo(scaled, fit.lambda, fit.sigma, options.loo).predictions;
  fit.r2 = weighted_r2(sample.responses, fit.loo_predictions, sample.weights);
  return fit;
}

R2Comparison compare_r2(const SurveySample& distribution_sample, const SurveySample& tac_sample,
                        const std::string& response_name, const R2Options& options) {
  if (distribution_sample.responses != tac_sample.responses ||
      distribution_sample.weights != tac_sample.weights) {
    throw Error("representations must share subjects, responses and weights");
  }
  R2Comparison out;
  out.response = response_name;
  out.distribution = fit_representation(distribution_sample, options);
  out.tac = fit_representation(tac_sample, options);
  return out;
}

std::string to_string(RiskGroup g) {
  switch (g) {
    case RiskGroup::a_risk:
      return "A";
    case RiskGroup::b_nonrisk:
      return "B";
    case RiskGroup::unassigned:
      return "unassigned";
  }
  return "unassigned";
}

namespace {

// Weighted Mann-Whitney statistic; ties count one half.
std::optional<double> weighted_auc(const std::vector<SubjectOutcome>& subjects) {
  double pos = 0.0;
  double neg = 0.0;
  double concordant = 0.0;
  for (const auto& a : subjects) {
    if (!a.probability) continue;
    (a.actual ? pos : neg) += a.weight;
    if (!a.actual) continue;
    for (const auto& b : subjects) {
      if (!b.probability || b.actual) continue;
      const double score = *a.probability > *b.probability    ? 1.0
                           : *a.probability == *b.probability ? 0.5
                                                              : 0.0;
      concordant += a.weight * b.weight * score;
    }
  }
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return concordant / (pos * neg);
}

}  // namespace

ClassificationOutcome classify_mortality(const SurveySample& sample, const NwConfig& cfg,
                                         double threshold) {
  sample.validate(true);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0, 1]");
  const auto loo = nw_loo(sample, cfg);

  ClassificationOutcome out;
  out.threshold = threshold;
  out.bandwidth = cfg.bandwidth;
  out.subjects.resize(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto& s = out.subjects[i];
    s.probability = loo[i];
    s.actual = sample.responses[i] == 1.0;
    s.weight = sample.weights[i];
    if (!s.probability) {
      ++out.unclassified;
      continue;
    }
    s.predicted = *s.probability >= threshold;
    if (s.predicted) {
      (s.actual ? out.tp : out.fp) += s.weight;
    } else {
      (s.actual ? out.fn : out.tn) += s.weight;
    }
  }
  if (out.unclassified > 0) {
    warn(std::to_string(out.unclassified) + " subject(s) had no leave-one-out neighbors");
  }
  out.auc = weighted_auc(out.subjects);
  return out;
}

RiskGroup risk_group(bool predicted_death, bool actual_death) {
  if (actual_death) return RiskGroup::unassigned;
  return predicted_death ? RiskGroup::a_risk : RiskGroup::b_nonrisk;
}

std::vector<RiskGroup> assign_risk_groups(const ClassificationOutcome& outcome) {
  std::vector<RiskGroup> out;
  out.reserve(outcome.subjects.size());
  for (const auto& s : outcome.subjects) {
    out.push_back(s.probability ? risk_group(s.predicted, s.actual) : RiskGroup::unassigned);
  }
  return out;
}

std::string AgeStratum::label() const { return std::to_string(lo) + "-" + std::to_string(hi); }

std::vector<AgeStratum> default_age_strata() { return {{68, 75}, {76, 80}, {81, 85}}; }

std::string stratify_age(double age, std::span<const AgeStratum> strata) {
  if (!std::isfinite(age) || std::floor(age) != age) throw Error("age must be a whole number of years");
  for (const auto& s : strata) {
    if (age >= s.lo && age <= s.hi) return s.label();
  }
  throw Error("subject outside target population");
}

std::string stratify_age(double age) {
  const auto strata = default_age_strata();
  return stratify_age(age, strata);
}

std::map<std::string, FrechetSummary> group_profiles(std::span<const QuantileGrid> grids,
                                                     std::span<const double> weights,
                                                     std::span<const std::string> labels,
                                                     std::span<const std::string> expected) {
  if (grids.size() != weights.size() || grids.size() != labels.size()) {
    throw Error("grids, weights and labels differ in length");
  }
  std::map<std::string, std::pair<std::vector<QuantileGrid>, std::vector<double>>> members;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    auto& [g, w] = members[labels[i]];
    g.push_back(grids[i]);
    w.push_back(weights[i]);
  }
  for (const auto& name : expected) {
    if (!members.contains(name)) warn("group '" + name + "' is empty; skipped");
  }
  std::map<std::string, FrechetSummary> out;
  for (const auto& [name, m] : members) out.emplace(name, frechet_summary(m.first, m.second));
  return out;
}

}  // namespace actdist
