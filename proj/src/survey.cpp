#include "actdist/survey.hpp"

#include <numeric>

namespace actdist {

void WeightedScalarSample::validate() const {
  if (values.empty()) throw Error("empty sample");
  if (values.size() != weights.size()) throw Error("values and weights differ in length");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("weights must be positive");
  }
}

double ht_mean(const WeightedScalarSample& s) {
  s.validate();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    num += s.weights[i] * s.values[i];
    den += s.weights[i];
  }
  return num / den;
}

double weighted_median(const WeightedScalarSample& s) {
  s.validate();
  std::vector<std::size_t> order(s.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
  double total = 0.0;
  for (std::size_t i : order) total += s.weights[i];

  double cum = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double x = s.values[order[k]];
    // F_w jumps only after every copy of x is counted.
    while (k < order.size() && s.values[order[k]] == x) cum += s.weights[order[k++]];
    if (2.0 * cum >= total) return x;
  }
  return s.values[order.back()];
}

double weighted_r2(std::span<const double> y, std::span<const double> yhat_loo,
                   std::span<const double> weights) {
  if (y.size() != yhat_loo.size() || y.size() != weights.size()) {
    throw Error("responses, predictions and weights differ in length");
  }
  const double ybar =
      ht_mean({std::vector<double>(y.begin(), y.end()),
               std::vector<double>(weights.begin(), weights.end())});
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += weights[i] * (y[i] - yhat_loo[i]) * (y[i] - yhat_loo[i]);
    sst += weights[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  if (!(sst > 0.0)) throw Error("zero variance response");
  return 1.0 - sse / sst;
}

double median_heuristic_sigma(std::span<const double> distances, std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (distances.size() != n * n) throw Error("distance matrix size mismatch");
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  return median_heuristic_sigma<std::size_t>(
      index, weights, [&](std::size_t i, std::size_t j) { return distances[i * n + j]; });
}

}  // namespace actdist
