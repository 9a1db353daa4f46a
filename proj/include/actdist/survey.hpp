#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "actdist/error.hpp"

namespace actdist {

/// Scalar values paired with positive survey weights w_i = 1 / pi_i.
struct WeightedScalarSample {
  std::vector<double> values;
  std::vector<double> weights;

  void validate() const;
};

/// Horvitz-Thompson (ratio-normalized) weighted mean.
double ht_mean(const WeightedScalarSample& s);

/// inf{x : F_w(x) >= 1/2} for the weighted empirical CDF F_w. No interpolation.
double weighted_median(const WeightedScalarSample& s);

/// Survey-weighted leave-one-out R^2. Can be negative.
double weighted_r2(std::span<const double> y, std::span<const double> yhat_loo,
                   std::span<const double> weights);

/// Kernel scale from the weighted median of squared pairwise distances
/// {d(X_i, X_j)^2 : i < j}, pair (i, j) weighted by w_i * w_j.
template <class T, class Distance>
double median_heuristic_sigma(std::span<const T> predictors, std::span<const double> weights,
                              Distance&& distance) {
  const std::size_t n = predictors.size();
  if (n < 2) throw Error("median heuristic needs at least 2 predictors");
  if (weights.size() != n) throw Error("weights and predictors differ in length");
  WeightedScalarSample pairs;
  pairs.values.reserve(n * (n - 1) / 2);
  pairs.weights.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(predictors[i], predictors[j]);
      pairs.values.push_back(d * d);
      pairs.weights.push_back(weights[i] * weights[j]);
    }
  }
  const double med = weighted_median(pairs);
  if (!(med > 0.0)) throw Error("degenerate predictor set");
  return std::sqrt(med);
}

/// Same heuristic from a precomputed row-major n x n distance matrix.
double median_heuristic_sigma(std::span<const double> distances, std::span<const double> weights);

}  // namespace actdist
