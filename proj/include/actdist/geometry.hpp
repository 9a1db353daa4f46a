#pragma once

#include <optional>
#include <span>
#include <vector>

#include "actdist/distribution.hpp"

namespace actdist {

/// Mean, total variance and per-level standard deviation of a set of
/// quantile grids under the Wasserstein geometry.
struct FrechetSummary {
  QuantileGrid mean;
  double variance = 0.0;
  std::vector<double> pointwise_sd;
};

/// 2-Wasserstein distance between two distributions on the real line, by the
/// midpoint rule on their common quantile grid.
double wasserstein2(const QuantileGrid& a, const QuantileGrid& b);

/// Squared distance without the square root; avoids a round trip when the
/// caller needs d^2.
double wasserstein2_squared(const QuantileGrid& a, const QuantileGrid& b);

/// Levelwise (weighted) average of the grids. Weights are normalized to sum
/// to one; uniform when empty.
QuantileGrid frechet_mean(std::span<const QuantileGrid> grids,
                          std::span<const double> weights = {});

/// Without weights: sum of squared distances to `mean` divided by n - 1.
/// With weights: normalized-weight average of squared distances.
double frechet_variance(std::span<const QuantileGrid> grids, const QuantileGrid& mean,
                        std::span<const double> weights = {});

/// Per-level standard deviation with the same divisor convention as
/// frechet_variance, so that the midpoint integral of its square equals the
/// Fréchet variance.
std::vector<double> pointwise_sd_curve(std::span<const QuantileGrid> grids,
                                       const QuantileGrid& mean,
                                       std::span<const double> weights = {});

FrechetSummary frechet_summary(std::span<const QuantileGrid> grids,
                               std::span<const double> weights = {});

/// Symmetric matrix of pairwise Wasserstein distances, row-major n x n.
std::vector<double> distance_matrix(std::span<const QuantileGrid> grids);

}  // namespace actdist
