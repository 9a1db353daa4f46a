#include "actdist/geometry.hpp"

#include <cmath>

#include "actdist/error.hpp"

namespace actdist {

namespace {

void check_common_grid(std::span<const QuantileGrid> grids) {
  if (grids.empty()) throw Error("empty list of distributions");
  for (const auto& g : grids) {
    if (g.size() != grids.front().size()) throw Error("grid mismatch");
  }
}

// Normalized weights; uniform when none are supplied.
std::vector<double> normalized_weights(std::size_t n, std::span<const double> weights) {
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) throw Error("weights and distributions differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("weights must be positive");
    total += w;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = weights[i] / total;
  return out;
}

// Per-level sum of squared deviations, each term scaled by `coef[i]`.
std::vector<double> pointwise_variance(std::span<const QuantileGrid> grids,
                                       const QuantileGrid& mean,
                                       std::span<const double> weights) {
  check_common_grid(grids);
  if (mean.size() != grids.front().size()) throw Error("grid mismatch");
  const std::size_t n = grids.size();
  std::vector<double> coef;
  if (weights.empty()) {
    if (n < 2) throw Error("variance undefined");
    coef.assign(n, 1.0 / static_cast<double>(n - 1));
  } else {
    coef = normalized_weights(n, weights);
  }
  std::vector<double> var(mean.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = grids[i].values();
    for (std::size_t k = 0; k < var.size(); ++k) {
      const double d = q[k] - mean[k];
      var[k] += coef[i] * d * d;
    }
  }
  return var;
}

}  // namespace

double wasserstein2_squared(const QuantileGrid& a, const QuantileGrid& b) {
  if (a.size() != b.size()) throw Error("grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double wasserstein2(const QuantileGrid& a, const QuantileGrid& b) {
  return std::sqrt(wasserstein2_squared(a, b));
}

QuantileGrid frechet_mean(std::span<const QuantileGrid> grids, std::span<const double> weights) {
  check_common_grid(grids);
  const auto w = normalized_weights(grids.size(), weights);
  std::vector<double> mean(grids.front().size(), 0.0);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto q = grids[i].values();
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += w[i] * q[k];
  }
  return QuantileGrid(std::move(mean));
}

double frechet_variance(std::span<const QuantileGrid> grids, const QuantileGrid& mean,
                        std::span<const double> weights) {
  const auto var = pointwise_variance(grids, mean, weights);
  double s = 0.0;
  for (double v : var) s += v;
  return s / static_cast<double>(var.size());
}

std::vector<double> pointwise_sd_curve(std::span<const QuantileGrid> grids,
                                       const QuantileGrid& mean,
                                       std::span<const double> weights) {
  auto var = pointwise_variance(grids, mean, weights);
  for (double& v : var) v = std::sqrt(v);
  return var;
}

FrechetSummary frechet_summary(std::span<const QuantileGrid> grids,
                               std::span<const double> weights) {
  FrechetSummary out;
  out.mean = frechet_mean(grids, weights);
  if (weights.empty() && grids.size() < 2) {
    // A single unweighted subject has no spread to report.
    out.pointwise_sd.assign(out.mean.size(), 0.0);
    return out;
  }
  const auto var = pointwise_variance(grids, out.mean, weights);
  double s = 0.0;
  out.pointwise_sd.resize(var.size());
  for (std::size_t k = 0; k < var.size(); ++k) {
    s += var[k];
    out.pointwise_sd[k] = std::sqrt(var[k]);
  }
  out.variance = s / static_cast<double>(var.size());
  return out;
}

std::vector<double> distance_matrix(std::span<const QuantileGrid> grids) {
  const std::size_t n = grids.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = wasserstein2(grids[i], grids[j]);
    }
  }
  return d;
}

}  // namespace actdist
