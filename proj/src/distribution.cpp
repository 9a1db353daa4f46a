#include "actdist/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "actdist/error.hpp"

namespace actdist {

void ActivitySeries::validate() const {
  if (readings.empty()) throw Error("empty series");
  if (timestamps.size() != readings.size()) {
    throw Error("subject " + subject_id + ": timestamps and readings differ in length");
  }
  for (std::size_t j = 0; j < readings.size(); ++j) {
    if (!(readings[j] >= 0.0) || !std::isfinite(readings[j])) {
      throw Error("subject " + subject_id + ": negative or non-finite reading");
    }
    if (j > 0 && !(timestamps[j] > timestamps[j - 1])) {
      throw Error("subject " + subject_id + ": timestamps not strictly increasing");
    }
  }
  if (!(survey_weight > 0.0) || !std::isfinite(survey_weight)) {
    throw Error("subject " + subject_id + ": survey weight must be positive");
  }
}

void CensorSpec::validate() const {
  if (lower && !(*lower >= 0.0)) throw Error("invalid censor bounds");
  if (upper && !(*upper > 0.0)) throw Error("invalid censor bounds");
  if (lower && upper && !(*lower < *upper)) throw Error("invalid censor bounds");
}

QuantileGrid::QuantileGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error("quantile grid must be nonempty");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!(values_[k] >= 0.0) || !std::isfinite(values_[k])) {
      throw Error("quantile values must be finite and nonnegative");
    }
    if (k > 0 && values_[k] < values_[k - 1]) {
      throw Error("quantile values must be nondecreasing");
    }
  }
}

double QuantileGrid::mean() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s / static_cast<double>(values_.size());
}

double DensityCurve::integral() const {
  double s = 0.0;
  for (std::size_t k = 1; k < abscissae.size(); ++k) {
    s += 0.5 * (ordinates[k] + ordinates[k - 1]) * (abscissae[k] - abscissae[k - 1]);
  }
  return s;
}

double inactive_proportion(const ActivitySeries& series, const CensorSpec& censor) {
  if (series.readings.empty()) throw Error("empty series");
  const auto inactive = std::count_if(series.readings.begin(), series.readings.end(),
                                      [&](double r) { return censor.is_inactive(r); });
  return static_cast<double>(inactive) / static_cast<double>(series.readings.size());
}

ActivitySeries censor_series(const ActivitySeries& series, const CensorSpec& censor) {
  censor.validate();
  ActivitySeries out = series;
  for (double& r : out.readings) {
    if (censor.lower) r = std::max(r, *censor.lower);
    if (censor.upper) r = std::min(r, *censor.upper);
  }
  return out;
}

QuantileGrid empirical_quantiles(std::span<const double> readings, std::size_t m) {
  if (readings.empty()) throw Error("empty series");
  if (m < 2) throw Error("grid size must be at least 2");
  std::vector<double> sorted(readings.begin(), readings.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> values(m);
  for (std::size_t k = 1; k <= m; ++k) {
    // Smallest j with j/n >= (2k-1)/(2m), in exact integer arithmetic.
    const std::size_t num = n * (2 * k - 1);
    const std::size_t j = (num + 2 * m - 1) / (2 * m);
    values[k - 1] = sorted[j - 1];
  }
  return QuantileGrid(std::move(values));
}

QuantileGrid empirical_quantiles(const ActivitySeries& series, std::size_t m) {
  return empirical_quantiles(series.readings, m);
}

namespace {

// Linear interpolation between order statistics (R's type 7).
double quantile_type7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> active_readings(const ActivitySeries& series, const CensorSpec& censor) {
  std::vector<double> active;
  for (double r : series.readings) {
    if (censor.is_inactive(r)) continue;
    active.push_back(censor.upper ? std::min(r, *censor.upper) : r);
  }
  return active;
}

}  // namespace

double silverman_bandwidth(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < 2 || sorted.front() == sorted.back()) {
    throw Error("degenerate active sample");
  }
  const auto n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = quantile_type7(sorted, 0.75) - quantile_type7(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  // Heavy ties can make the IQR vanish while sd stays positive.
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityCurve kde_active(const ActivitySeries& series, const CensorSpec& censor,
                        std::optional<double> bandwidth, const DensityGridSpec& grid) {
  censor.validate();
  const std::vector<double> active = active_readings(series, censor);
  if (active.empty()) throw Error("all readings inactive");

  double h = 0.0;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw Error("bandwidth must be positive");
    h = *bandwidth;
  } else {
    try {
      h = silverman_bandwidth(active);
    } catch (const Error&) {
      warn("subject " + series.subject_id +
           ": degenerate active sample, density bandwidth set to 1.0");
      h = 1.0;
    }
  }
  if (grid.points < 2) throw Error("density grid needs at least 2 points");

  const auto [min_it, max_it] = std::minmax_element(active.begin(), active.end());
  const double lo = std::max(grid.lo.value_or(*min_it - 5.0 * h),
                             std::numeric_limits<double>::min());
  const double hi = grid.hi.value_or(*max_it + 5.0 * h);
  if (!(hi > lo)) throw Error("empty density evaluation range");

  const double p_active = 1.0 - inactive_proportion(series, censor);
  const double scale = p_active / (static_cast<double>(active.size()) * h);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

  DensityCurve curve;
  curve.bandwidth = h;
  curve.abscissae.resize(grid.points);
  curve.ordinates.resize(grid.points);
  const double step = (hi - lo) / static_cast<double>(grid.points - 1);
  for (std::size_t k = 0; k < grid.points; ++k) {
    const double x = k + 1 == grid.points ? hi : lo + step * static_cast<double>(k);
    double s = 0.0;
    for (double r : active) {
      const double u = (r - x) / h;
      s += inv_sqrt_2pi * std::exp(-0.5 * u * u);
    }
    curve.abscissae[k] = x;
    curve.ordinates[k] = scale * s;
  }
  return curve;
}

MixedDistribution build_mixed(const ActivitySeries& series, const CensorSpec& censor,
                              std::size_t m, bool with_density) {
  series.validate();
  censor.validate();
  MixedDistribution out;
  out.p_inactive = inactive_proportion(series, censor);
  const ActivitySeries censored = censor_series(series, censor);
  out.quantiles = empirical_quantiles(censored.readings, m);
  if (with_density && out.p_inactive < 1.0) {
    out.active_density = kde_active(series, censor);
  }
  return out;
}

double tac_per_day(const ActivitySeries& series) {
  if (series.readings.empty()) throw Error("empty series");
  if (series.timestamps.size() < 2) throw Error("span undefined");
  const double interval = series.timestamps[1] - series.timestamps[0];
  const double span = series.timestamps.back() - series.timestamps.front() + interval;
  if (!(span > 0.0)) throw Error("span undefined");
  double total = 0.0;
  for (double r : series.readings) total += r;
  return total / (span / 1440.0);
}

}  // namespace actdist
