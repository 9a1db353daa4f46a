#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actdist {

/// Default number of probability levels in a quantile grid.
inline constexpr std::size_t kDefaultGridSize = 500;

/// One subject's minute-level activity record.
struct ActivitySeries {
  std::string subject_id;
  std::vector<double> timestamps;  // minutes, strictly increasing
  std::vector<double> readings;    // nonnegative counts, one per timestamp
  double survey_weight = 1.0;      // 1 / inclusion probability
  std::map<std::string, double> covariates;
  std::map<std::string, std::string> labels;  // non-numeric covariates

  /// Throws actdist::Error if any invariant is violated.
  void validate() const;
};

/// Lower/upper censoring bounds. A reading at or below `lower` is inactive
/// and is reported at `lower`; readings above `upper` are reported at `upper`.
struct CensorSpec {
  std::optional<double> lower;
  std::optional<double> upper;

  void validate() const;
  /// Location of the inactivity atom: the lower cutoff, or zero.
  double atom() const { return lower.value_or(0.0); }
  bool is_inactive(double reading) const {
    return lower ? reading <= *lower : reading == 0.0;
  }
};

/// Quantile function sampled at the midpoint levels t_k = (k - 0.5) / m.
class QuantileGrid {
 public:
  QuantileGrid() = default;
  /// Throws if `values` is empty, decreasing somewhere, or negative.
  explicit QuantileGrid(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  /// Probability level of the k-th value (zero-based k).
  double level(std::size_t k) const {
    return (static_cast<double>(k) + 0.5) / static_cast<double>(values_.size());
  }
  /// Mean of the distribution, by the midpoint rule.
  double mean() const;

  friend bool operator==(const QuantileGrid&, const QuantileGrid&) = default;

 private:
  std::vector<double> values_;
};

struct DensityCurve {
  std::vector<double> abscissae;
  std::vector<double> ordinates;
  double bandwidth = 0.0;

  /// Trapezoid-rule integral of the curve.
  double integral() const;
};

/// Atom at the inactivity value plus the active part.
struct MixedDistribution {
  double p_inactive = 0.0;
  QuantileGrid quantiles;
  std::optional<DensityCurve> active_density;
};

/// Evaluation range for the active-part density. Unset ends are derived
/// from the active readings and the bandwidth.
struct DensityGridSpec {
  std::optional<double> lo;
  std::optional<double> hi;
  std::size_t points = 512;
};

double inactive_proportion(const ActivitySeries& series, const CensorSpec& censor = {});

ActivitySeries censor_series(const ActivitySeries& series, const CensorSpec& censor);

/// Left-continuous inverse of the empirical CDF of `readings` on an m-point
/// midpoint grid.
QuantileGrid empirical_quantiles(std::span<const double> readings, std::size_t m);
QuantileGrid empirical_quantiles(const ActivitySeries& series, std::size_t m);

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), IQR by linear interpolation between
/// order statistics. Throws with fewer than two distinct values.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian kernel density of the active readings, scaled by the active
/// probability so that it integrates to 1 - p_inactive.
DensityCurve kde_active(const ActivitySeries& series, const CensorSpec& censor = {},
                        std::optional<double> bandwidth = std::nullopt,
                        const DensityGridSpec& grid = {});

MixedDistribution build_mixed(const ActivitySeries& series, const CensorSpec& censor = {},
                              std::size_t m = kDefaultGridSize, bool with_density = false);

/// Total activity count per monitored day.
double tac_per_day(const ActivitySeries& series);

}  // namespace actdist
