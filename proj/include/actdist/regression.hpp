#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "actdist/distribution.hpp"

namespace actdist {

/// A regression predictor: a scalar summary (such as TAC) or a distribution.
using Predictor = std::variant<double, QuantileGrid>;

/// Distance between predictors. `automatic` picks Wasserstein for quantile
/// grids and absolute difference for scalars.
enum class Metric { automatic, wasserstein, absolute };

/// Univariate smoothing kernel for the Nadaraya-Watson estimator.
enum class SmoothingKernel { gaussian, epanechnikov, uniform };

/// Reproducing kernel for kernel ridge regression, as a function of d / sigma.
enum class KrrKernel { laplacian, gaussian };

/// Survey records (X_i, Y_i, w_i) for regression.
struct SurveySample {
  std::vector<Predictor> predictors;
  std::vector<double> responses;
  std::vector<double> weights;

  std::size_t size() const { return responses.size(); }
  bool distributional() const;
  /// Lengths, weights, predictor homogeneity and (optionally) 0/1 responses.
  void validate(bool binary = false) const;
  /// Copy with observation `i` removed.
  SurveySample without(std::size_t i) const;
};

Metric resolve_metric(const SurveySample& sample, Metric metric);
double predictor_distance(const Predictor& a, const Predictor& b, Metric metric);
/// Row-major n x n matrix of pairwise predictor distances.
std::vector<double> pairwise_distances(std::span<const Predictor> predictors, Metric metric);

// ---------------------------------------------------------------------------
// Nadaraya-Watson smoothing

struct NwConfig {
  double bandwidth = 1.0;
  SmoothingKernel kernel = SmoothingKernel::gaussian;
  Metric metric = Metric::automatic;
};

/// sum_i s_i Y_i with s_i proportional to K(d(X_i, x) / h) * w_i. The result
/// is a convex combination of the observed responses.
double nw_predict(const SurveySample& sample, const NwConfig& cfg, const Predictor& x);

/// Entry i is the prediction at X_i from the sample without observation i;
/// empty when that neighborhood carries no kernel weight.
std::vector<std::optional<double>> nw_loo(const SurveySample& sample, const NwConfig& cfg);

/// Same, from a precomputed row-major distance matrix.
std::vector<std::optional<double>> nw_loo(std::span<const double> distances,
                                          std::span<const double> responses,
                                          std::span<const double> weights,
                                          const NwConfig& cfg);

/// Bandwidth from `h_grid` minimizing the survey-weighted LOO squared error.
/// Ties go to the smaller bandwidth; bandwidths that leave any observation
/// without neighbors are skipped.
double nw_select_bandwidth(const SurveySample& sample, const NwConfig& cfg,
                           std::span<const double> h_grid);

// ---------------------------------------------------------------------------
// Kernel ridge regression

double laplacian_kernel(double dist, double sigma);
double krr_kernel(KrrKernel kernel, double dist, double sigma);

/// Fitted survey-weighted kernel ridge regressor m(x) = sum_i alpha_i K(x, X_i).
struct KrrModel {
  std::vector<Predictor> predictors;
  std::vector<double> alpha;
  double sigma = 1.0;
  double lambda = 0.0;
  Metric metric = Metric::wasserstein;
  KrrKernel kernel = KrrKernel::laplacian;
};

struct KrrOptions {
  std::optional<double> sigma;  // median heuristic when unset
  Metric metric = Metric::automatic;
  KrrKernel kernel = KrrKernel::laplacian;
};

/// Solves (W K + lambda I) alpha = W Y with partial-pivoting LU.
KrrModel krr_fit(const SurveySample& sample, double lambda, const KrrOptions& options = {});
double krr_predict(const KrrModel& model, const Predictor& x);

enum class LooMethod {
  automatic,       // hat-matrix shortcut, cross-checked by refit under unequal weights
  hat_matrix,      // shortcut only, refit where 1 - H_ii is too small
  explicit_refit,  // one fit per left-out observation
};

struct LooOptions {
  LooMethod method = LooMethod::automatic;
  double tolerance = 1e-8;
  bool sigma_per_fold = false;  // recompute the median heuristic inside each fold
  Metric metric = Metric::automatic;
  KrrKernel kernel = KrrKernel::laplacian;
};

struct KrrLoo {
  std::vector<double> predictions;
  std::size_t refits = 0;  // folds computed by explicit refit
};

KrrLoo krr_loo(const SurveySample& sample, double lambda, double sigma,
               const LooOptions& options = {});

/// Lambda from `lambda_grid` minimizing the survey-weighted LOO squared
/// error. Ties go to the larger lambda.
double krr_select_lambda(const SurveySample& sample, double sigma,
                         std::span<const double> lambda_grid, const LooOptions& options = {});

/// Self-describing JSON artifact with a format version.
void save_model(const KrrModel& model, std::ostream& out);
KrrModel load_model(std::istream& in);

std::string to_string(Metric metric);
std::string to_string(KrrKernel kernel);

}  // namespace actdist
