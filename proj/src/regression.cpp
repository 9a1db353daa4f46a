#include "actdist/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>

#include "actdist/error.hpp"
#include "actdist/geometry.hpp"
#include "actdist/survey.hpp"

namespace actdist {

namespace {

constexpr int kModelFormatVersion = 1;
constexpr double kConditionWarning = 1e12;

bool is_grid(const Predictor& p) { return std::holds_alternative<QuantileGrid>(p); }

}  // namespace

// ---------------------------------------------------------------------------
// Samples and distances

bool SurveySample::distributional() const {
  return !predictors.empty() && is_grid(predictors.front());
}

void SurveySample::validate(bool binary) const {
  if (responses.empty()) throw Error("empty sample");
  if (predictors.size() != responses.size() || weights.size() != responses.size()) {
    throw Error("predictors, responses and weights differ in length");
  }
  const bool grids = distributional();
  for (std::size_t i = 0; i < size(); ++i) {
    if (is_grid(predictors[i]) != grids) throw Error("predictors must all be of one kind");
    if (grids && std::get<QuantileGrid>(predictors[i]).size() !=
                     std::get<QuantileGrid>(predictors.front()).size()) {
      throw Error("grid mismatch");
    }
    if (!grids && !std::isfinite(std::get<double>(predictors[i]))) {
      throw Error("non-finite scalar predictor");
    }
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw Error("weights must be positive");
    }
    if (!std::isfinite(responses[i])) throw Error("non-finite response");
    if (binary && responses[i] != 0.0 && responses[i] != 1.0) {
      throw Error("binary response must be 0 or 1");
    }
  }
}

SurveySample SurveySample::without(std::size_t i) const {
  SurveySample out = *this;
  out.predictors.erase(out.predictors.begin() + static_cast<std::ptrdiff_t>(i));
  out.responses.erase(out.responses.begin() + static_cast<std::ptrdiff_t>(i));
  out.weights.erase(out.weights.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

Metric resolve_metric(const SurveySample& sample, Metric metric) {
  if (metric == Metric::automatic) {
    return sample.distributional() ? Metric::wasserstein : Metric::absolute;
  }
  if ((metric == Metric::wasserstein) != sample.distributional()) {
    throw Error("metric " + to_string(metric) + " does not match the predictor kind");
  }
  return metric;
}

double predictor_distance(const Predictor& a, const Predictor& b, Metric metric) {
  if (is_grid(a) != is_grid(b)) throw Error("predictors must all be of one kind");
  if (is_grid(a)) {
    if (metric == Metric::absolute) throw Error("absolute metric needs scalar predictors");
    return wasserstein2(std::get<QuantileGrid>(a), std::get<QuantileGrid>(b));
  }
  if (metric == Metric::wasserstein) throw Error("Wasserstein metric needs quantile grids");
  return std::abs(std::get<double>(a) - std::get<double>(b));
}

std::vector<double> pairwise_distances(std::span<const Predictor> predictors, Metric metric) {
  const std::size_t n = predictors.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = predictor_distance(predictors[i], predictors[j], metric);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Nadaraya-Watson

namespace {

void check_bandwidth(const NwConfig& cfg) {
  if (!(cfg.bandwidth > 0.0) || !std::isfinite(cfg.bandwidth)) {
    throw Error("bandwidth must be positive");
  }
}

// Kernel-weighted average of the responses over every index except `skip`,
// given scaled distances u_i = d_i / h. Gaussian weights are taken relative to
// the closest member so that far-away queries do not underflow to an empty
// neighborhood.
std::optional<double> nw_average(SmoothingKernel kernel, std::size_t skip,
                                 std::span<const double> u, std::span<const double> responses,
                                 std::span<const double> weights) {
  const std::size_t n = responses.size();
  double shift = 0.0;
  if (kernel == SmoothingKernel::gaussian) {
    double umin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != skip) umin = std::min(umin, u[i]);
    }
    shift = umin * umin;
  }
  double num = 0.0;
  double den = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == skip) continue;
    double k = 0.0;
    switch (kernel) {
      case SmoothingKernel::gaussian:
        k = std::exp(-0.5 * (u[i] * u[i] - shift));
        break;
      case SmoothingKernel::epanechnikov:
        k = std::abs(u[i]) < 1.0 ? 0.75 * (1.0 - u[i] * u[i]) : 0.0;
        break;
      case SmoothingKernel::uniform:
        k = std::abs(u[i]) <= 1.0 ? 0.5 : 0.0;
        break;
    }
    num += k * weights[i] * responses[i];
    den += k * weights[i];
    lo = std::min(lo, responses[i]);
    hi = std::max(hi, responses[i]);
  }
  if (!(den > 0.0)) return std::nullopt;
  // Clamp the rounding residue so the convex-combination bound is exact.
  return std::clamp(num / den, lo, hi);
}

}  // namespace

double nw_predict(const SurveySample& sample, const NwConfig& cfg, const Predictor& x) {
  sample.validate();
  check_bandwidth(cfg);
  const Metric metric = resolve_metric(sample, cfg.metric);
  const std::size_t n = sample.size();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = predictor_distance(sample.predictors[i], x, metric) / cfg.bandwidth;
  }
  const auto value =
      nw_average(cfg.kernel, n, u, sample.responses, sample.weights);
  if (!value) throw Error("empty neighborhood");
  return *value;
}

std::vector<std::optional<double>> nw_loo(std::span<const double> distances,
                                          std::span<const double> responses,
                                          std::span<const double> weights,
                                          const NwConfig& cfg) {
  check_bandwidth(cfg);
  const std::size_t n = responses.size();
  if (n < 2) throw Error("leave-one-out needs at least 2 observations");
  if (distances.size() != n * n || weights.size() != n) {
    throw Error("distance matrix size mismatch");
  }
  std::vector<std::optional<double>> out(n);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) u[j] = distances[i * n + j] / cfg.bandwidth;
    out[i] = nw_average(cfg.kernel, i, u, responses, weights);
  }
  return out;
}

std::vector<std::optional<double>> nw_loo(const SurveySample& sample, const NwConfig& cfg) {
  sample.validate();
  const Metric metric = resolve_metric(sample, cfg.metric);
  const auto d = pairwise_distances(sample.predictors, metric);
  return nw_loo(d, sample.responses, sample.weights, cfg);
}

double nw_select_bandwidth(const SurveySample& sample, const NwConfig& cfg,
                           std::span<const double> h_grid) {
  if (h_grid.empty()) throw Error("empty bandwidth grid");
  sample.validate();
  const Metric metric = resolve_metric(sample, cfg.metric);
  const auto d = pairwise_distances(sample.predictors, metric);

  std::vector<double> grid(h_grid.begin(), h_grid.end());
  std::sort(grid.begin(), grid.end());
  std::optional<double> best_h;
  double best_err = std::numeric_limits<double>::infinity();
  for (double h : grid) {
    NwConfig trial = cfg;
    trial.bandwidth = h;
    const auto loo = nw_loo(d, sample.responses, sample.weights, trial);
    double err = 0.0;
    bool complete = true;
    for (std::size_t i = 0; i < loo.size() && complete; ++i) {
      if (!loo[i]) {
        complete = false;
        break;
      }
      const double r = sample.responses[i] - *loo[i];
      err += sample.weights[i] * r * r;
    }
    if (complete && err < best_err) {
      best_err = err;
      best_h = h;
    }
  }
  if (!best_h) throw Error("every bandwidth in the grid leaves an empty neighborhood");
  return *best_h;
}

// ---------------------------------------------------------------------------
// Kernel ridge regression

double laplacian_kernel(double dist, double sigma) { return std::exp(-dist / sigma); }

double krr_kernel(KrrKernel kernel, double dist, double sigma) {
  if (kernel == KrrKernel::laplacian) return laplacian_kernel(dist, sigma);
  const double u = dist / sigma;
  return std::exp(-0.5 * u * u);
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd gram(std::span<const double> distances, std::span<const std::size_t> index,
              KrrKernel kernel, double sigma, std::size_t stride) {
  const auto n = static_cast<Eigen::Index>(index.size());
  MatrixXd k(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      k(a, b) = krr_kernel(kernel, distances[index[a] * stride + index[b]], sigma);
    }
  }
  return k;
}

// (W K + lambda I) alpha = W y. Returns nullopt when the system is singular.
std::optional<VectorXd> solve_weighted(const MatrixXd& k, const VectorXd& w, const VectorXd& y,
                                       double lambda, bool warn_condition) {
  const Eigen::Index n = k.rows();
  MatrixXd a = w.asDiagonal() * k;
  a.diagonal().array() += lambda;
  const Eigen::PartialPivLU<MatrixXd> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) return std::nullopt;
  if (warn_condition && 1.0 / rcond > kConditionWarning) {
    warn("kernel system is ill-conditioned (condition number ~" +
         std::to_string(1.0 / rcond) + ")");
  }
  VectorXd alpha = lu.solve(w.cwiseProduct(y));
  if (!alpha.allFinite() || alpha.size() != n) return std::nullopt;
  return alpha;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be nonnegative");
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("sigma must be positive");
}

VectorXd gather(std::span<const double> v, std::span<const std::size_t> index) {
  VectorXd out(static_cast<Eigen::Index>(index.size()));
  for (std::size_t a = 0; a < index.size(); ++a) out(static_cast<Eigen::Index>(a)) = v[index[a]];
  return out;
}

struct FoldContext {
  std::span<const double> distances;
  std::span<const double> responses;
  std::span<const double> weights;
  std::size_t n;
  double lambda;
  double sigma;
  const LooOptions& options;
};

// Explicit refit without observation i, evaluated at X_i.
double refit_fold(const FoldContext& ctx, std::size_t i) {
  std::vector<std::size_t> keep;
  keep.reserve(ctx.n - 1);
  for (std::size_t j = 0; j < ctx.n; ++j) {
    if (j != i) keep.push_back(j);
  }
  double sigma = ctx.sigma;
  if (ctx.options.sigma_per_fold) {
    const std::size_t m = keep.size();
    std::vector<double> sub(m * m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) sub[a * m + b] = ctx.distances[keep[a] * ctx.n + keep[b]];
    }
    std::vector<double> w(m);
    for (std::size_t a = 0; a < m; ++a) w[a] = ctx.weights[keep[a]];
    sigma = median_heuristic_sigma(sub, w);
  }
  const MatrixXd k = gram(ctx.distances, keep, ctx.options.kernel, sigma, ctx.n);
  const auto alpha =
      solve_weighted(k, gather(ctx.weights, keep), gather(ctx.responses, keep), ctx.lambda, false);
  if (!alpha) throw Error("singular kernel system; increase lambda");
  double pred = 0.0;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    pred += (*alpha)(static_cast<Eigen::Index>(a)) *
            krr_kernel(ctx.options.kernel, ctx.distances[i * ctx.n + keep[a]], sigma);
  }
  return pred;
}

// Hat-matrix shortcut: yhat_{-i} = (yhat_i - H_ii y_i) / (1 - H_ii) with
// H = K (W K + lambda I)^{-1} W. Entries with 1 - H_ii too small are empty.
std::optional<std::vector<std::optional<double>>> hat_matrix_loo(const FoldContext& ctx) {
  std::vector<std::size_t> all(ctx.n);
  for (std::size_t j = 0; j < ctx.n; ++j) all[j] = j;
  const MatrixXd k = gram(ctx.distances, all, ctx.options.kernel, ctx.sigma, ctx.n);
  const VectorXd w = gather(ctx.weights, all);
  const VectorXd y = gather(ctx.responses, all);
  MatrixXd a = w.asDiagonal() * k;
  a.diagonal().array() += ctx.lambda;
  const Eigen::PartialPivLU<MatrixXd> lu(a);
  if (!(lu.rcond() > std::numeric_limits<double>::epsilon())) return std::nullopt;
  const MatrixXd h = k * lu.solve(MatrixXd(w.asDiagonal()));
  const VectorXd yhat = h * y;
  std::vector<std::optional<double>> out(ctx.n);
  for (std::size_t i = 0; i < ctx.n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double denom = 1.0 - h(ii, ii);
    if (std::abs(denom) < 1e-10) continue;
    const double v = (yhat(ii) - h(ii, ii) * y(ii)) / denom;
    if (std::isfinite(v)) out[i] = v;
  }
  return out;
}

}  // namespace

KrrModel krr_fit(const SurveySample& sample, double lambda, const KrrOptions& options) {
  sample.validate();
  check_lambda(lambda);
  KrrModel model;
  model.metric = resolve_metric(sample, options.metric);
  model.kernel = options.kernel;
  model.lambda = lambda;
  model.predictors = sample.predictors;

  const std::size_t n = sample.size();
  const auto d = pairwise_distances(sample.predictors, model.metric);
  if (options.sigma) {
    check_sigma(*options.sigma);
    model.sigma = *options.sigma;
  } else {
    if (n < 2) throw Error("median heuristic needs at least 2 predictors; pass sigma");
    model.sigma = median_heuristic_sigma(d, sample.weights);
  }
  std::vector<std::size_t> all(n);
  for (std::size_t j = 0; j < n; ++j) all[j] = j;
  const MatrixXd k = gram(d, all, model.kernel, model.sigma, n);
  const auto alpha =
      solve_weighted(k, gather(sample.weights, all), gather(sample.responses, all), lambda, true);
  if (!alpha) throw Error("singular kernel system; increase lambda");
  model.alpha.assign(alpha->data(), alpha->data() + alpha->size());
  return model;
}

double krr_predict(const KrrModel& model, const Predictor& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.alpha.size(); ++i) {
    s += model.alpha[i] *
         krr_kernel(model.kernel, predictor_distance(x, model.predictors[i], model.metric),
                    model.sigma);
  }
  return s;
}

KrrLoo krr_loo(const SurveySample& sample, double lambda, double sigma,
               const LooOptions& options) {
  sample.validate();
  check_lambda(lambda);
  check_sigma(sigma);
  const std::size_t n = sample.size();
  if (n < 2) throw Error("leave-one-out needs at least 2 observations");
  const Metric metric = resolve_metric(sample, options.metric);
  const auto d = pairwise_distances(sample.predictors, metric);
  const FoldContext ctx{d, sample.responses, sample.weights, n, lambda, sigma, options};

  KrrLoo out;
  out.predictions.resize(n);
  const bool explicit_only =
      options.method == LooMethod::explicit_refit || options.sigma_per_fold;
  std::optional<std::vector<std::optional<double>>> fast;
  if (!explicit_only) fast = hat_matrix_loo(ctx);

  const bool equal_weights =
      std::all_of(sample.weights.begin(), sample.weights.end(),
                  [&](double w) { return w == sample.weights.front(); });
  const bool cross_check = options.method == LooMethod::automatic && !equal_weights;

  for (std::size_t i = 0; i < n; ++i) {
    const double* shortcut = fast && (*fast)[i] ? &*(*fast)[i] : nullptr;
    if (shortcut && !cross_check) {
      out.predictions[i] = *shortcut;
      continue;
    }
    const double refit = refit_fold(ctx, i);
    if (shortcut && std::abs(*shortcut - refit) <= options.tolerance * std::max(1.0, std::abs(refit))) {
      out.predictions[i] = *shortcut;
    } else {
      out.predictions[i] = refit;
      ++out.refits;
    }
  }
  return out;
}

double krr_select_lambda(const SurveySample& sample, double sigma,
                         std::span<const double> lambda_grid, const LooOptions& options) {
  if (lambda_grid.empty()) throw Error("empty lambda grid");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw Error("lambda grid entries must be positive");
  }
  std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  std::sort(grid.begin(), grid.end(), std::greater<>());
  double best_lambda = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    const auto loo = krr_loo(sample, lambda, sigma, options);
    double err = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const double r = sample.responses[i] - loo.predictions[i];
      err += sample.weights[i] * r * r;
    }
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

// ---------------------------------------------------------------------------
// Persistence

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::automatic:
      return "automatic";
    case Metric::wasserstein:
      return "wasserstein";
    case Metric::absolute:
      return "absolute";
  }
  return "unknown";
}

std::string to_string(KrrKernel kernel) {
  return kernel == KrrKernel::laplacian ? "laplacian" : "gaussian";
}

void save_model(const KrrModel& model, std::ostream& out) {
  nlohmann::json j;
  j["format"] = "actdist-krr";
  j["version"] = kModelFormatVersion;
  j["metric"] = to_string(model.metric);
  j["kernel"] = to_string(model.kernel);
  j["sigma"] = model.sigma;
  j["lambda"] = model.lambda;
  j["alpha"] = model.alpha;
  auto& preds = j["predictors"] = nlohmann::json::array();
  for (const auto& p : model.predictors) {
    if (is_grid(p)) {
      const auto v = std::get<QuantileGrid>(p).values();
      preds.push_back(std::vector<double>(v.begin(), v.end()));
    } else {
      preds.push_back(std::get<double>(p));
    }
  }
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed to write model");
}

KrrModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  try {
    if (j.at("format") != "actdist-krr") throw Error("not a kernel ridge model file");
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw Error("unsupported model format version");
    }
    KrrModel m;
    const auto metric = j.at("metric").get<std::string>();
    if (metric == "wasserstein") {
      m.metric = Metric::wasserstein;
    } else if (metric == "absolute") {
      m.metric = Metric::absolute;
    } else {
      throw Error("unknown metric '" + metric + "'");
    }
    const auto kernel = j.at("kernel").get<std::string>();
    if (kernel == "laplacian") {
      m.kernel = KrrKernel::laplacian;
    } else if (kernel == "gaussian") {
      m.kernel = KrrKernel::gaussian;
    } else {
      throw Error("unknown kernel '" + kernel + "'");
    }
    m.sigma = j.at("sigma").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.alpha = j.at("alpha").get<std::vector<double>>();
    for (const auto& p : j.at("predictors")) {
      if (p.is_array()) {
        m.predictors.emplace_back(QuantileGrid(p.get<std::vector<double>>()));
      } else {
        m.predictors.emplace_back(p.get<double>());
      }
    }
    if (m.predictors.size() != m.alpha.size()) throw Error("model predictors and alpha differ");
    check_sigma(m.sigma);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace actdist
