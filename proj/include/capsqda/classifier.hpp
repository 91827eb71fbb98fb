/**
 * @brief Sparse quadratic discriminant classifier built on CAP-penalized
 * least squares of the +1/-1 class codes on main and interaction effects.
 *
 * Workflow: build the (lambda2 x ratio) grid, pick a grid point by stratified
 * K-fold cross-validated misclassification rate, fit on the full data with
 * warm starts from the largest penalty down, recover the raw-scale
 * intercept, and refit ordinary least squares on the active effects when
 * there are fewer of them than observations.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capsolver.hpp"
#include "dataset.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace capsqda {

struct TuningGrid {
  std::vector<double> lambda2_values;  // strictly descending, positive
  std::vector<double> ratio_values;    // lambda1 = ratio * lambda2, each ratio > p

  std::size_t size() const { return lambda2_values.size() * ratio_values.size(); }

  void validate(Index p) const {
    if (lambda2_values.empty() || ratio_values.empty())
      throw ConfigError("grid: lambda2 and ratio lists must be non-empty");
    for (std::size_t i = 0; i < lambda2_values.size(); ++i) {
      if (!(lambda2_values[i] > 0.0) || !std::isfinite(lambda2_values[i]))
        throw ConfigError("grid: lambda2 values must be positive and finite");
      if (i > 0 && !(lambda2_values[i] < lambda2_values[i - 1]))
        throw ConfigError("grid: lambda2 values must be strictly descending");
    }
    for (double r : ratio_values)
      if (!(r > static_cast<double>(p)) || !std::isfinite(r))
        throw ConfigError("grid: every lambda1/lambda2 ratio must exceed p = " + std::to_string(p));
  }
};

struct GridSizes {
  int lambda2_count = 20;
  int ratio_count = 4;
  double epsilon = 1e-3;  // smallest lambda2 as a fraction of the largest
};

struct ActiveSets {
  std::vector<Index> main;   // k with nonzero main coefficient
  std::vector<Index> inter;  // m with nonzero interaction coefficient

  std::size_t size() const { return main.size() + inter.size(); }

  static ActiveSets of(const CoefficientVector& c) {
    ActiveSets s;
    for (Index k = 0; k < c.main.size(); ++k)
      if (c.main[k] != 0.0) s.main.push_back(k);
    for (Index m = 0; m < c.inter.size(); ++m)
      if (c.inter[m] != 0.0) s.inter.push_back(m);
    return s;
  }
};

struct CvPoint {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double error = 0.0;  // mean held-out misclassification rate
};

struct CvResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::size_t ratio_index = 0;
  std::size_t lambda2_index = 0;
  int folds_used = 0;
  std::vector<CvPoint> table;  // ratio-major, lambda2 descending within a ratio
  std::vector<std::string> warnings;
};

struct FitConfig {
  SolverConfig solver;
  GridSizes grid_sizes;
  std::optional<PenaltyConfig> penalty;  // set: skip cross-validation
  std::optional<TuningGrid> grid;        // set: use instead of the default grid
  int folds = 5;
  std::uint64_t seed = 0;
  bool refit = true;
  bool standardize = false;
  unsigned threads = 1;
  std::size_t gram_cap_bytes = kDefaultGramCapBytes;
};

struct ModelMetadata {
  std::optional<std::uint64_t> seed;
  std::string positive_label = "1";
  std::string negative_label = "-1";
  std::vector<std::string> features;
};

struct FittedModel {
  Index p = 0;
  Index n = 0;
  Eigen::VectorXd x_mean;
  Eigen::VectorXd xt_mean;
  double y_mean = 0.0;
  PenaltyConfig lambda;
  CoefficientVector coef;                     // penalized, raw scale
  std::optional<CoefficientVector> coef_refit;  // OLS on the active effects
  ActiveSets active;
  std::vector<CvPoint> cv_table;
  ModelMetadata meta;

  // Diagnostics from the fit; not persisted.
  SolverReport report;
  std::vector<std::string> warnings;
};

/// True when the zero vector is a global minimizer for `pen` (not merely
/// coordinate-wise stationary).
inline bool zero_is_optimal(const GramCache& g, const PenaltyConfig& pen, double tol = 1e-9) {
  const CoefficientVector zero = CoefficientVector::zeros(g.p());
  double scale = 1.0;
  if (g.C.size()) scale = std::max(scale, 2.0 * g.C.cwiseAbs().maxCoeff());
  if (g.Ct.size()) scale = std::max(scale, 2.0 * g.Ct.cwiseAbs().maxCoeff());
  return subgradient_certificate(g, zero, pen) <= tol * scale;
}

/// Smallest lambda2 at which every coordinate of the zero vector is
/// stationary: max(max_k 2|C_k| / p, max_m 2|Ct_m| / (p+1)).
inline double zero_stationary_lambda2(const GramCache& g) {
  const auto p = static_cast<double>(g.p());
  double top = 0.0;
  for (Index k = 0; k < g.C.size(); ++k) top = std::max(top, 2.0 * std::abs(g.C[k]) / p);
  for (Index m = 0; m < g.Ct.size(); ++m) top = std::max(top, 2.0 * std::abs(g.Ct[m]) / (p + 1.0));
  return top;
}

inline std::vector<double> default_ratios(Index p, int count) {
  std::vector<double> out;
  const auto pd = static_cast<double>(p);
  auto push = [&](double r) {
    if (static_cast<int>(out.size()) < count && (out.empty() || r > out.back())) out.push_back(r);
  };
  push(pd + 1.0);
  for (double mult = 2.0; static_cast<int>(out.size()) < count; mult *= 2.0) push(mult * pd);
  return out;
}

/**
 * Log-spaced lambda2 values from the top down to epsilon * top, crossed with
 * ratios {p+1, 2p, 4p, 8p, ...}. The top is the coordinate-stationarity
 * threshold, raised by bisection when needed so that zero is the global
 * minimizer there for every ratio in the grid.
 */
inline TuningGrid default_grid(const GramCache& g, const GridSizes& sizes = {}) {
  const Index p = g.p();
  if (sizes.lambda2_count < 1 || sizes.ratio_count < 1 || !(sizes.epsilon > 0 && sizes.epsilon < 1))
    throw ConfigError("default_grid: invalid grid sizes");
  const double stationary = zero_stationary_lambda2(g);
  if (!(stationary > 0.0))
    throw NumericalError("default_grid: centered labels are orthogonal to every effect "
                         "(degenerate problem, all-zero fit for any penalty)");
  TuningGrid grid;
  grid.ratio_values = default_ratios(p, sizes.ratio_count);
  const double r_min = grid.ratio_values.front();

  double top = stationary;
  if (!zero_is_optimal(g, {r_min * top, top})) {
    // Sufficient: interactions absorbed by lambda1 alone, each main spread
    // over its diagonal group plus (p-1) off-diagonal groups at 1/sqrt(2).
    const double main_cap = 1.0 + static_cast<double>(p - 1) / std::sqrt(2.0);
    double hi = stationary;
    for (Index k = 0; k < g.C.size(); ++k) hi = std::max(hi, 2.0 * std::abs(g.C[k]) / main_cap);
    for (Index m = 0; m < g.Ct.size(); ++m) hi = std::max(hi, 2.0 * std::abs(g.Ct[m]) / r_min);
    hi *= 1.0 + 1e-9;
    double lo = stationary;
    for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (zero_is_optimal(g, {r_min * mid, mid}) ? hi : lo) = mid;
    }
    top = hi;
  }

  const int count = sizes.lambda2_count;
  grid.lambda2_values.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.lambda2_values[static_cast<std::size_t>(i)] = top * std::pow(sizes.epsilon, frac);
  }
  grid.lambda2_values.front() = top;
  return grid;
}

/// Raw-scale coefficients with the intercept that makes the decision function
/// apply to uncentered rows: beta0 = ybar - xbar'b - xtbar'bt.
inline CoefficientVector to_raw_scale(const CenteredDesign& cd, const CoefficientVector& b) {
  CoefficientVector out;
  out.main = b.main.cwiseQuotient(cd.x_scale);
  out.inter = b.inter.cwiseQuotient(cd.xt_scale);
  out.beta0 = cd.y_mean - cd.x_mean.dot(out.main) - cd.xt_mean.dot(out.inter);
  return out;
}

/// beta0 + z'b + z~'bt for each row z of Z, without materializing z~.
inline Eigen::VectorXd decision_scores(const CoefficientVector& coef, const Eigen::MatrixXd& Z) {
  const Index p = coef.main.size();
  if (Z.cols() != p)
    throw DataError("predict: expected " + std::to_string(p) + " columns, got " +
                    std::to_string(Z.cols()));
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Index m = 0;
  for (Index k = 0; k < p; ++k) {
    for (Index l = k; l < p; ++l, ++m) {
      if (l == k) {
        A(k, k) = coef.inter[m];
      } else {
        A(k, l) = 0.5 * coef.inter[m];
        A(l, k) = 0.5 * coef.inter[m];
      }
    }
  }
  Eigen::VectorXd s = Z * coef.main;
  s += (Z * A).cwiseProduct(Z).rowwise().sum();
  s.array() += coef.beta0;
  return s;
}

/// +1 when the score is strictly positive, otherwise -1 (ties go to -1).
inline Eigen::VectorXi classify_scores(const Eigen::VectorXd& s) {
  Eigen::VectorXi out(s.size());
  for (Index i = 0; i < s.size(); ++i) out[i] = s[i] > 0.0 ? kPositive : kNegative;
  return out;
}

/// Warm-started solutions along descending lambda2 at a fixed ratio.
inline std::vector<SolveResult> fit_path(const GramCache& g, double ratio,
                                         const std::vector<double>& lambda2s,
                                         const SolverConfig& cfg) {
  std::vector<SolveResult> out;
  out.reserve(lambda2s.size());
  CoefficientVector warm = CoefficientVector::zeros(g.p());
  for (double l2 : lambda2s) {
    out.push_back(coordinate_descent(g, {ratio * l2, l2}, warm, cfg));
    warm = out.back().coef;
  }
  return out;
}

namespace detail {

inline double misclassification(const CoefficientVector& raw, const Dataset& held) {
  const Eigen::VectorXi pred = classify_scores(decision_scores(raw, held.X));
  Index wrong = 0;
  for (Index i = 0; i < pred.size(); ++i) wrong += (pred[i] != static_cast<int>(held.y[i]));
  return static_cast<double>(wrong) / static_cast<double>(held.n());
}

}  // namespace detail

/// Stratified fold labels in [0, folds); classes are shuffled separately and
/// dealt round-robin with a shared counter so fold sizes stay balanced.
inline std::vector<int> stratified_folds(const Eigen::VectorXd& y, int folds, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, "cv-folds");
  std::vector<int> assign(static_cast<std::size_t>(y.size()), 0);
  int next = 0;
  for (int code : {kPositive, kNegative}) {
    std::vector<Index> idx;
    for (Index i = 0; i < y.size(); ++i)
      if (y[i] == code) idx.push_back(i);
    shuffle_in_place(idx, rng);
    for (Index i : idx) {
      assign[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % folds;
    }
  }
  return assign;
}

inline CvResult cross_validate(const Dataset& d, const TuningGrid& grid, const FitConfig& cfg) {
  d.validate(true);
  grid.validate(d.p());
  CvResult res;
  const Index smallest = std::min(d.count(kPositive), d.count(kNegative));
  int folds = cfg.folds;
  if (folds < 2) throw ConfigError("cross_validate: need at least 2 folds");
  if (smallest < 2) throw DataError("cross_validate: each class needs at least 2 observations");
  if (smallest < folds) {
    res.warnings.push_back("cross_validate: smallest class has " + std::to_string(smallest) +
                           " observations; reducing folds from " + std::to_string(folds) +
                           " to " + std::to_string(smallest));
    folds = static_cast<int>(smallest);
  }
  res.folds_used = folds;
  const std::vector<int> assign = stratified_folds(d.y, folds, cfg.seed);

  const std::size_t nr = grid.ratio_values.size(), nl = grid.lambda2_values.size();
  std::vector<std::vector<double>> fold_err(static_cast<std::size_t>(folds),
                                            std::vector<double>(nr * nl, 0.0));
  parallel_for(static_cast<std::size_t>(folds), cfg.threads, [&](std::size_t f) {
    std::vector<Index> train, held;
    for (Index i = 0; i < d.n(); ++i)
      (assign[static_cast<std::size_t>(i)] == static_cast<int>(f) ? held : train).push_back(i);
    const Dataset dtrain = d.rows(train), dheld = d.rows(held);
    const CenteredDesign cd = build_design(dtrain, cfg.standardize);
    const GramCache g = build_gram(cd, cfg.gram_cap_bytes);
    for (std::size_t r = 0; r < nr; ++r) {
      const auto path = fit_path(g, grid.ratio_values[r], grid.lambda2_values, cfg.solver);
      for (std::size_t j = 0; j < nl; ++j)
        fold_err[f][r * nl + j] = detail::misclassification(to_raw_scale(cd, path[j].coef), dheld);
    }
  });

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t j = 0; j < nl; ++j) {
      double err = 0.0;
      for (int f = 0; f < folds; ++f) err += fold_err[static_cast<std::size_t>(f)][r * nl + j];
      err /= folds;
      const double l2 = grid.lambda2_values[j];
      res.table.push_back({grid.ratio_values[r] * l2, l2, err});
      // Ties: larger lambda2 first, then larger ratio.
      const bool better = err < best ||
                          (err == best && (j < res.lambda2_index ||
                                           (j == res.lambda2_index && r > res.ratio_index)));
      if (better) {
        best = err;
        res.ratio_index = r;
        res.lambda2_index = j;
      }
    }
  }
  res.lambda2 = grid.lambda2_values[res.lambda2_index];
  res.lambda1 = grid.ratio_values[res.ratio_index] * res.lambda2;
  return res;
}

/// OLS of yc on the active centered columns; nullopt when singular.
inline std::optional<CoefficientVector> refit_active(const CenteredDesign& cd, const ActiveSets& s) {
  const Index k = static_cast<Index>(s.size());
  CoefficientVector solver_scale = CoefficientVector::zeros(cd.p());
  if (k > 0) {
    Eigen::MatrixXd Z(cd.n(), k);
    Index c = 0;
    for (Index j : s.main) Z.col(c++) = cd.Xc.col(j);
    for (Index m : s.inter) Z.col(c++) = cd.Xtc.col(m);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) return std::nullopt;
    const Eigen::VectorXd b = qr.solve(cd.yc);
    if (!b.allFinite()) return std::nullopt;
    c = 0;
    for (Index j : s.main) solver_scale.main[j] = b[c++];
    for (Index m : s.inter) solver_scale.inter[m] = b[c++];
  }
  return to_raw_scale(cd, solver_scale);
}

inline FittedModel fit(const Dataset& d, const FitConfig& cfg = {}) {
  d.validate(true);
  const CenteredDesign cd = build_design(d, cfg.standardize);
  const GramCache g = build_gram(cd, cfg.gram_cap_bytes);

  FittedModel model;
  model.p = d.p();
  model.n = d.n();
  model.x_mean = cd.x_mean;
  model.xt_mean = cd.xt_mean;
  model.y_mean = cd.y_mean;
  model.meta.features = d.names;

  SolveResult sol;
  if (cfg.penalty) {
    model.lambda = *cfg.penalty;
    sol = coordinate_descent(g, model.lambda, CoefficientVector::zeros(d.p()), cfg.solver);
  } else {
    const TuningGrid grid = cfg.grid ? *cfg.grid : default_grid(g, cfg.grid_sizes);
    CvResult cv = cross_validate(d, grid, cfg);
    model.meta.seed = cfg.seed;
    model.cv_table = std::move(cv.table);
    model.warnings = std::move(cv.warnings);
    model.lambda = {cv.lambda1, cv.lambda2};
    const std::vector<double> prefix(grid.lambda2_values.begin(),
                                     grid.lambda2_values.begin() +
                                         static_cast<std::ptrdiff_t>(cv.lambda2_index + 1));
    auto path = fit_path(g, grid.ratio_values[cv.ratio_index], prefix, cfg.solver);
    sol = std::move(path.back());
  }
  model.report = sol.report;
  if (!sol.report.converged)
    model.warnings.push_back("solver stopped after " + std::to_string(sol.report.sweeps) +
                             " sweeps without meeting the tolerances");
  model.coef = to_raw_scale(cd, sol.coef);
  model.active = ActiveSets::of(sol.coef);
  if (cfg.refit && static_cast<Index>(model.active.size()) < d.n()) {
    model.coef_refit = refit_active(cd, model.active);
    if (!model.coef_refit)
      model.warnings.push_back("OLS refit on the active effects is singular; refit dropped");
  }
  return model;
}

inline Eigen::VectorXd predict_scores(const FittedModel& model, const Eigen::MatrixXd& Z,
                                      bool use_refit = false) {
  if (use_refit && !model.coef_refit)
    throw ConfigError("predict: model has no OLS refit coefficients");
  return decision_scores(use_refit ? *model.coef_refit : model.coef, Z);
}

inline Eigen::VectorXi predict(const FittedModel& model, const Eigen::MatrixXd& Z,
                               bool use_refit = false) {
  return classify_scores(predict_scores(model, Z, use_refit));
}

}  // namespace capsqda
