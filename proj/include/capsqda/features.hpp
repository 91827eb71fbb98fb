/**
 * @brief Main/interaction expansion, centering and the cross-product cache
 * consumed by the coordinate descent solver.
 *
 * Indices are 0-based throughout. The interaction of predictors k <= l lives
 * at linear index m = k*p - k*(k-1)/2 + (l-k), which orders the expanded
 * vector as (x1^2, x1x2, ..., x1xp, x2^2, x2x3, ..., xp^2).
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dataset.hpp"

namespace capsqda {

inline constexpr Index interaction_count(Index p) { return p * (p + 1) / 2; }

inline Index pair_to_linear(Index k, Index l, Index p) {
  if (p < 1 || k < 0 || l < k || l >= p)
    throw ConfigError("pair_to_linear: need 0 <= k <= l < p (k=" + std::to_string(k) +
                      ", l=" + std::to_string(l) + ", p=" + std::to_string(p) + ")");
  return k * p - k * (k - 1) / 2 + (l - k);
}

inline std::pair<Index, Index> linear_to_pair(Index m, Index p) {
  if (p < 1 || m < 0 || m >= interaction_count(p))
    throw ConfigError("linear_to_pair: index " + std::to_string(m) + " out of range for p=" +
                      std::to_string(p));
  Index k = 0;
  Index row_start = 0;
  while (m >= row_start + (p - k)) {
    row_start += p - k;
    ++k;
  }
  return {k, k + (m - row_start)};
}

/// Unchecked index for symmetric access; callers guarantee range.
inline Index sym_index(Index k, Index l, Index p) {
  if (l < k) std::swap(k, l);
  return k * p - k * (k - 1) / 2 + (l - k);
}

inline Eigen::VectorXd expand_interactions(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Index p = x.size();
  if (p < 1) throw DataError("expand_interactions: empty vector");
  for (Index j = 0; j < p; ++j)
    if (!std::isfinite(x[j]))
      throw DataError("expand_interactions: non-finite value at coordinate " + std::to_string(j));
  Eigen::VectorXd out(interaction_count(p));
  Index m = 0;
  for (Index k = 0; k < p; ++k)
    for (Index l = k; l < p; ++l) out[m++] = x[k] * x[l];
  return out;
}

/// Row-wise expansion of an r x p matrix into r x p(p+1)/2.
inline Eigen::MatrixXd expand_interactions_rows(const Eigen::MatrixXd& X) {
  const Index p = X.cols();
  Eigen::MatrixXd out(X.rows(), interaction_count(p));
  Index m = 0;
  for (Index k = 0; k < p; ++k)
    for (Index l = k; l < p; ++l) out.col(m++) = X.col(k).cwiseProduct(X.col(l));
  return out;
}

struct CenteredDesign {
  Eigen::MatrixXd Xc;       // n x p, centered (and scaled when standardized)
  Eigen::MatrixXd Xtc;      // n x p(p+1)/2
  Eigen::VectorXd x_mean;   // training column means of X
  Eigen::VectorXd xt_mean;  // training column means of the raw interaction matrix
  Eigen::VectorXd x_scale;  // column divisors; all ones unless standardized
  Eigen::VectorXd xt_scale;
  Eigen::VectorXd yc;
  double y_mean = 0.0;

  Index n() const { return Xc.rows(); }
  Index p() const { return Xc.cols(); }
};

namespace detail {

inline bool column_is_constant(const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] != v[0]) return false;
  return true;
}

inline void center_columns(Eigen::MatrixXd& M, Eigen::VectorXd& mean, Eigen::VectorXd& scale,
                           bool standardize) {
  const auto n = static_cast<double>(M.rows());
  mean.resize(M.cols());
  scale = Eigen::VectorXd::Ones(M.cols());
  for (Index j = 0; j < M.cols(); ++j) {
    auto col = M.col(j);
    mean[j] = col.sum() / n;
    if (column_is_constant(col)) {
      col.setZero();
      continue;
    }
    col.array() -= mean[j];
    if (standardize) {
      const double sd = std::sqrt(col.squaredNorm() / n);
      if (sd > 0) {
        scale[j] = sd;
        col /= sd;
      }
    }
  }
}

}  // namespace detail

/**
 * Expands raw predictors into interactions (from the raw values), then
 * centers every main and interaction column and the labels. Constant columns
 * become exact zeros. Means are kept so test rows can be treated identically.
 */
inline CenteredDesign build_design(const Dataset& d, bool standardize = false) {
  d.validate(true);
  CenteredDesign cd;
  cd.Xtc = expand_interactions_rows(d.X);
  cd.Xc = d.X;
  detail::center_columns(cd.Xc, cd.x_mean, cd.x_scale, standardize);
  detail::center_columns(cd.Xtc, cd.xt_mean, cd.xt_scale, standardize);
  cd.y_mean = d.y.mean();
  cd.yc = d.y.array() - cd.y_mean;
  return cd;
}

struct GramCache {
  Eigen::VectorXd H;    // diag(G)
  Eigen::VectorXd Ht;   // diag(Gt)
  Eigen::MatrixXd G;    // Xc' Xc
  Eigen::MatrixXd Gt;   // Xtc' Xtc
  Eigen::MatrixXd B;    // Xc' Xtc
  Eigen::VectorXd C;    // Xc' yc
  Eigen::VectorXd Ct;   // Xtc' yc
  double yss = 0.0;     // yc' yc

  Index p() const { return G.rows(); }
  Index pt() const { return Gt.rows(); }
  bool main_degenerate(Index k) const { return H[k] == 0.0; }
  bool inter_degenerate(Index m) const { return Ht[m] == 0.0; }
};

inline constexpr std::size_t kDefaultGramCapBytes = std::size_t{8} << 30;

inline std::size_t gram_bytes_estimate(Index p) {
  const auto pd = static_cast<std::size_t>(p);
  const auto pt = static_cast<std::size_t>(interaction_count(p));
  return sizeof(double) * (pt * pt + pd * pd + pd * pt + 2 * (pd + pt));
}

inline GramCache build_gram(const CenteredDesign& cd,
                            std::size_t max_bytes = kDefaultGramCapBytes) {
  const Index p = cd.p();
  const Index pt = cd.Xtc.cols();
  if (pt != interaction_count(p) || cd.Xtc.rows() != cd.n() || cd.yc.size() != cd.n())
    throw ConfigError("build_gram: inconsistent design dimensions");
  const std::size_t need = gram_bytes_estimate(p);
  if (need > max_bytes)
    throw ConfigError("build_gram: cross-product cache for p=" + std::to_string(p) + " needs ~" +
                      std::to_string(need >> 20) + " MiB, above the cap of " +
                      std::to_string(max_bytes >> 20) + " MiB");

  GramCache g;
  g.G = Eigen::MatrixXd::Zero(p, p);
  g.G.selfadjointView<Eigen::Lower>().rankUpdate(cd.Xc.transpose());
  g.G.triangularView<Eigen::StrictlyUpper>() = g.G.transpose();
  g.Gt = Eigen::MatrixXd::Zero(pt, pt);
  g.Gt.selfadjointView<Eigen::Lower>().rankUpdate(cd.Xtc.transpose());
  g.Gt.triangularView<Eigen::StrictlyUpper>() = g.Gt.transpose();
  g.B = cd.Xc.transpose() * cd.Xtc;
  g.H = g.G.diagonal();
  g.Ht = g.Gt.diagonal();
  g.C = cd.Xc.transpose() * cd.yc;
  g.Ct = cd.Xtc.transpose() * cd.yc;
  g.yss = cd.yc.squaredNorm();
  if (!g.G.allFinite() || !g.Gt.allFinite() || !g.B.allFinite())
    throw NumericalError("build_gram: non-finite cross products (predictor scale too large?)");
  return g;
}

}  // namespace capsqda
