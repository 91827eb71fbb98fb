/**
 * @brief Reference classifiers: plug-in QDA/LDA, the Gaussian Bayes rule, and
 * BIC stepwise variable selection on the factored full likelihood.
 *
 * Class slot 0 is class 1 (code +1), slot 1 is class 2 (code -1).
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capsolver.hpp"
#include "dataset.hpp"
#include "features.hpp"
#include "parallel.hpp"

namespace capsqda {

struct GaussianClassModel {
  std::array<double, 2> pi{0.5, 0.5};
  std::array<Eigen::VectorXd, 2> mu;
  std::array<Eigen::MatrixXd, 2> sigma;
  // Optional exact precisions; when empty they are obtained by inverting sigma.
  std::array<Eigen::MatrixXd, 2> precision;

  Index p() const { return mu[0].size(); }

  void validate() const {
    if (!(pi[0] > 0.0) || !(pi[1] > 0.0) || std::abs(pi[0] + pi[1] - 1.0) > 1e-12)
      throw ConfigError("gaussian model: class probabilities must be positive and sum to 1");
    const Index p = mu[0].size();
    if (p < 1 || mu[1].size() != p) throw ConfigError("gaussian model: mean dimensions differ");
    for (int c = 0; c < 2; ++c) {
      const auto& S = sigma[c];
      if (S.rows() != p || S.cols() != p)
        throw ConfigError("gaussian model: covariance of class " + std::to_string(c + 1) +
                          " has the wrong shape");
      if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff()))
        throw ConfigError("gaussian model: covariance of class " + std::to_string(c + 1) +
                          " is not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0))
        throw NumericalError("gaussian model: covariance of class " + std::to_string(c + 1) +
                             " is not positive definite");
    }
  }
};

/// Builds a model from precision matrices; covariances are their inverses.
inline GaussianClassModel gaussian_from_precision(std::array<double, 2> pi,
                                                  std::array<Eigen::VectorXd, 2> mu,
                                                  std::array<Eigen::MatrixXd, 2> omega) {
  GaussianClassModel g;
  g.pi = pi;
  g.mu = std::move(mu);
  for (int c = 0; c < 2; ++c) {
    const Index p = omega[c].rows();
    Eigen::MatrixXd S = omega[c].llt().solve(Eigen::MatrixXd::Identity(p, p));
    g.sigma[c] = 0.5 * (S + S.transpose());
  }
  g.precision = std::move(omega);
  g.validate();
  return g;
}

namespace detail {

struct ClassDensity {
  Eigen::MatrixXd P;  // precision
  double logdet = 0.0;  // log det of the covariance
};

inline ClassDensity class_density(const GaussianClassModel& g, int c) {
  ClassDensity out;
  const Index p = g.p();
  if (g.precision[c].size()) {
    out.P = g.precision[c];
    Eigen::LLT<Eigen::MatrixXd> llt(out.P);
    if (llt.info() != Eigen::Success)
      throw NumericalError("class " + std::to_string(c + 1) + " precision is not positive definite");
    out.logdet = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(g.sigma[c]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("class " + std::to_string(c + 1) + " covariance is singular");
    out.P = llt.solve(Eigen::MatrixXd::Identity(p, p));
    out.P = 0.5 * (out.P + out.P.transpose());
    out.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  return out;
}

/// Relative eigenvalue test used for covariance MLEs.
inline bool nearly_singular(const Eigen::MatrixXd& S) {
  if (S.size() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return !(ev.minCoeff() > 1e-10 * std::max(ev.maxCoeff(), std::numeric_limits<double>::min()));
}

inline std::vector<Index> class_rows(const Dataset& d, int code) {
  std::vector<Index> idx;
  for (Index i = 0; i < d.n(); ++i)
    if (d.y[i] == code) idx.push_back(i);
  return idx;
}

inline int code_of_slot(int c) { return c == 0 ? kPositive : kNegative; }

}  // namespace detail

/// Plug-in QDA: class frequencies, means and divide-by-n_k covariances.
inline GaussianClassModel qda_fit(const Dataset& d) {
  d.validate(true);
  const Index p = d.p();
  GaussianClassModel g;
  for (int c = 0; c < 2; ++c) {
    const auto rows = detail::class_rows(d, detail::code_of_slot(c));
    const auto nk = static_cast<Index>(rows.size());
    if (nk < p + 1)
      throw NumericalError("qda: class " + std::to_string(c + 1) + " has " + std::to_string(nk) +
                           " observations, at least p+1 = " + std::to_string(p + 1) +
                           " are needed for a nonsingular covariance");
    Eigen::MatrixXd Xk(nk, p);
    for (Index r = 0; r < nk; ++r) Xk.row(r) = d.X.row(rows[static_cast<std::size_t>(r)]);
    g.pi[c] = static_cast<double>(nk) / static_cast<double>(d.n());
    g.mu[c] = Xk.colwise().mean().transpose();
    Xk.rowwise() -= g.mu[c].transpose();
    g.sigma[c] = (Xk.transpose() * Xk) / static_cast<double>(nk);
    if (detail::nearly_singular(g.sigma[c]))
      throw NumericalError("qda: covariance estimate of class " + std::to_string(c + 1) + " is singular");
  }
  return g;
}

/// LDA: as QDA but with the pooled (divide-by-n) within-class covariance.
inline GaussianClassModel lda_fit(const Dataset& d) {
  d.validate(true);
  const Index p = d.p();
  GaussianClassModel g;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
  for (int c = 0; c < 2; ++c) {
    const auto rows = detail::class_rows(d, detail::code_of_slot(c));
    const auto nk = static_cast<Index>(rows.size());
    Eigen::MatrixXd Xk(nk, p);
    for (Index r = 0; r < nk; ++r) Xk.row(r) = d.X.row(rows[static_cast<std::size_t>(r)]);
    g.pi[c] = static_cast<double>(nk) / static_cast<double>(d.n());
    g.mu[c] = Xk.colwise().mean().transpose();
    Xk.rowwise() -= g.mu[c].transpose();
    W += Xk.transpose() * Xk;
  }
  W /= static_cast<double>(d.n());
  if (detail::nearly_singular(W)) throw NumericalError("lda: pooled covariance estimate is singular");
  g.sigma = {W, W};
  return g;
}

/// delta_k(x) = -1/2 log det S_k - 1/2 (x-mu_k)' S_k^{-1} (x-mu_k) + log pi_k,
/// one row per observation, one column per class.
inline Eigen::MatrixXd qda_discriminants(const GaussianClassModel& g, const Eigen::MatrixXd& X) {
  if (X.cols() != g.p())
    throw DataError("qda: expected " + std::to_string(g.p()) + " columns, got " + std::to_string(X.cols()));
  Eigen::MatrixXd out(X.rows(), 2);
  for (int c = 0; c < 2; ++c) {
    const auto dens = detail::class_density(g, c);
    const Eigen::MatrixXd D = X.rowwise() - g.mu[c].transpose();
    const Eigen::VectorXd quad = (D * dens.P).cwiseProduct(D).rowwise().sum();
    out.col(c) = (-0.5 * quad).array() + (std::log(g.pi[c]) - 0.5 * dens.logdet);
  }
  return out;
}

inline std::array<double, 2> qda_discriminant(const GaussianClassModel& g, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd r = qda_discriminants(g, x.transpose());
  return {r(0, 0), r(0, 1)};
}

/// Arg max of the discriminants; a tie goes to class 2 (-1).
inline Eigen::VectorXi qda_classify(const GaussianClassModel& g, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd D = qda_discriminants(g, X);
  Eigen::VectorXi out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out[i] = D(i, 0) > D(i, 1) ? kPositive : kNegative;
  return out;
}

/// Q(x) = x' A x + x' delta + zeta with A = 1/2 (S2^{-1} - S1^{-1}).
struct OracleRule {
  Eigen::MatrixXd A;
  Eigen::VectorXd delta;
  double zeta = 0.0;

  Index p() const { return delta.size(); }

  /// The same rule in main/interaction form: main = delta, inter m = A_kk on
  /// the diagonal and 2 A_kl off it, beta0 = zeta.
  CoefficientVector to_coefficients() const {
    const Index p = delta.size();
    CoefficientVector c = CoefficientVector::zeros(p);
    c.beta0 = zeta;
    c.main = delta;
    Index m = 0;
    for (Index k = 0; k < p; ++k)
      for (Index l = k; l < p; ++l, ++m) c.inter[m] = k == l ? A(k, k) : 2.0 * A(k, l);
    return c;
  }

  Eigen::VectorXd values(const Eigen::MatrixXd& X) const {
    if (X.cols() != p())
      throw DataError("oracle: expected " + std::to_string(p()) + " columns, got " + std::to_string(X.cols()));
    Eigen::VectorXd q = (X * A).cwiseProduct(X).rowwise().sum();
    q += X * delta;
    q.array() += zeta;
    return q;
  }
};

inline OracleRule oracle_rule(const GaussianClassModel& g) {
  g.validate();
  const auto d1 = detail::class_density(g, 0);
  const auto d2 = detail::class_density(g, 1);
  OracleRule r;
  r.A = 0.5 * (d2.P - d1.P);
  r.A = 0.5 * (r.A + r.A.transpose());
  r.delta = d1.P * g.mu[0] - d2.P * g.mu[1];
  r.zeta = std::log(g.pi[0] / g.pi[1]) + 0.5 * (d2.logdet - d1.logdet) +
           0.5 * (g.mu[1].dot(d2.P * g.mu[1]) - g.mu[0].dot(d1.P * g.mu[0]));
  if (!std::isfinite(r.zeta)) throw NumericalError("oracle: non-finite constant term");
  return r;
}

/// +1 iff Q(x) > 0.
inline Eigen::VectorXi oracle_classify(const OracleRule& r, const Eigen::MatrixXd& X) {
  const Eigen::VectorXd q = r.values(X);
  Eigen::VectorXi out(q.size());
  for (Index i = 0; i < q.size(); ++i) out[i] = q[i] > 0.0 ? kPositive : kNegative;
  return out;
}

// ---------------------------------------------------------------------------
// BIC on the factored likelihood
//   P(x(S^c) | x(S)) * P(x(S) | g) * P(g)
// with a regression block pooled over classes.

struct BicScore {
  double loglik = 0.0;
  long df = 0;
  double bic = 0.0;
  bool singular = false;
  std::string reason;
};

inline long bic_df(Index p, Index s) {
  const long P = static_cast<long>(p), S = static_cast<long>(s), R = P - S;
  return 1 + 2 * (S + S * (S + 1) / 2) + R * (1 + S) + R * (R + 1) / 2;
}

namespace detail {

inline double gaussian_mle_loglik(double n, const Eigen::MatrixXd& S) {
  const double dim = static_cast<double>(S.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * n * (dim * std::log(2.0 * std::numbers::pi) + logdet + dim);
}

}  // namespace detail

/// S holds 0-based variable indices; it must be non-empty, sorted and unique.
inline BicScore bic_score(const Dataset& d, const std::vector<Index>& S) {
  const Index p = d.p(), n = d.n();
  if (S.empty()) throw ConfigError("bic: the relevant set must be non-empty");
  for (std::size_t i = 0; i < S.size(); ++i)
    if (S[i] < 0 || S[i] >= p || (i && S[i] <= S[i - 1]))
      throw ConfigError("bic: relevant set must be sorted, unique and within 1..p");
  std::vector<Index> Sc;
  for (Index j = 0, i = 0; j < p; ++j) {
    if (i < static_cast<Index>(S.size()) && S[static_cast<std::size_t>(i)] == j) ++i;
    else Sc.push_back(j);
  }
  const auto s = static_cast<Index>(S.size());
  BicScore out;
  out.df = bic_df(p, s);
  auto reject = [&](std::string why) {
    out.singular = true;
    out.reason = std::move(why);
    out.loglik = -std::numeric_limits<double>::infinity();
    out.bic = std::numeric_limits<double>::infinity();
    return out;
  };

  double ll = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto rows = detail::class_rows(d, detail::code_of_slot(c));
    const auto nk = static_cast<Index>(rows.size());
    if (nk == 0) return reject("class " + std::to_string(c + 1) + " is empty");
    ll += static_cast<double>(nk) * std::log(static_cast<double>(nk) / static_cast<double>(n));
    Eigen::MatrixXd Xk(nk, s);
    for (Index r = 0; r < nk; ++r)
      for (Index j = 0; j < s; ++j) Xk(r, j) = d.X(rows[static_cast<std::size_t>(r)], S[static_cast<std::size_t>(j)]);
    Xk.rowwise() -= Xk.colwise().mean();
    const Eigen::MatrixXd Sk = (Xk.transpose() * Xk) / static_cast<double>(nk);
    if (detail::nearly_singular(Sk))
      return reject("class " + std::to_string(c + 1) + " covariance on S is singular");
    ll += detail::gaussian_mle_loglik(static_cast<double>(nk), Sk);
  }

  if (!Sc.empty()) {
    Eigen::MatrixXd Z(n, s + 1);
    Z.col(0).setOnes();
    for (Index j = 0; j < s; ++j) Z.col(j + 1) = d.X.col(S[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd Yc(n, static_cast<Index>(Sc.size()));
    for (std::size_t j = 0; j < Sc.size(); ++j) Yc.col(static_cast<Index>(j)) = d.X.col(Sc[j]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < s + 1) return reject("regression design on S is rank deficient");
    const Eigen::MatrixXd R = Yc - Z * qr.solve(Yc);
    const Eigen::MatrixXd Se = (R.transpose() * R) / static_cast<double>(n);
    if (detail::nearly_singular(Se)) return reject("residual covariance of S^c given S is singular");
    ll += detail::gaussian_mle_loglik(static_cast<double>(n), Se);
  }

  out.loglik = ll;
  out.bic = -2.0 * ll + static_cast<double>(out.df) * std::log(static_cast<double>(n));
  return out;
}

struct BicSelection {
  std::vector<Index> S;  // 0-based, sorted
  double bic = 0.0;
  long evaluations = 0;
};

namespace detail {

inline std::vector<Index> with(std::vector<Index> S, Index j) {
  S.insert(std::lower_bound(S.begin(), S.end(), j), j);
  return S;
}

inline std::vector<Index> without(std::vector<Index> S, Index j) {
  S.erase(std::find(S.begin(), S.end(), j));
  return S;
}

/// Scores every candidate and returns (index into candidates, bic) of the
/// smallest BIC; ties keep the earliest candidate.
inline std::pair<std::size_t, double> best_candidate(const Dataset& d,
                                                     const std::vector<std::vector<Index>>& cands,
                                                     unsigned threads, long& evals) {
  std::vector<double> scores(cands.size());
  parallel_for(cands.size(), threads, [&](std::size_t i) { scores[i] = bic_score(d, cands[i]).bic; });
  evals += static_cast<long>(cands.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best]) best = i;
  return {best, scores.empty() ? std::numeric_limits<double>::infinity() : scores[best]};
}

}  // namespace detail

/// Backward elimination from the full set down to a strict local BIC minimum.
inline BicSelection bic_backward(const Dataset& d, unsigned threads = 1) {
  d.validate(true);
  BicSelection sel;
  for (Index j = 0; j < d.p(); ++j) sel.S.push_back(j);
  const BicScore full = bic_score(d, sel.S);
  sel.evaluations = 1;
  if (full.singular) throw NumericalError("BIC_b: the full model cannot be scored (" + full.reason + ")");
  sel.bic = full.bic;
  while (sel.S.size() > 1) {
    std::vector<std::vector<Index>> cands;
    for (Index j : sel.S) cands.push_back(detail::without(sel.S, j));
    const auto [i, b] = detail::best_candidate(d, cands, threads, sel.evaluations);
    if (!(b < sel.bic)) break;
    sel.S = cands[i];
    sel.bic = b;
  }
  return sel;
}

/// Forward-backward search from the best single variable, alternating one
/// addition and one deletion step while either strictly lowers BIC.
inline BicSelection bic_forward_backward(const Dataset& d, unsigned threads = 1) {
  d.validate(true);
  const Index p = d.p();
  BicSelection sel;
  std::vector<std::vector<Index>> singles;
  for (Index j = 0; j < p; ++j) singles.push_back({j});
  const auto [i0, b0] = detail::best_candidate(d, singles, threads, sel.evaluations);
  if (!std::isfinite(b0)) throw NumericalError("BIC_fb: no single variable can be scored");
  sel.S = singles[i0];
  sel.bic = b0;
  for (;;) {
    bool moved = false;
    if (static_cast<Index>(sel.S.size()) < p) {
      std::vector<std::vector<Index>> cands;
      for (Index j = 0; j < p; ++j)
        if (!std::binary_search(sel.S.begin(), sel.S.end(), j)) cands.push_back(detail::with(sel.S, j));
      const auto [i, b] = detail::best_candidate(d, cands, threads, sel.evaluations);
      if (b < sel.bic) {
        sel.S = cands[i];
        sel.bic = b;
        moved = true;
      }
    }
    if (sel.S.size() > 1) {
      std::vector<std::vector<Index>> cands;
      for (Index j : sel.S) cands.push_back(detail::without(sel.S, j));
      const auto [i, b] = detail::best_candidate(d, cands, threads, sel.evaluations);
      if (b < sel.bic) {
        sel.S = cands[i];
        sel.bic = b;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return sel;
}

}  // namespace capsqda
