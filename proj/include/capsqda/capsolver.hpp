/**
 * @brief Coordinate descent for composite-absolute-penalty least squares.
 *
 * Minimizes over centered data
 *
 *   ||yc - Xc b - Xtc bt||^2
 *     + sum_{k<=l} [ lambda1 |bt_{kl}| + lambda2 ||v(b_k, b_l, bt_{kl})||_2 ]
 *
 * where v = (b_k, b_l, bt_kl) for k < l and (b_k, bt_kk) for k = l. Each
 * coordinate step solves its one-dimensional restriction exactly.
 *
 * The group norms overlap, so a point where every coordinate is optimal can
 * still admit a joint descent direction through several zero coordinates.
 * After coordinate convergence the solver computes the minimum-norm
 * subgradient; a nonzero one gives such a direction, and the solver takes an
 * exact line step along it before resuming the sweeps.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "features.hpp"
#include "scalar.hpp"

namespace capsqda {

struct PenaltyConfig {
  double lambda1 = 0.0;  // weight on |interaction|
  double lambda2 = 0.0;  // weight on each group norm

  void validate() const {
    if (!(std::isfinite(lambda1) && std::isfinite(lambda2)) || lambda1 < 0 || lambda2 < 0)
      throw ConfigError("penalty: lambda1 and lambda2 must be finite and non-negative");
  }
};

struct CoefficientVector {
  double beta0 = 0.0;
  Eigen::VectorXd main;   // length p
  Eigen::VectorXd inter;  // length p(p+1)/2, indexed by pair_to_linear

  static CoefficientVector zeros(Index p) {
    return {0.0, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(interaction_count(p))};
  }
  Index p() const { return main.size(); }
  bool all_zero() const {
    return (main.array() == 0.0).all() && (inter.array() == 0.0).all();
  }
};

struct SolverConfig {
  double coord_tol = 1e-7;
  double obj_tol = 1e-9;
  double kkt_tol = 1e-7;
  int max_sweeps = 1000;
  double scalar_tol = 1e-10;
  bool escape = true;
  int max_escapes = 50;
};

struct SolverReport {
  std::vector<double> objective_trace;  // one entry per sweep or escape step
  int sweeps = 0;
  int escapes = 0;
  bool converged = false;
  double max_kkt_violation = 0.0;
  double subgradient_norm = 0.0;  // inf-norm of the minimum-norm subgradient at exit
};

struct SolveResult {
  CoefficientVector coef;
  SolverReport report;
};

inline double cap_penalty(const CoefficientVector& beta, const PenaltyConfig& pen) {
  const Index p = beta.p();
  double total = 0.0;
  Index m = 0;
  for (Index k = 0; k < p; ++k) {
    for (Index l = k; l < p; ++l, ++m) {
      const double bkl = beta.inter[m];
      double sq = beta.main[k] * beta.main[k] + bkl * bkl;
      if (l != k) sq += beta.main[l] * beta.main[l];
      total += pen.lambda1 * std::abs(bkl) + pen.lambda2 * std::sqrt(sq);
    }
  }
  return total;
}

namespace detail {

// q = Gfull * beta - Cfull, split into main and interaction blocks.
inline void gradient_core(const GramCache& g, const CoefficientVector& beta,
                          Eigen::VectorXd& q_main, Eigen::VectorXd& q_int) {
  q_main.noalias() = g.G * beta.main;
  q_main.noalias() += g.B * beta.inter;
  q_main -= g.C;
  q_int.noalias() = g.B.transpose() * beta.main;
  q_int.noalias() += g.Gt * beta.inter;
  q_int -= g.Ct;
}

inline double rss_from_core(const GramCache& g, const CoefficientVector& beta,
                            const Eigen::VectorXd& q_main, const Eigen::VectorXd& q_int) {
  return g.yss + beta.main.dot(q_main) + beta.inter.dot(q_int) - g.C.dot(beta.main) -
         g.Ct.dot(beta.inter);
}

inline void main_penalty_terms(Index k, const CoefficientVector& beta, const PenaltyConfig& pen,
                               ScalarSubproblem& sp) {
  const Index p = beta.p();
  sp.e.clear();
  for (Index l = 0; l < p; ++l) {
    const double bkl = beta.inter[sym_index(k, l, p)];
    const double e = (l != k ? beta.main[l] * beta.main[l] : 0.0) + bkl * bkl;
    if (e > 0.0) sp.e.push_back(e);
  }
  const auto s = static_cast<double>(sp.e.size());
  sp.c = (static_cast<double>(p) - s) * pen.lambda2;
  sp.d = pen.lambda2;
}

inline void inter_penalty_terms(Index k, Index l, const CoefficientVector& beta,
                                const PenaltyConfig& pen, ScalarSubproblem& sp) {
  sp.e.clear();
  const double e = (k != l) ? beta.main[k] * beta.main[k] + beta.main[l] * beta.main[l]
                            : beta.main[k] * beta.main[k];
  if (e > 0.0) sp.e.push_back(e);
  const bool s_one = !sp.e.empty();
  sp.c = pen.lambda1 + (s_one ? 0.0 : pen.lambda2);
  sp.d = s_one ? pen.lambda2 : 0.0;
}

inline double coordinate_violation(const ScalarSubproblem& sp, double theta) {
  if (theta == 0.0) return std::max(0.0, std::abs(sp.b) - sp.c);
  return std::abs(scalar_stationarity(sp, theta));
}

inline double kkt_from_core(const GramCache& g, const CoefficientVector& beta,
                            const PenaltyConfig& pen, const Eigen::VectorXd& q_main,
                            const Eigen::VectorXd& q_int) {
  const Index p = beta.p();
  ScalarSubproblem sp;
  double worst = 0.0;
  for (Index k = 0; k < p; ++k) {
    if (g.main_degenerate(k)) continue;
    sp.a = g.H[k];
    sp.b = 2.0 * (q_main[k] - g.H[k] * beta.main[k]);
    main_penalty_terms(k, beta, pen, sp);
    worst = std::max(worst, coordinate_violation(sp, beta.main[k]));
  }
  Index m = 0;
  for (Index k = 0; k < p; ++k) {
    for (Index l = k; l < p; ++l, ++m) {
      if (g.inter_degenerate(m)) continue;
      sp.a = g.Ht[m];
      sp.b = 2.0 * (q_int[m] - g.Ht[m] * beta.inter[m]);
      inter_penalty_terms(k, l, beta, pen, sp);
      worst = std::max(worst, coordinate_violation(sp, beta.inter[m]));
    }
  }
  return worst;
}

/**
 * Minimum-norm element of the subdifferential, restricted to the zero
 * (non-degenerate) coordinates, by block coordinate descent over the free
 * sign variables of zero interactions and the unit balls of zero groups.
 * Returns it packed as (main, inter); nonzero coordinates are left at 0.
 */
inline CoefficientVector min_norm_subgradient(const GramCache& g, const CoefficientVector& beta,
                                              const PenaltyConfig& pen,
                                              const Eigen::VectorXd& q_main,
                                              const Eigen::VectorXd& q_int, int max_passes = 2000) {
  const Index p = beta.p();
  const Index pt = interaction_count(p);
  Eigen::VectorXd w_main = 2.0 * q_main;
  Eigen::VectorXd w_int = 2.0 * q_int;

  for (Index m = 0; m < pt; ++m)
    if (beta.inter[m] != 0.0) w_int[m] += pen.lambda1 * (beta.inter[m] > 0 ? 1.0 : -1.0);

  struct ZeroGroup {
    Index k, l, m;
  };
  std::vector<ZeroGroup> zero_groups;
  Index m = 0;
  for (Index k = 0; k < p; ++k) {
    for (Index l = k; l < p; ++l, ++m) {
      const double bk = beta.main[k];
      const double bl = (l != k) ? beta.main[l] : 0.0;
      const double bm = beta.inter[m];
      const double norm = std::sqrt(bk * bk + bl * bl + bm * bm);
      if (norm > 0.0) {
        w_main[k] += pen.lambda2 * bk / norm;
        if (l != k) w_main[l] += pen.lambda2 * bl / norm;
        w_int[m] += pen.lambda2 * bm / norm;
      } else if (pen.lambda2 > 0.0) {
        zero_groups.push_back({k, l, m});
      }
    }
  }

  std::vector<bool> free_main(static_cast<std::size_t>(p)), free_int(static_cast<std::size_t>(pt));
  for (Index k = 0; k < p; ++k)
    free_main[static_cast<std::size_t>(k)] = beta.main[k] == 0.0 && !g.main_degenerate(k);
  for (Index j = 0; j < pt; ++j)
    free_int[static_cast<std::size_t>(j)] = beta.inter[j] == 0.0 && !g.inter_degenerate(j);

  std::vector<Index> sign_vars;
  if (pen.lambda1 > 0.0)
    for (Index j = 0; j < pt; ++j)
      if (free_int[static_cast<std::size_t>(j)]) sign_vars.push_back(j);
  std::vector<double> s(sign_vars.size(), 0.0);
  std::vector<double> u(3 * zero_groups.size(), 0.0);

  const double scale = std::max({1.0, w_main.cwiseAbs().maxCoeff(),
                                 pt > 0 ? w_int.cwiseAbs().maxCoeff() : 0.0});
  for (int pass = 0; pass < max_passes; ++pass) {
    double moved = 0.0;
    for (std::size_t i = 0; i < sign_vars.size(); ++i) {
      const Index j = sign_vars[i];
      const double rest = w_int[j] - pen.lambda1 * s[i];
      const double next = std::clamp(-rest / pen.lambda1, -1.0, 1.0);
      const double nw = rest + pen.lambda1 * next;
      moved = std::max(moved, std::abs(nw - w_int[j]));
      w_int[j] = nw;
      s[i] = next;
    }
    for (std::size_t gi = 0; gi < zero_groups.size(); ++gi) {
      const auto& zg = zero_groups[gi];
      double* ug = &u[3 * gi];
      const bool fk = free_main[static_cast<std::size_t>(zg.k)];
      const bool fl = zg.l != zg.k && free_main[static_cast<std::size_t>(zg.l)];
      const bool fm = free_int[static_cast<std::size_t>(zg.m)];
      const double rk = fk ? w_main[zg.k] - pen.lambda2 * ug[0] : 0.0;
      const double rl = fl ? w_main[zg.l] - pen.lambda2 * ug[1] : 0.0;
      const double rm = fm ? w_int[zg.m] - pen.lambda2 * ug[2] : 0.0;
      double vk = -rk / pen.lambda2, vl = -rl / pen.lambda2, vm = -rm / pen.lambda2;
      const double nv = std::sqrt(vk * vk + vl * vl + vm * vm);
      if (nv > 1.0) {
        vk /= nv;
        vl /= nv;
        vm /= nv;
      }
      if (fk) {
        const double nw = rk + pen.lambda2 * vk;
        moved = std::max(moved, std::abs(nw - w_main[zg.k]));
        w_main[zg.k] = nw;
      }
      if (fl) {
        const double nw = rl + pen.lambda2 * vl;
        moved = std::max(moved, std::abs(nw - w_main[zg.l]));
        w_main[zg.l] = nw;
      }
      if (fm) {
        const double nw = rm + pen.lambda2 * vm;
        moved = std::max(moved, std::abs(nw - w_int[zg.m]));
        w_int[zg.m] = nw;
      }
      ug[0] = vk;
      ug[1] = vl;
      ug[2] = vm;
    }
    if (moved <= 1e-15 * scale) break;
  }

  CoefficientVector out = CoefficientVector::zeros(p);
  for (Index k = 0; k < p; ++k)
    if (free_main[static_cast<std::size_t>(k)]) out.main[k] = w_main[k];
  for (Index j = 0; j < pt; ++j)
    if (free_int[static_cast<std::size_t>(j)]) out.inter[j] = w_int[j];
  return out;
}

inline double inf_norm(const CoefficientVector& v) {
  double r = v.main.size() ? v.main.cwiseAbs().maxCoeff() : 0.0;
  if (v.inter.size()) r = std::max(r, v.inter.cwiseAbs().maxCoeff());
  return r;
}

class CoordinateDescent {
public:
  CoordinateDescent(const GramCache& g, const PenaltyConfig& pen, const SolverConfig& cfg)
      : g_(g), pen_(pen), cfg_(cfg), p_(g.p()) {}

  SolveResult run(CoefficientVector beta) {
    beta.beta0 = 0.0;
    for (Index k = 0; k < p_; ++k)
      if (g_.main_degenerate(k)) beta.main[k] = 0.0;
    for (Index m = 0; m < beta.inter.size(); ++m)
      if (g_.inter_degenerate(m)) beta.inter[m] = 0.0;
    beta_ = std::move(beta);
    refresh();

    SolverReport rep;
    double obj = objective();
    double kkt = std::numeric_limits<double>::infinity();
    bool kkt_current = false;
    for (int sweep = 1; sweep <= cfg_.max_sweeps; ++sweep) {
      const double change = sweep_once();
      rep.sweeps = sweep;
      const double next = objective();
      rep.objective_trace.push_back(next);
      const double rel = (obj - next) / std::max(std::abs(obj), 1e-300);
      obj = next;
      kkt_current = false;
      if (change > cfg_.coord_tol && rel > cfg_.obj_tol) continue;
      refresh();
      kkt = kkt_from_core(g_, beta_, pen_, q_main_, q_int_);
      kkt_current = true;
      if (kkt > cfg_.kkt_tol) {
        // Coupled coordinates can decay toward zero geometrically without
        // ever reaching it; snap them once they are negligible.
        if (try_snap(obj)) {
          obj = objective();
          rep.objective_trace.push_back(obj);
          kkt_current = false;
        }
        continue;
      }
      if (cfg_.escape && rep.escapes < cfg_.max_escapes && try_escape(obj, rep.subgradient_norm)) {
        ++rep.escapes;
        obj = objective();
        rep.objective_trace.push_back(obj);
        kkt_current = false;
        continue;
      }
      rep.converged = true;
      break;
    }
    if (!kkt_current) {
      refresh();
      kkt = kkt_from_core(g_, beta_, pen_, q_main_, q_int_);
    }
    rep.max_kkt_violation = kkt;
    return {std::move(beta_), std::move(rep)};
  }

private:
  void refresh() { gradient_core(g_, beta_, q_main_, q_int_); }

  double objective() const {
    return rss_from_core(g_, beta_, q_main_, q_int_) + cap_penalty(beta_, pen_);
  }

  void shift_main(Index k, double delta) {
    q_main_.noalias() += delta * g_.G.col(k);
    q_int_.noalias() += delta * g_.B.row(k).transpose();
  }

  void shift_inter(Index m, double delta) {
    q_main_.noalias() += delta * g_.B.col(m);
    q_int_.noalias() += delta * g_.Gt.col(m);
  }

  double sweep_once() {
    double max_change = 0.0;
    for (Index k = 0; k < p_; ++k) {
      if (g_.main_degenerate(k)) continue;
      sp_.a = g_.H[k];
      sp_.b = 2.0 * (q_main_[k] - g_.H[k] * beta_.main[k]);
      main_penalty_terms(k, beta_, pen_, sp_);
      const double theta = solve_scalar(sp_, cfg_.scalar_tol);
      const double delta = theta - beta_.main[k];
      if (delta != 0.0) {
        beta_.main[k] = theta;
        shift_main(k, delta);
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    Index m = 0;
    for (Index k = 0; k < p_; ++k) {
      for (Index l = k; l < p_; ++l, ++m) {
        if (g_.inter_degenerate(m)) continue;
        sp_.a = g_.Ht[m];
        sp_.b = 2.0 * (q_int_[m] - g_.Ht[m] * beta_.inter[m]);
        inter_penalty_terms(k, l, beta_, pen_, sp_);
        const double theta = solve_scalar(sp_, cfg_.scalar_tol);
        const double delta = theta - beta_.inter[m];
        if (delta != 0.0) {
          beta_.inter[m] = theta;
          shift_inter(m, delta);
          max_change = std::max(max_change, std::abs(delta));
        }
      }
    }
    return max_change;
  }

  bool try_snap(double obj0) {
    const double cut = kSnapRelative * std::max(1.0, inf_norm(beta_));
    CoefficientVector trial = beta_;
    bool any = false;
    for (Index k = 0; k < p_; ++k)
      if (trial.main[k] != 0.0 && std::abs(trial.main[k]) <= cut) trial.main[k] = 0.0, any = true;
    for (Index m = 0; m < trial.inter.size(); ++m)
      if (trial.inter[m] != 0.0 && std::abs(trial.inter[m]) <= cut) trial.inter[m] = 0.0, any = true;
    if (!any) return false;
    std::swap(beta_, trial);
    refresh();
    if (objective() <= obj0 + 1e-14 * std::abs(obj0)) return true;
    std::swap(beta_, trial);
    refresh();
    return false;
  }

  static constexpr double kSnapRelative = 1e-10;

  // Line step along minus the minimum-norm subgradient. Returns true when the
  // objective decreased.
  bool try_escape(double obj0, double& subgrad_norm) {
    CoefficientVector w = min_norm_subgradient(g_, beta_, pen_, q_main_, q_int_);
    subgrad_norm = inf_norm(w);
    if (subgrad_norm <= cfg_.kkt_tol) return false;

    CoefficientVector dir = CoefficientVector::zeros(p_);
    dir.main = -w.main;
    dir.inter = -w.inter;
    // Along the ray the squared loss is an exact quadratic in t.
    const double slope = 2.0 * (dir.main.dot(q_main_) + dir.inter.dot(q_int_));
    const double curv = dir.main.dot(g_.G * dir.main) + 2.0 * dir.main.dot(g_.B * dir.inter) +
                        dir.inter.dot(g_.Gt * dir.inter);
    const double rss0 = rss_from_core(g_, beta_, q_main_, q_int_);
    CoefficientVector trial = beta_;
    auto phi = [&](double t) {
      trial.main = beta_.main + t * dir.main;
      trial.inter = beta_.inter + t * dir.inter;
      return rss0 + t * slope + t * t * curv + cap_penalty(trial, pen_);
    };

    const double dd = dir.main.squaredNorm() + dir.inter.squaredNorm();
    double hi = curv > 0 ? dd / (2.0 * curv) : 1.0;
    double f_hi = phi(hi);
    for (int i = 0; i < 60 && phi(2.0 * hi) < f_hi; ++i) {
      hi *= 2.0;
      f_hi = phi(hi);
    }
    double lo = 0.0;
    double upper = 2.0 * hi;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = upper - ratio * (upper - lo), x2 = lo + ratio * (upper - lo);
    double f1 = phi(x1), f2 = phi(x2);
    for (int i = 0; i < 100 && upper - lo > 1e-14 * upper; ++i) {
      if (f1 <= f2) {
        upper = x2;
        x2 = x1;
        f2 = f1;
        x1 = upper - ratio * (upper - lo);
        f1 = phi(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + ratio * (upper - lo);
        f2 = phi(x2);
      }
    }
    const double t = f1 <= f2 ? x1 : x2;
    const double f_t = std::min(f1, f2);
    if (!(f_t < obj0 - 1e-13 * std::max(1.0, std::abs(obj0)))) return false;
    beta_.main += t * dir.main;
    beta_.inter += t * dir.inter;
    refresh();
    return true;
  }

  const GramCache& g_;
  PenaltyConfig pen_;
  SolverConfig cfg_;
  Index p_;
  CoefficientVector beta_;
  Eigen::VectorXd q_main_, q_int_;
  ScalarSubproblem sp_;
};

}  // namespace detail

/// Squared loss plus penalty, evaluated from the cross-product cache.
inline double cap_objective(const GramCache& g, const CoefficientVector& beta,
                            const PenaltyConfig& pen) {
  Eigen::VectorXd qm, qi;
  detail::gradient_core(g, beta, qm, qi);
  return detail::rss_from_core(g, beta, qm, qi) + cap_penalty(beta, pen);
}

/// Squared loss plus penalty, evaluated directly on a centered design.
inline double cap_objective(const CenteredDesign& cd, const CoefficientVector& beta,
                            const PenaltyConfig& pen) {
  const Eigen::VectorXd r = cd.yc - cd.Xc * beta.main - cd.Xtc * beta.inter;
  return r.squaredNorm() + cap_penalty(beta, pen);
}

inline ScalarSubproblem main_update_params(Index k, const CoefficientVector& beta,
                                           const GramCache& g, const PenaltyConfig& pen) {
  const Index p = g.p();
  if (k < 0 || k >= p) throw ConfigError("main_update_params: k out of range");
  ScalarSubproblem sp;
  sp.a = g.H[k];
  double lin = g.B.row(k).dot(beta.inter) - g.C[k];
  for (Index j = 0; j < p; ++j)
    if (j != k) lin += g.G(k, j) * beta.main[j];
  sp.b = 2.0 * lin;
  detail::main_penalty_terms(k, beta, pen, sp);
  return sp;
}

inline ScalarSubproblem inter_update_params(Index k, Index l, const CoefficientVector& beta,
                                            const GramCache& g, const PenaltyConfig& pen) {
  const Index p = g.p();
  const Index m = pair_to_linear(k, l, p);
  ScalarSubproblem sp;
  sp.a = g.Ht[m];
  double lin = g.B.col(m).dot(beta.main) - g.Ct[m];
  for (Index j = 0; j < g.pt(); ++j)
    if (j != m) lin += g.Gt(m, j) * beta.inter[j];
  sp.b = 2.0 * lin;
  detail::inter_penalty_terms(k, l, beta, pen, sp);
  return sp;
}

/// Largest coordinate-wise optimality violation (degenerate coordinates skipped).
inline double kkt_violation(const GramCache& g, const CoefficientVector& beta,
                            const PenaltyConfig& pen) {
  Eigen::VectorXd qm, qi;
  detail::gradient_core(g, beta, qm, qi);
  return detail::kkt_from_core(g, beta, pen, qm, qi);
}

/// Inf-norm of the minimum-norm subgradient over the zero coordinates; 0 at a
/// global minimum that satisfies the coordinate conditions.
inline double subgradient_certificate(const GramCache& g, const CoefficientVector& beta,
                                      const PenaltyConfig& pen) {
  Eigen::VectorXd qm, qi;
  detail::gradient_core(g, beta, qm, qi);
  return detail::inf_norm(detail::min_norm_subgradient(g, beta, pen, qm, qi));
}

inline SolveResult coordinate_descent(const GramCache& g, const PenaltyConfig& pen,
                                      const CoefficientVector& init,
                                      const SolverConfig& cfg = {}) {
  pen.validate();
  if (init.main.size() != g.p() || init.inter.size() != g.pt())
    throw ConfigError("coordinate_descent: initial coefficients have the wrong shape");
  if (cfg.max_sweeps < 1) throw ConfigError("coordinate_descent: max_sweeps must be >= 1");
  return detail::CoordinateDescent(g, pen, cfg).run(init);
}

}  // namespace capsqda
