/**
 * @brief Exact minimizer of the one-dimensional coordinate subproblem
 *
 *     a*t^2 + b*t + c*|t| + d * sum_j sqrt(t^2 + e_j),   a, c, d >= 0, e_j > 0.
 *
 * The objective is convex. Its derivative away from zero,
 *     g(t) = 2a*t + b + c*sign(t) + d * sum_j t / sqrt(t^2 + e_j),
 * is strictly increasing on each half-line, so the minimizer is either 0
 * (when |b| <= c) or the unique root of g on the side opposite to b.
 */
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dataset.hpp"

namespace capsqda {

struct ScalarSubproblem {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  std::vector<double> e;
};

/// Thrown for a = 0 with |b| > c; the caller pins the coordinate at zero.
class DegenerateSubproblem : public NumericalError {
public:
  using NumericalError::NumericalError;
};

inline double scalar_objective(const ScalarSubproblem& sp, double t) {
  double v = sp.a * t * t + sp.b * t + sp.c * std::abs(t);
  if (sp.d != 0.0)
    for (double e : sp.e) v += sp.d * std::sqrt(t * t + e);
  return v;
}

/// Derivative for t != 0; at t == 0 it returns the right derivative.
inline double scalar_stationarity(const ScalarSubproblem& sp, double t) {
  double g = 2.0 * sp.a * t + sp.b + (t < 0 ? -sp.c : sp.c);
  if (sp.d != 0.0)
    for (double e : sp.e) g += sp.d * t / std::sqrt(t * t + e);
  return g;
}

namespace detail {

// Root of g on (0, hi) for the mirrored problem with b < -c.
inline double positive_root(const ScalarSubproblem& sp, double tol) {
  double lo = 0.0;
  double hi = (-sp.c - sp.b) / (2.0 * sp.a);
  if (sp.d == 0.0 || sp.e.empty()) return hi;
  double t = lo;
  for (int it = 0; it < 200; ++it) {
    double g = 2.0 * sp.a * t + sp.b + sp.c;
    double dg = 2.0 * sp.a;
    for (double e : sp.e) {
      const double r = std::sqrt(t * t + e);
      g += sp.d * t / r;
      dg += sp.d * e / (r * r * r);
    }
    if (std::abs(g) <= tol) return t;
    if (g < 0) lo = t; else hi = t;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    double next = t - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/**
 * Returns the minimizer. |b| <= c gives a literal 0. Otherwise the result lies
 * in ((c-b)/(2a), 0) for b > c and (0, (-c-b)/(2a)) for b < -c with
 * |g(t)| <= tol unless the bracket collapses to machine precision first.
 */
inline double solve_scalar(const ScalarSubproblem& sp, double tol = 1e-10) {
  for (double e : sp.e)
    if (!(e > 0.0)) throw ConfigError("solve_scalar: every e_j must be strictly positive");
  if (sp.a < 0 || sp.c < 0 || sp.d < 0)
    throw ConfigError("solve_scalar: a, c, d must be non-negative");
  if (std::abs(sp.b) <= sp.c) return 0.0;
  if (sp.a == 0.0) throw DegenerateSubproblem("solve_scalar: a = 0 with |b| > c");
  if (sp.b < 0) return detail::positive_root(sp, tol);
  ScalarSubproblem mirrored = sp;
  mirrored.b = -sp.b;
  return -detail::positive_root(mirrored, tol);
}

}  // namespace capsqda
