/**
 * @brief Simulation models 1-5, Bayes-rule truth sets, replicated train/test
 * experiments with the five performance measures, and a random-split harness
 * for user-supplied data.
 *
 * Random streams per replication r (see rng.hpp): "params" draws the
 * replication-level constants (u, b, mu~, nu), "train" and "test" draw the
 * samples, "cv" seeds the folds of any tuned method. A replication can be
 * re-run alone and methods never share a stream.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "baselines.hpp"
#include "classifier.hpp"
#include "dataset.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace capsqda {

struct SimSpec {
  int model = 1;
  Index p = 20;
  Index n_train_per_class = 50;
  Index n_test_per_class = 5000;
  int replications = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (model < 1 || model > 5) throw ConfigError("simulation: model must be 1..5");
    const std::array<Index, 6> min_p{0, 2, 5, 4, 10, 10};
    if (p < min_p[static_cast<std::size_t>(model)])
      throw ConfigError("simulation: model " + std::to_string(model) + " needs p >= " +
                        std::to_string(min_p[static_cast<std::size_t>(model)]));
    if ((model == 4 || model == 5) && p % 2 != 0)
      throw ConfigError("simulation: models 4 and 5 need an even p");
    if (n_train_per_class < 1 || n_test_per_class < 1)
      throw ConfigError("simulation: per-class sample sizes must be positive");
    if (replications < 1) throw ConfigError("simulation: replications must be >= 1");
  }
};

/// Replication-level constants, shared by both classes and by train/test.
struct ReplicationParams {
  Eigen::VectorXd u;         // model 1: means of the p-2 irrelevant variables
  std::array<double, 7> b{};  // models 4-5: b11 b12 b21 b22 b31 b32 b33
  Eigen::VectorXd mu_tilde;  // model 5: normal noise means
  Eigen::VectorXd nu;        // model 5: Beta shape parameters
};

inline ReplicationParams draw_params(const SimSpec& spec, Rng& rng) {
  ReplicationParams r;
  const Index p = spec.p;
  if (spec.model == 1) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    r.u.resize(p - 2);
    for (Index j = 0; j < p - 2; ++j) r.u[j] = U(rng);
  }
  if (spec.model == 4 || spec.model == 5) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto& v : r.b) v = U(rng);
  }
  if (spec.model == 5) {
    const Index nn = p / 2 - 5, nb = p / 2;
    std::uniform_real_distribution<double> U01(0.0, 1.0), U15(1.0, 5.0);
    r.mu_tilde.resize(nn);
    for (Index j = 0; j < nn; ++j) r.mu_tilde[j] = U01(rng);
    r.nu.resize(nb);
    for (Index j = 0; j < nb; ++j) r.nu[j] = U15(rng);
  }
  return r;
}

/// Exact class distributions of the Gaussian models 1-3 (u enters model 1).
inline GaussianClassModel gaussian_model(int model, Index p, const Eigen::VectorXd& u = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (model == 1) {
    if (p < 2) throw ConfigError("simulation: model 1 needs p >= 2");
    GaussianClassModel g;
    g.mu[0] = VectorXd::Zero(p);
    g.mu[1] = VectorXd::Zero(p);
    g.mu[0].head(2) << 2.5, -1.0;
    g.mu[1].head(2) << -0.5, 0.0;
    if (u.size() == p - 2) {
      g.mu[0].tail(p - 2) = u;
      g.mu[1].tail(p - 2) = u;
    }
    g.sigma[0] = MatrixXd::Identity(p, p);
    g.sigma[1] = MatrixXd::Identity(p, p);
    g.sigma[1].topLeftCorner(2, 2) << 3.0, 1.0, 1.0, 3.0;
    MatrixXd P2 = MatrixXd::Identity(p, p);
    P2.topLeftCorner(2, 2) << 3.0 / 8.0, -1.0 / 8.0, -1.0 / 8.0, 3.0 / 8.0;
    g.precision = {MatrixXd::Identity(p, p), P2};
    g.validate();
    return g;
  }
  if (model == 2 || model == 3) {
    const Index need = model == 2 ? 5 : 4;
    if (p < need) throw ConfigError("simulation: model " + std::to_string(model) + " needs p >= " + std::to_string(need));
    MatrixXd Om = MatrixXd::Zero(p, p);
    VectorXd mu2 = VectorXd::Zero(p);
    if (model == 2) {
      for (Index k = 2; k < 5; ++k) Om(k, k) = -0.6;
      Om(2, 3) = Om(3, 2) = Om(2, 4) = Om(4, 2) = Om(3, 4) = Om(4, 3) = -0.15;
      mu2.head(2) << 0.6, 0.8;
    } else {
      Om(0, 0) = Om(1, 1) = -0.6;
      Om(0, 1) = Om(1, 0) = -0.15;
      mu2.head(4) << 0.6, 0.8, 0.6, 0.8;
    }
    return gaussian_from_precision({0.5, 0.5}, {VectorXd::Zero(p), mu2},
                                   {MatrixXd::Identity(p, p), MatrixXd::Identity(p, p) + Om});
  }
  throw ConfigError("simulation: model " + std::to_string(model) + " is not Gaussian");
}

namespace detail {

inline Eigen::MatrixXd gaussian_rows(const Eigen::VectorXd& mu, const Eigen::MatrixXd& L, Index n, Rng& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  const Index p = mu.size();
  Eigen::MatrixXd Z(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) Z(i, j) = N(rng);
  Eigen::MatrixXd X = Z * L.transpose();
  X.rowwise() += mu.transpose();
  return X;
}

inline double chisq1(std::normal_distribution<double>& N, Rng& rng) {
  const double z = N(rng);
  return z * z;
}

}  // namespace detail

/// n rows of the given class (+1 = class 1, -1 = class 2).
inline Eigen::MatrixXd generate(const SimSpec& spec, const ReplicationParams& prm, int code, Index n, Rng& rng) {
  spec.validate();
  if (code != kPositive && code != kNegative) throw ConfigError("simulation: class code must be +1 or -1");
  const int c = code == kPositive ? 0 : 1;
  const Index p = spec.p;
  if (spec.model <= 3) {
    const GaussianClassModel g = gaussian_model(spec.model, p, prm.u);
    Eigen::LLT<Eigen::MatrixXd> llt(g.sigma[c]);
    return detail::gaussian_rows(g.mu[c], llt.matrixL(), n, rng);
  }
  std::normal_distribution<double> N(0.0, 1.0);
  const auto& b = prm.b;
  const double s3 = std::sqrt(3.0);
  const Index nn = p / 2 - 5;
  Eigen::MatrixXd X(n, p);
  for (Index i = 0; i < n; ++i) {
    double x1, x2;
    if (c == 0) {
      x1 = 1.0 - detail::chisq1(N, rng);
      x2 = 1.0 - detail::chisq1(N, rng);
    } else {
      x1 = 1.2 - s3 * detail::chisq1(N, rng);
      x2 = 1.6 - s3 * detail::chisq1(N, rng);
    }
    X(i, 0) = x1;
    X(i, 1) = x2;
    X(i, 2) = b[0] + b[1] * x1 + detail::chisq1(N, rng);
    X(i, 3) = b[2] + b[3] * x2 + detail::chisq1(N, rng);
    X(i, 4) = b[4] + b[5] * x1 + b[6] * x2 + detail::chisq1(N, rng);
    for (Index j = 0; j < nn; ++j) X(i, 5 + j) = (spec.model == 5 ? prm.mu_tilde[j] : 0.0) + N(rng);
    for (Index j = 0; j < p / 2; ++j) {
      if (spec.model == 4) {
        X(i, 5 + nn + j) = detail::chisq1(N, rng);
      } else {
        std::gamma_distribution<double> Ga(prm.nu[j], 1.0), Gb(0.5, 1.0);
        const double ga = Ga(rng), gb = Gb(rng);
        X(i, 5 + nn + j) = ga / (ga + gb);
      }
    }
  }
  return X;
}

/// Train or test sample: n_per_class rows of class 1 followed by class 2.
inline Dataset generate_dataset(const SimSpec& spec, const ReplicationParams& prm, Index n_per_class, Rng& rng) {
  Dataset d;
  const Eigen::MatrixXd A = generate(spec, prm, kPositive, n_per_class, rng);
  const Eigen::MatrixXd B = generate(spec, prm, kNegative, n_per_class, rng);
  d.X.resize(2 * n_per_class, spec.p);
  d.X << A, B;
  d.y.resize(2 * n_per_class);
  d.y.head(n_per_class).setConstant(kPositive);
  d.y.tail(n_per_class).setConstant(kNegative);
  return d;
}

namespace detail {

/// log density of a - s * chi2(1) at w (-inf outside the support).
inline double shifted_chisq_logpdf(double a, double s, double w) {
  const double t = (a - w) / s;
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  return -std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi * t) - 0.5 * t;
}

}  // namespace detail

/// Bayes rule of models 4-5. Given (X1, X2) the remaining coordinates have
/// the same law in both classes, so the rule is the likelihood ratio of the
/// first two coordinates. +1 iff the log ratio is > 0.
inline Eigen::VectorXi chisq_oracle_classify(const Eigen::MatrixXd& X) {
  const double s3 = std::sqrt(3.0);
  Eigen::VectorXi out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const double l1 = detail::shifted_chisq_logpdf(1.0, 1.0, X(i, 0)) +
                      detail::shifted_chisq_logpdf(1.0, 1.0, X(i, 1));
    const double l2 = detail::shifted_chisq_logpdf(1.2, s3, X(i, 0)) +
                      detail::shifted_chisq_logpdf(1.6, s3, X(i, 1));
    out[i] = l1 > l2 ? kPositive : kNegative;
  }
  return out;
}

struct TruthSets {
  std::vector<Index> main;   // 0-based k
  std::vector<Index> inter;  // 0-based m
};

inline TruthSets truth_sets_from(const OracleRule& r, double threshold = 1e-12) {
  TruthSets t;
  const CoefficientVector c = r.to_coefficients();
  for (Index k = 0; k < c.main.size(); ++k)
    if (std::abs(c.main[k]) > threshold) t.main.push_back(k);
  for (Index m = 0; m < c.inter.size(); ++m)
    if (std::abs(c.inter[m]) > threshold) t.inter.push_back(m);
  return t;
}

inline TruthSets truth_sets(int model, Index p) {
  if (model < 1 || model > 3) throw ConfigError("truth sets exist only for the Gaussian models 1-3");
  return truth_sets_from(oracle_rule(gaussian_model(model, p)));
}

struct SelectionScore {
  double fp_main = 0, fp_inter = 0, fn_main = 0, fn_inter = 0;
};

inline SelectionScore score_selection(const ActiveSets& active, const TruthSets& truth) {
  auto count_missing = [](const std::vector<Index>& a, const std::vector<Index>& from) {
    std::set<Index> s(from.begin(), from.end());
    double c = 0;
    for (Index v : a) c += s.count(v) ? 0 : 1;
    return c;
  };
  return {count_missing(active.main, truth.main), count_missing(active.inter, truth.inter),
          count_missing(truth.main, active.main), count_missing(truth.inter, active.inter)};
}

/// Effect-level reading of a variable set: every selected main effect plus
/// every interaction (including squares) among selected variables.
inline ActiveSets effects_of_variables(const std::vector<Index>& S, Index p) {
  ActiveSets a;
  a.main = S;
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i; j < S.size(); ++j) a.inter.push_back(pair_to_linear(S[i], S[j], p));
  std::sort(a.inter.begin(), a.inter.end());
  return a;
}

/// Variables touched by an effect set.
inline std::vector<Index> variables_of(const ActiveSets& a, Index p) {
  std::set<Index> v(a.main.begin(), a.main.end());
  for (Index m : a.inter) {
    const auto [k, l] = linear_to_pair(m, p);
    v.insert(k);
    v.insert(l);
  }
  return {v.begin(), v.end()};
}

enum class Method { CapSqda, OlsSqda, BicB, BicFb, Oracle, FullQda };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::BicB, Method::BicFb, Method::CapSqda,
                                     Method::OlsSqda, Method::Oracle, Method::FullQda};
  return m;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::CapSqda: return "CAP-SQDA";
    case Method::OlsSqda: return "OLS-SQDA";
    case Method::BicB: return "BIC_b";
    case Method::BicFb: return "BIC_fb";
    case Method::Oracle: return "ORACLE";
    case Method::FullQda: return "FULL-QDA";
  }
  return "?";
}

/// Case-insensitive; '-' and '_' are interchangeable.
inline Method parse_method(std::string s) {
  for (auto& ch : s) ch = ch == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (Method m : all_methods()) {
    std::string name = method_name(m);
    for (auto& ch : name) ch = ch == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (name == s) return m;
  }
  if (s == "CAP") return Method::CapSqda;
  if (s == "OLS") return Method::OlsSqda;
  if (s == "FULL") return Method::FullQda;
  throw ConfigError("unknown method '" + s + "'");
}

struct BenchOptions {
  FitConfig fit;         // grid sizes, folds, solver settings for CAP-SQDA
  unsigned threads = 1;  // replications run concurrently
};

/// One method on one replication (or split). nullopt fields are undefined
/// for that method/model.
struct Outcome {
  bool ok = false;
  std::string error;
  double mr = 0.0;       // percent
  double errors = 0.0;   // misclassified count
  std::optional<SelectionScore> sel;
  std::optional<double> variables, mains, inters;
};

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  s.mean = m;
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

struct MethodRow {
  Method method{};
  int n_ok = 0;
  int n_total = 0;
  Summary mr, mn, fp_main, fp_inter, fn_main, fn_inter, variables, mains, inters;
  std::vector<std::string> failures;  // "rep r: message"
};

inline MethodRow aggregate(Method m, const std::vector<Outcome>& outs) {
  MethodRow row;
  row.method = m;
  row.n_total = static_cast<int>(outs.size());
  std::vector<double> mr, mn, fpm, fpi, fnm, fni, var, mai, ite;
  for (std::size_t r = 0; r < outs.size(); ++r) {
    const auto& o = outs[r];
    if (!o.ok) {
      row.failures.push_back("rep " + std::to_string(r + 1) + ": " + o.error);
      continue;
    }
    ++row.n_ok;
    mr.push_back(o.mr);
    mn.push_back(o.errors);
    if (o.sel) {
      fpm.push_back(o.sel->fp_main);
      fpi.push_back(o.sel->fp_inter);
      fnm.push_back(o.sel->fn_main);
      fni.push_back(o.sel->fn_inter);
    }
    if (o.variables) var.push_back(*o.variables);
    if (o.mains) mai.push_back(*o.mains);
    if (o.inters) ite.push_back(*o.inters);
  }
  row.mr = summarize(mr);
  row.mn = summarize(mn);
  row.fp_main = summarize(fpm);
  row.fp_inter = summarize(fpi);
  row.fn_main = summarize(fnm);
  row.fn_inter = summarize(fni);
  row.variables = summarize(var);
  row.mains = summarize(mai);
  row.inters = summarize(ite);
  return row;
}

namespace detail {

inline double error_count(const Eigen::VectorXi& pred, const Eigen::VectorXd& y) {
  double wrong = 0;
  for (Index i = 0; i < pred.size(); ++i) wrong += pred[i] != static_cast<int>(y[i]);
  return wrong;
}

template <class F>
Outcome guarded(F&& f) {
  Outcome o;
  try {
    f(o);
    o.ok = true;
  } catch (const std::exception& e) {
    o = Outcome{};
    o.error = e.what();
  }
  return o;
}

inline void set_rate(Outcome& o, const Eigen::VectorXi& pred, const Dataset& test) {
  o.errors = error_count(pred, test.y);
  o.mr = 100.0 * o.errors / static_cast<double>(test.n());
}

inline void set_sizes(Outcome& o, const ActiveSets& a, Index p, bool effects) {
  o.variables = static_cast<double>(variables_of(a, p).size());
  if (effects) {
    o.mains = static_cast<double>(a.main.size());
    o.inters = static_cast<double>(a.inter.size());
  }
}

/// Fits every requested method on `train` and scores it on `test`.
/// `oracle` classifies test rows with the true rule when available; `truth`
/// enables the selection measures.
inline std::map<Method, Outcome> evaluate_methods(
    const std::vector<Method>& methods, const Dataset& train, const Dataset& test,
    const BenchOptions& opt, std::uint64_t cv_seed,
    const std::function<Eigen::VectorXi(const Eigen::MatrixXd&)>* oracle,
    const TruthSets* truth, const TruthSets* oracle_effects) {
  const Index p = train.p();
  std::map<Method, Outcome> res;
  auto wants = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };

  if (wants(Method::CapSqda) || wants(Method::OlsSqda)) {
    std::optional<FittedModel> model;
    std::string err;
    try {
      FitConfig cfg = opt.fit;
      cfg.seed = cv_seed;
      cfg.threads = 1;
      cfg.refit = true;
      model = fit(train, cfg);
    } catch (const std::exception& e) {
      err = e.what();
    }
    for (Method m : {Method::CapSqda, Method::OlsSqda}) {
      if (!wants(m)) continue;
      if (!model) {
        res[m].error = err;
        continue;
      }
      res[m] = guarded([&](Outcome& o) {
        const bool refit = m == Method::OlsSqda && model->coef_refit.has_value();
        set_rate(o, predict(*model, test.X, refit), test);
        if (truth) o.sel = score_selection(model->active, *truth);
        set_sizes(o, model->active, p, true);
      });
    }
  }
  for (Method m : {Method::BicB, Method::BicFb}) {
    if (!wants(m)) continue;
    res[m] = guarded([&](Outcome& o) {
      const BicSelection s = m == Method::BicB ? bic_backward(train) : bic_forward_backward(train);
      const GaussianClassModel g = qda_fit(train.columns(s.S));
      set_rate(o, qda_classify(g, test.columns(s.S).X), test);
      const ActiveSets eff = effects_of_variables(s.S, p);
      if (truth) o.sel = score_selection(eff, *truth);
      o.variables = static_cast<double>(s.S.size());
    });
  }
  if (wants(Method::Oracle) && oracle) {
    res[Method::Oracle] = guarded([&](Outcome& o) {
      set_rate(o, (*oracle)(test.X), test);
      if (truth && oracle_effects) {
        ActiveSets a{oracle_effects->main, oracle_effects->inter};
        o.sel = score_selection(a, *truth);
      }
    });
  }
  if (wants(Method::FullQda)) {
    res[Method::FullQda] = guarded([&](Outcome& o) {
      const GaussianClassModel g = qda_fit(train);
      set_rate(o, qda_classify(g, test.X), test);
      if (truth) {
        std::vector<Index> all(static_cast<std::size_t>(p));
        for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
        o.sel = score_selection(effects_of_variables(all, p), *truth);
      }
    });
  }
  return res;
}

}  // namespace detail

struct ExperimentResult {
  SimSpec spec;
  std::vector<Method> methods;
  std::map<Method, std::vector<Outcome>> per_rep;
  std::vector<MethodRow> rows;  // in the order of `methods`
};

inline std::vector<Method> dedup_methods(const std::vector<Method>& in) {
  std::vector<Method> out;
  for (Method m : in)
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  if (out.empty()) throw ConfigError("no methods requested");
  return out;
}

/// One replication in isolation.
inline std::map<Method, Outcome> run_replication(const SimSpec& spec, const std::vector<Method>& methods,
                                                 const BenchOptions& opt, int rep) {
  const auto r = static_cast<std::uint64_t>(rep);
  Rng prm_rng = make_stream(spec.seed, r, "params");
  const ReplicationParams prm = draw_params(spec, prm_rng);
  Rng train_rng = make_stream(spec.seed, r, "train");
  Rng test_rng = make_stream(spec.seed, r, "test");
  const Dataset train = generate_dataset(spec, prm, spec.n_train_per_class, train_rng);
  const Dataset test = generate_dataset(spec, prm, spec.n_test_per_class, test_rng);

  std::function<Eigen::VectorXi(const Eigen::MatrixXd&)> oracle;
  std::optional<TruthSets> truth;
  if (spec.model <= 3) {
    const OracleRule rule = oracle_rule(gaussian_model(spec.model, spec.p, prm.u));
    oracle = [rule](const Eigen::MatrixXd& X) { return oracle_classify(rule, X); };
    truth = truth_sets(spec.model, spec.p);
  } else {
    oracle = [](const Eigen::MatrixXd& X) { return chisq_oracle_classify(X); };
  }
  return detail::evaluate_methods(methods, train, test, opt, stream_seed(spec.seed, r, "cv"), &oracle,
                                  truth ? &*truth : nullptr, truth ? &*truth : nullptr);
}

inline ExperimentResult run_experiment(const SimSpec& spec, const std::vector<Method>& methods_in,
                                       const BenchOptions& opt = {}) {
  spec.validate();
  ExperimentResult res;
  res.spec = spec;
  res.methods = dedup_methods(methods_in);
  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<std::map<Method, Outcome>> outs(reps);
  parallel_for(reps, opt.threads, [&](std::size_t r) {
    outs[r] = run_replication(spec, res.methods, opt, static_cast<int>(r));
  });
  for (Method m : res.methods) {
    auto& v = res.per_rep[m];
    for (auto& o : outs) v.push_back(o[m]);
    res.rows.push_back(aggregate(m, v));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Random-split evaluation on a user-supplied dataset.

struct SplitSpec {
  Index train_positive = 0;  // training rows drawn from class +1
  Index train_negative = 0;  // training rows drawn from class -1
  int splits = 100;
  std::uint64_t seed = 0;
};

struct SplitResult {
  SplitSpec spec;
  Index p = 0;
  std::vector<Method> methods;
  std::map<Method, std::vector<Outcome>> per_split;
  std::vector<MethodRow> rows;
};

/// Stratified split s: shuffles each class with stream (seed, s, "split") and
/// takes the first counts as training rows. Returns (train, test) indices.
inline std::pair<std::vector<Index>, std::vector<Index>> stratified_split(const Dataset& d, const SplitSpec& spec,
                                                                          int s) {
  Rng rng = make_stream(spec.seed, static_cast<std::uint64_t>(s), "split");
  std::vector<Index> train, test;
  for (int code : {kPositive, kNegative}) {
    std::vector<Index> idx = detail::class_rows(d, code);
    shuffle_in_place(idx, rng);
    const auto take = static_cast<std::size_t>(code == kPositive ? spec.train_positive : spec.train_negative);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

inline SplitResult run_splits(const Dataset& d, const SplitSpec& spec, const std::vector<Method>& methods_in,
                              const BenchOptions& opt = {}) {
  d.validate(true);
  if (spec.splits < 1) throw ConfigError("splits must be >= 1");
  const Index npos = d.count(kPositive), nneg = d.count(kNegative);
  if (spec.train_positive < 1 || spec.train_negative < 1)
    throw ConfigError("training counts must be positive for both classes");
  if (spec.train_positive >= npos || spec.train_negative >= nneg)
    throw ConfigError("training counts (" + std::to_string(spec.train_positive) + ", " +
                      std::to_string(spec.train_negative) + ") must leave test rows in each class (sizes " +
                      std::to_string(npos) + ", " + std::to_string(nneg) + ")");
  SplitResult res;
  res.spec = spec;
  res.p = d.p();
  for (Method m : dedup_methods(methods_in))
    if (m != Method::Oracle) res.methods.push_back(m);
  if (res.methods.empty()) throw ConfigError("ORACLE needs the generating model; choose another method");
  const auto n = static_cast<std::size_t>(spec.splits);
  std::vector<std::map<Method, Outcome>> outs(n);
  parallel_for(n, opt.threads, [&](std::size_t s) {
    const auto [tr, te] = stratified_split(d, spec, static_cast<int>(s));
    const Dataset train = d.rows(tr), test = d.rows(te);
    outs[s] = detail::evaluate_methods(res.methods, train, test, opt,
                                       stream_seed(spec.seed, s, "cv"), nullptr, nullptr, nullptr);
  });
  for (Method m : res.methods) {
    auto& v = res.per_split[m];
    for (auto& o : outs) v.push_back(o[m]);
    res.rows.push_back(aggregate(m, v));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Table output. Missing or undefined cells are written as NA.

namespace detail {

inline std::string fmt_cell(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string json_cell(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

inline std::string experiment_csv(const ExperimentResult& r) {
  std::string out =
      "method,model,p,reps,n_ok,MR_mean,MR_sd,FP_main_mean,FP_main_sd,FP_inter_mean,FP_inter_sd,"
      "FN_main_mean,FN_main_sd,FN_inter_mean,FN_inter_sd\n";
  using detail::fmt_cell;
  for (const auto& row : r.rows) {
    out += method_name(row.method) + "," + std::to_string(r.spec.model) + "," + std::to_string(r.spec.p) + "," +
           std::to_string(row.n_total) + "," + std::to_string(row.n_ok);
    for (const Summary* s : {&row.mr, &row.fp_main, &row.fp_inter, &row.fn_main, &row.fn_inter})
      out += "," + fmt_cell(s->mean) + "," + fmt_cell(s->sd);
    out += "\n";
  }
  return out;
}

inline std::string experiment_json(const ExperimentResult& r) {
  using detail::json_cell;
  std::string out = "{\n  \"model\": " + std::to_string(r.spec.model) + ",\n  \"p\": " + std::to_string(r.spec.p) +
                    ",\n  \"n_train_per_class\": " + std::to_string(r.spec.n_train_per_class) +
                    ",\n  \"n_test_per_class\": " + std::to_string(r.spec.n_test_per_class) +
                    ",\n  \"reps\": " + std::to_string(r.spec.replications) +
                    ",\n  \"seed\": " + std::to_string(r.spec.seed) + ",\n  \"rows\": [";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    out += std::string(i ? "," : "") + "\n    {\"method\": \"" + method_name(row.method) +
           "\", \"n_ok\": " + std::to_string(row.n_ok);
    const std::array<std::pair<const char*, const Summary*>, 5> cols{
        {{"MR", &row.mr}, {"FP_main", &row.fp_main}, {"FP_inter", &row.fp_inter},
         {"FN_main", &row.fn_main}, {"FN_inter", &row.fn_inter}}};
    for (const auto& [name, s] : cols)
      out += std::string(", \"") + name + "_mean\": " + json_cell(s->mean) + ", \"" + name +
             "_sd\": " + json_cell(s->sd);
    out += ", \"failures\": [";
    for (std::size_t f = 0; f < row.failures.size(); ++f)
      out += (f ? ", " : "") + nlohmann::json(row.failures[f]).dump();
    out += "]}";
  }
  out += "\n  ]\n}\n";
  return out;
}

inline std::string splits_csv(const SplitResult& r) {
  std::string out =
      "method,p,splits,n_ok,MR_mean,MR_sd,MN_mean,MN_sd,Variable_mean,Variable_sd,Main_mean,Main_sd,"
      "Interaction_mean,Interaction_sd,All_mean,All_sd\n";
  using detail::fmt_cell;
  for (const auto& row : r.rows) {
    const auto& v = r.per_split.at(row.method);
    std::vector<double> all;
    for (const auto& o : v)
      if (o.ok && o.mains && o.inters) all.push_back(*o.mains + *o.inters);
    const Summary s_all = summarize(all);
    out += method_name(row.method) + "," + std::to_string(r.p) + "," + std::to_string(row.n_total) + "," +
           std::to_string(row.n_ok);
    for (const Summary* s : {&row.mr, &row.mn, &row.variables, &row.mains, &row.inters, &s_all})
      out += "," + fmt_cell(s->mean) + "," + fmt_cell(s->sd);
    out += "\n";
  }
  return out;
}

}  // namespace capsqda
