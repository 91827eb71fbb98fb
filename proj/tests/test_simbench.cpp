#include <random>

#include <gtest/gtest.h>

#include "capsqda/simbench.hpp"

using namespace capsqda;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SimSpec spec_of(int model, Index p, std::uint64_t seed = 7) {
  SimSpec s;
  s.model = model;
  s.p = p;
  s.seed = seed;
  return s;
}

MatrixXd sample_cov(const MatrixXd& X) {
  const MatrixXd C = X.rowwise() - X.colwise().mean();
  return C.transpose() * C / static_cast<double>(X.rows() - 1);
}

BenchOptions quick_options() {
  BenchOptions o;
  o.fit.grid_sizes.lambda2_count = 5;
  o.fit.grid_sizes.ratio_count = 2;
  o.fit.grid_sizes.epsilon = 1e-2;
  return o;
}

}  // namespace

TEST(Generate, ModelOneMomentsMatchSpecification) {
  const SimSpec s = spec_of(1, 6);
  Rng pr = make_stream(1, 0, "params");
  const ReplicationParams prm = draw_params(s, pr);
  ASSERT_EQ(prm.u.size(), 4);
  EXPECT_TRUE((prm.u.array() >= 0).all() && (prm.u.array() <= 1).all());
  Rng rng = make_stream(1, 0, "train");
  const MatrixXd A = generate(s, prm, 1, 40000, rng);
  const MatrixXd B = generate(s, prm, -1, 40000, rng);
  VectorXd mu1(6), mu2(6);
  mu1 << 2.5, -1.0, prm.u;
  mu2 << -0.5, 0.0, prm.u;
  EXPECT_LE((A.colwise().mean().transpose() - mu1).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LE((B.colwise().mean().transpose() - mu2).cwiseAbs().maxCoeff(), 0.04);
  MatrixXd S2 = MatrixXd::Identity(6, 6);
  S2.topLeftCorner(2, 2) << 3, 1, 1, 3;
  EXPECT_LE((sample_cov(A) - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 0.04);
  EXPECT_LE((sample_cov(B) - S2).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Generate, ModelTwoAndThreeCovariances) {
  for (int model : {2, 3}) {
    const SimSpec s = spec_of(model, 6);
    Rng pr = make_stream(2, 0, "params");
    const ReplicationParams prm = draw_params(s, pr);
    Rng rng = make_stream(2, 0, "train");
    const MatrixXd B = generate(s, prm, -1, 60000, rng);
    MatrixXd Om = MatrixXd::Identity(6, 6);
    if (model == 2) {
      for (Index k = 2; k < 5; ++k) Om(k, k) = 0.4;
      Om(2, 3) = Om(3, 2) = Om(2, 4) = Om(4, 2) = Om(3, 4) = Om(4, 3) = -0.15;
    } else {
      Om(0, 0) = Om(1, 1) = 0.4;
      Om(0, 1) = Om(1, 0) = -0.15;
    }
    const MatrixXd Sigma = Om.inverse();
    EXPECT_LE((sample_cov(B) - Sigma).cwiseAbs().maxCoeff(), 0.05 * Sigma.cwiseAbs().maxCoeff());
  }
}

TEST(Generate, ChiSquareModelsMoments) {
  const SimSpec s4 = spec_of(4, 20);
  Rng pr = make_stream(3, 0, "params");
  const ReplicationParams prm = draw_params(s4, pr);
  for (double b : prm.b) EXPECT_LE(std::abs(b), 1.0);
  Rng rng = make_stream(3, 0, "train");
  const MatrixXd A = generate(s4, prm, 1, 50000, rng);
  const MatrixXd B = generate(s4, prm, -1, 50000, rng);
  // X1 = 1 - chi2: mean 0, variance 2; class 2: X1 = 1.2 - sqrt(3) chi2
  EXPECT_NEAR(A.col(0).mean(), 0.0, 0.03);
  EXPECT_NEAR(sample_cov(A.leftCols(1))(0, 0), 2.0, 0.08);
  EXPECT_NEAR(B.col(0).mean(), 1.2 - std::sqrt(3.0), 0.04);
  EXPECT_NEAR(B.col(1).mean(), 1.6 - std::sqrt(3.0), 0.04);
  EXPECT_LE(A.col(0).maxCoeff(), 1.0);
  // X3 = b11 + b12 X1 + chi2
  EXPECT_NEAR(A.col(2).mean(), prm.b[0] + 1.0, 0.04);
  // the last p/2 columns are chi2(1) in both classes
  EXPECT_NEAR(A.col(19).mean(), 1.0, 0.03);
  EXPECT_NEAR(B.col(10).mean(), 1.0, 0.03);

  const SimSpec s5 = spec_of(5, 20);
  Rng pr5 = make_stream(4, 0, "params");
  const ReplicationParams p5 = draw_params(s5, pr5);
  ASSERT_EQ(p5.nu.size(), 10);
  ASSERT_EQ(p5.mu_tilde.size(), 5);
  Rng rng5 = make_stream(4, 0, "train");
  const MatrixXd C = generate(s5, p5, 1, 50000, rng5);
  EXPECT_NEAR(C.col(5).mean(), p5.mu_tilde[0], 0.03);
  EXPECT_NEAR(C.col(10).mean(), p5.nu[0] / (p5.nu[0] + 0.5), 0.01);
  EXPECT_GE(C.rightCols(10).minCoeff(), 0.0);
  EXPECT_LE(C.rightCols(10).maxCoeff(), 1.0);
}

TEST(Generate, ChiSquareOracleBeatsChance) {
  const SimSpec s = spec_of(4, 10);
  Rng pr = make_stream(5, 0, "params");
  const ReplicationParams prm = draw_params(s, pr);
  Rng rng = make_stream(5, 0, "test");
  const Dataset d = generate_dataset(s, prm, 20000, rng);
  const Eigen::VectorXi c = chisq_oracle_classify(d.X);
  double wrong = 0;
  for (Index i = 0; i < d.n(); ++i) wrong += c[i] != static_cast<int>(d.y[i]);
  EXPECT_LT(wrong / static_cast<double>(d.n()), 0.25);
  EXPECT_GT(wrong / static_cast<double>(d.n()), 0.1);
}

TEST(SimSpec, Validation) {
  EXPECT_THROW(spec_of(1, 1).validate(), ConfigError);
  EXPECT_THROW(spec_of(2, 4).validate(), ConfigError);
  EXPECT_THROW(spec_of(3, 3).validate(), ConfigError);
  EXPECT_THROW(spec_of(4, 8).validate(), ConfigError);
  EXPECT_THROW(spec_of(5, 11).validate(), ConfigError);
  EXPECT_THROW(spec_of(6, 20).validate(), ConfigError);
  EXPECT_NO_THROW(spec_of(3, 4).validate());
  EXPECT_NO_THROW(spec_of(4, 10).validate());
}

TEST(TruthSets, GaussianModels) {
  const TruthSets t1 = truth_sets(1, 20), t2 = truth_sets(2, 20), t3 = truth_sets(3, 20);
  EXPECT_EQ(t1.main, (std::vector<Index>{0, 1}));
  EXPECT_EQ(t1.inter, (std::vector<Index>{pair_to_linear(0, 0, 20), pair_to_linear(0, 1, 20), pair_to_linear(1, 1, 20)}));
  EXPECT_EQ(t2.main, (std::vector<Index>{0, 1}));
  EXPECT_EQ(t2.inter.size(), 6u);
  for (Index m : t2.inter) {
    const auto [k, l] = linear_to_pair(m, 20);
    EXPECT_GE(k, 2);
    EXPECT_LE(l, 4);
  }
  EXPECT_EQ(t3.main, (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(t3.inter.size(), 3u);
  EXPECT_THROW(truth_sets(4, 20), ConfigError);
}

TEST(Selection, ScoreExamples) {
  TruthSets t{{0, 1}, {0, 1, 20}};
  ActiveSets a;
  a.main = {1, 5};
  a.inter = {0, 3};
  const SelectionScore s = score_selection(a, t);
  EXPECT_EQ(s.fp_main, 1);
  EXPECT_EQ(s.fn_main, 1);
  EXPECT_EQ(s.fp_inter, 1);
  EXPECT_EQ(s.fn_inter, 2);
  const SelectionScore z = score_selection(ActiveSets{}, t);
  EXPECT_EQ(z.fn_main, 2);
  EXPECT_EQ(z.fn_inter, 3);
  EXPECT_EQ(z.fp_main + z.fp_inter, 0);
}

TEST(Selection, CountIdentities) {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution B(0.3);
  const TruthSets t = truth_sets(2, 8);
  for (int rep = 0; rep < 100; ++rep) {
    ActiveSets a;
    for (Index k = 0; k < 8; ++k)
      if (B(rng)) a.main.push_back(k);
    for (Index m = 0; m < interaction_count(8); ++m)
      if (B(rng)) a.inter.push_back(m);
    const SelectionScore s = score_selection(a, t);
    const double tp_main = static_cast<double>(a.main.size()) - s.fp_main;
    EXPECT_EQ(tp_main + s.fn_main, static_cast<double>(t.main.size()));
    const double tp_inter = static_cast<double>(a.inter.size()) - s.fp_inter;
    EXPECT_EQ(tp_inter + s.fn_inter, static_cast<double>(t.inter.size()));
  }
}

TEST(Selection, VariableEffectMapping) {
  const ActiveSets a = effects_of_variables({1, 3}, 4);
  EXPECT_EQ(a.main, (std::vector<Index>{1, 3}));
  EXPECT_EQ(a.inter, (std::vector<Index>{pair_to_linear(1, 1, 4), pair_to_linear(1, 3, 4), pair_to_linear(3, 3, 4)}));
  EXPECT_EQ(variables_of(a, 4), (std::vector<Index>{1, 3}));
  ActiveSets b;
  b.inter = {pair_to_linear(0, 2, 4)};
  EXPECT_EQ(variables_of(b, 4), (std::vector<Index>{0, 2}));
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(parse_method("bic-fb"), Method::BicFb);
  EXPECT_EQ(parse_method("cap_sqda"), Method::CapSqda);
  EXPECT_EQ(parse_method("oracle"), Method::Oracle);
  EXPECT_THROW(parse_method("LASSO"), ConfigError);
  EXPECT_EQ(dedup_methods({Method::Oracle, Method::BicB, Method::Oracle}),
            (std::vector<Method>{Method::Oracle, Method::BicB}));
}

TEST(Summary, MeanAndSampleSd) {
  const Summary s = summarize({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(5.0 / 3.0));
  EXPECT_TRUE(std::isnan(summarize({}).mean));
  EXPECT_EQ(summarize({7}).sd, 0.0);
}

TEST(Experiment, ReproducibleAndThreadIndependent) {
  SimSpec s = spec_of(3, 4, 99);
  s.n_train_per_class = 25;
  s.n_test_per_class = 300;
  s.replications = 3;
  BenchOptions o = quick_options();
  const std::vector<Method> ms{Method::CapSqda, Method::OlsSqda, Method::BicB, Method::BicFb, Method::Oracle,
                               Method::FullQda};
  const ExperimentResult a = run_experiment(s, ms, o);
  o.threads = 3;
  const ExperimentResult b = run_experiment(s, ms, o);
  EXPECT_EQ(experiment_csv(a), experiment_csv(b));
  EXPECT_EQ(experiment_json(a), experiment_json(b));
  for (const MethodRow& r : a.rows) EXPECT_EQ(r.n_ok, 3) << method_name(r.method);
  const std::string csv = experiment_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,model,p,reps,n_ok,MR_mean,MR_sd,FP_main_mean,FP_main_sd,FP_inter_mean,FP_inter_sd,"
            "FN_main_mean,FN_main_sd,FN_inter_mean,FN_inter_sd");
  s.seed = 100;
  EXPECT_NE(experiment_csv(run_experiment(s, ms, o)), csv);
}

TEST(Experiment, OracleIndependentOfMethodSet) {
  SimSpec s = spec_of(1, 6, 5);
  s.n_train_per_class = 20;
  s.n_test_per_class = 500;
  s.replications = 2;
  const BenchOptions o = quick_options();
  const ExperimentResult a = run_experiment(s, {Method::Oracle}, o);
  const ExperimentResult b = run_experiment(s, {Method::BicB, Method::Oracle, Method::CapSqda}, o);
  for (int r = 0; r < 2; ++r)
    EXPECT_EQ(a.per_rep.at(Method::Oracle)[static_cast<std::size_t>(r)].mr,
              b.per_rep.at(Method::Oracle)[static_cast<std::size_t>(r)].mr);
  // the oracle's own effects are the truth: no selection errors
  EXPECT_EQ(a.rows[0].fp_main.mean + a.rows[0].fn_main.mean + a.rows[0].fp_inter.mean + a.rows[0].fn_inter.mean, 0);
}

TEST(Experiment, FailuresBecomeMissingCells) {
  SimSpec s = spec_of(3, 12, 3);
  s.n_train_per_class = 8;  // fewer than p + 1 per class: QDA cannot be fitted
  s.n_test_per_class = 50;
  s.replications = 2;
  const ExperimentResult r = run_experiment(s, {Method::FullQda, Method::Oracle}, quick_options());
  EXPECT_EQ(r.rows[0].n_ok, 0);
  EXPECT_EQ(r.rows[0].failures.size(), 2u);
  EXPECT_EQ(r.rows[1].n_ok, 2);
  const std::string csv = experiment_csv(r);
  EXPECT_NE(csv.find("FULL-QDA,3,12,2,0,NA,NA"), std::string::npos);
  EXPECT_NE(experiment_json(r).find("failures"), std::string::npos);
}

TEST(Splits, StratifiedAndDeterministic) {
  SimSpec s = spec_of(3, 4, 1);
  Rng pr = make_stream(1, 0, "params");
  const ReplicationParams prm = draw_params(s, pr);
  Rng rng = make_stream(1, 0, "train");
  const Dataset d = generate_dataset(s, prm, 30, rng);
  SplitSpec sp{20, 15, 3, 8};
  const auto [tr, te] = stratified_split(d, sp, 0);
  EXPECT_EQ(tr.size(), 35u);
  EXPECT_EQ(te.size(), 25u);
  EXPECT_EQ(d.rows(tr).count(1), 20);
  EXPECT_EQ(stratified_split(d, sp, 0).first, tr);
  EXPECT_NE(stratified_split(d, sp, 1).first, tr);
  const SplitResult a = run_splits(d, sp, {Method::BicB, Method::Oracle, Method::CapSqda}, quick_options());
  EXPECT_EQ(a.methods, (std::vector<Method>{Method::BicB, Method::CapSqda}));
  EXPECT_EQ(splits_csv(a), splits_csv(run_splits(d, sp, {Method::BicB, Method::CapSqda}, quick_options())));
  EXPECT_THROW(run_splits(d, SplitSpec{30, 10, 1, 0}, {Method::BicB}), ConfigError);
  EXPECT_THROW(run_splits(d, sp, {Method::Oracle}), ConfigError);
}
