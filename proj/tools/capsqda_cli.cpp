// capsqda command-line tool: fit, predict, cv, bench, simulate.
//
// Exit codes: 0 success, 2 usage/configuration error, 3 data error,
// 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "capsqda/capsqda.hpp"

using namespace capsqda;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string data;
  std::string output;
  std::string label = "label";
  std::optional<std::string> positive;
  std::optional<std::uint64_t> seed;
  int folds = 5;
  int grid_l2 = 20;
  int grid_ratios = 4;
  double tol = 1e-7;
  int max_sweeps = 1000;
  unsigned threads = default_threads();
  bool standardize = false;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

void require_seed(const Common& c, const char* cmd) {
  if (!c.seed) throw ConfigError(std::string(cmd) + ": --seed is required (no clock-based default)");
}

FitConfig fit_config(const Common& c) {
  FitConfig cfg;
  cfg.folds = c.folds;
  cfg.grid_sizes.lambda2_count = c.grid_l2;
  cfg.grid_sizes.ratio_count = c.grid_ratios;
  cfg.solver.coord_tol = c.tol;
  cfg.solver.max_sweeps = c.max_sweeps;
  cfg.threads = c.threads == 0 ? 1 : c.threads;
  cfg.standardize = c.standardize;
  if (c.seed) cfg.seed = *c.seed;
  if (c.grid_l2 < 1 || c.grid_ratios < 1) throw ConfigError("--grid-l2 and --grid-ratios must be >= 1");
  if (!(c.tol > 0.0)) throw ConfigError("--tol must be positive");
  if (c.max_sweeps < 1) throw ConfigError("--max-sweeps must be >= 1");
  return cfg;
}

ordered_json warnings_json(const std::vector<std::string>& w) {
  ordered_json a = ordered_json::array();
  for (const auto& s : w) a.push_back(s);
  return a;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_method(item));
  if (out.empty()) throw ConfigError("--methods: empty list");
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_fit(const Common& c, std::optional<double> l1, std::optional<double> l2, bool no_refit) {
  if (c.output.empty()) throw ConfigError("fit: --output is required");
  if (l1.has_value() != l2.has_value()) throw ConfigError("fit: give both --lambda1 and --lambda2, or neither");
  const LabeledData ld = labeled_from_csv(read_csv(c.data), c.label, c.positive);
  FitConfig cfg = fit_config(c);
  cfg.refit = !no_refit;
  if (l1) {
    cfg.penalty = PenaltyConfig{*l1, *l2};
    cfg.penalty->validate();
  } else {
    require_seed(c, "fit");
  }
  FittedModel m = fit(ld.data, cfg);
  m.meta.positive_label = ld.positive_label;
  m.meta.negative_label = ld.negative_label;
  save_model(m, c.output);

  ordered_json j;
  j["command"] = "fit";
  j["model"] = c.output;
  j["n"] = m.n;
  j["p"] = m.p;
  j["positive_label"] = ld.positive_label;
  j["negative_label"] = ld.negative_label;
  j["lambda1"] = m.lambda.lambda1;
  j["lambda2"] = m.lambda.lambda2;
  j["S1"] = m.active.main.size();
  j["S2"] = m.active.inter.size();
  j["cv_error"] = nullptr;
  for (const auto& pt : m.cv_table)
    if (pt.lambda1 == m.lambda.lambda1 && pt.lambda2 == m.lambda.lambda2) j["cv_error"] = pt.error;
  j["refit"] = m.coef_refit.has_value();
  j["converged"] = m.report.converged;
  j["sweeps"] = m.report.sweeps;
  j["warnings"] = warnings_json(m.warnings);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_predict(const Common& c, const std::string& model_path, bool use_refit) {
  if (model_path.empty()) throw ConfigError("predict: --model is required");
  const FittedModel m = load_model(model_path);
  const FeatureData f = features_from_csv(read_csv(c.data), c.label);
  if (f.X.cols() != m.p)
    throw DataError("predict: model expects " + std::to_string(m.p) + " predictors, data has " +
                    std::to_string(f.X.cols()));
  if (!m.meta.features.empty() && f.names != m.meta.features)
    throw DataError("predict: predictor columns do not match the names stored in the model");
  const Eigen::VectorXd s = predict_scores(m, f.X, use_refit);
  std::string out = "row_id,score,predicted_label\n";
  char buf[40];
  for (Index i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", s[i]);
    out += std::to_string(i + 1) + "," + buf + "," +
           (s[i] > 0.0 ? m.meta.positive_label : m.meta.negative_label) + "\n";
  }
  if (c.output.empty()) {
    std::cout << out;
  } else {
    write_file(c.output, out);
    ordered_json j;
    j["command"] = "predict";
    j["output"] = c.output;
    j["rows"] = s.size();
    j["coefficients"] = use_refit ? "refit" : "penalized";
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_cv(const Common& c) {
  require_seed(c, "cv");
  const LabeledData ld = labeled_from_csv(read_csv(c.data), c.label, c.positive);
  const FitConfig cfg = fit_config(c);
  ld.data.validate(true);
  const CenteredDesign cd = build_design(ld.data, cfg.standardize);
  const GramCache g = build_gram(cd, cfg.gram_cap_bytes);
  const TuningGrid grid = default_grid(g, cfg.grid_sizes);
  const CvResult cv = cross_validate(ld.data, grid, cfg);
  if (!c.output.empty()) {
    std::string t = "lambda1,lambda2,cv_error\n";
    char buf[96];
    for (const auto& pt : cv.table) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", pt.lambda1, pt.lambda2, pt.error);
      t += buf;
    }
    write_file(c.output, t);
  }
  ordered_json j;
  j["command"] = "cv";
  j["n"] = ld.data.n();
  j["p"] = ld.data.p();
  j["positive_label"] = ld.positive_label;
  j["folds"] = cv.folds_used;
  j["lambda1"] = cv.lambda1;
  j["lambda2"] = cv.lambda2;
  j["cv_error"] = cv.table[cv.ratio_index * grid.lambda2_values.size() + cv.lambda2_index].error;
  j["grid_points"] = cv.table.size();
  if (!c.output.empty()) j["table"] = c.output;
  j["warnings"] = warnings_json(cv.warnings);
  std::cout << j.dump() << "\n";
  return 0;
}

struct BenchArgs {
  int model = 1;
  Index p = 20;
  int reps = 50;
  Index n_train = 50;
  Index n_test = 5000;
  std::string methods = "CAP-SQDA,OLS-SQDA,BIC_b,BIC_fb,ORACLE";
  std::string train_counts;
  int splits = 100;
};

int cmd_bench(const Common& c, const BenchArgs& b) {
  require_seed(c, "bench");
  if (c.output.empty()) throw ConfigError("bench: --output is required");
  BenchOptions opt;
  opt.fit = fit_config(c);
  opt.threads = c.threads == 0 ? 1 : c.threads;
  const auto methods = parse_methods(b.methods);
  ordered_json j;
  j["command"] = "bench";
  j["output"] = c.output;
  if (!c.data.empty()) {
    SplitSpec s;
    s.seed = *c.seed;
    s.splits = b.splits;
    int a = 0, bb = 0;
    char comma = 0;
    std::istringstream is(b.train_counts);
    if (!(is >> a >> comma >> bb) || comma != ',')
      throw ConfigError("bench: --train-counts must be 'positive,negative' (e.g. 73,24)");
    s.train_positive = a;
    s.train_negative = bb;
    const LabeledData ld = labeled_from_csv(read_csv(c.data), c.label, c.positive);
    const SplitResult r = run_splits(ld.data, s, methods, opt);
    write_file(c.output, splits_csv(r));
    j["mode"] = "splits";
    j["positive_label"] = ld.positive_label;
    j["splits"] = s.splits;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"method", method_name(row.method)}, {"n_ok", row.n_ok}, {"MR_mean", row.mr.mean}});
    j["rows"] = rows;
  } else {
    SimSpec s;
    s.model = b.model;
    s.p = b.p;
    s.replications = b.reps;
    s.n_train_per_class = b.n_train;
    s.n_test_per_class = b.n_test;
    s.seed = *c.seed;
    const ExperimentResult r = run_experiment(s, methods, opt);
    write_file(c.output, ends_with(c.output, ".json") ? experiment_json(r) : experiment_csv(r));
    j["mode"] = "simulation";
    j["model"] = s.model;
    j["p"] = s.p;
    j["reps"] = s.replications;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
      ordered_json o{{"method", method_name(row.method)}, {"n_ok", row.n_ok}};
      o["MR_mean"] = std::isfinite(row.mr.mean) ? ordered_json(row.mr.mean) : ordered_json(nullptr);
      rows.push_back(o);
    }
    j["rows"] = rows;
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_simulate(const Common& c, int model, Index p, Index n, int rep, const std::string& split) {
  require_seed(c, "simulate");
  if (c.output.empty()) throw ConfigError("simulate: --output is required");
  if (split != "train" && split != "test") throw ConfigError("simulate: --split must be train or test");
  if (rep < 1) throw ConfigError("simulate: --rep is 1-based");
  SimSpec s;
  s.model = model;
  s.p = p;
  s.seed = *c.seed;
  s.replications = rep;
  s.validate();
  const auto r = static_cast<std::uint64_t>(rep - 1);
  Rng prm_rng = make_stream(s.seed, r, "params");
  const ReplicationParams prm = draw_params(s, prm_rng);
  Rng rng = make_stream(s.seed, r, split);
  const Dataset d = generate_dataset(s, prm, n, rng);
  write_file(c.output, dataset_csv(d, "1", "2", c.label));
  ordered_json j;
  j["command"] = "simulate";
  j["output"] = c.output;
  j["model"] = model;
  j["p"] = p;
  j["rows"] = d.n();
  j["positive_label"] = "1";
  std::cout << j.dump() << "\n";
  return 0;
}

int report(int code, const char* kind, const std::string& msg) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = msg;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse quadratic discriminant analysis with composite absolute penalties"};
  app.require_subcommand(1);
  Common c;

  auto add_data_opts = [&](CLI::App* s, bool data_required) {
    auto* o = s->add_option("--data", c.data, "input CSV (header row required)");
    if (data_required) o->required();
    s->add_option("--label", c.label, "name of the label column")->capture_default_str();
    s->add_option("--positive", c.positive, "label value mapped to class +1 (default: smaller label)");
  };
  auto add_fit_opts = [&](CLI::App* s) {
    s->add_option("--seed", c.seed, "master random seed");
    s->add_option("--folds", c.folds, "cross-validation folds")->capture_default_str();
    s->add_option("--grid-l2", c.grid_l2, "number of lambda2 grid values")->capture_default_str();
    s->add_option("--grid-ratios", c.grid_ratios, "number of lambda1/lambda2 ratios")->capture_default_str();
    s->add_option("--tol", c.tol, "coordinate change tolerance")->capture_default_str();
    s->add_option("--max-sweeps", c.max_sweeps, "coordinate descent sweep cap")->capture_default_str();
    s->add_option("--threads", c.threads, "worker threads")->capture_default_str();
    s->add_flag("--standardize", c.standardize, "scale predictors to unit variance before fitting");
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit a model (cross-validated unless lambdas are given)");
  add_data_opts(fit_cmd, true);
  add_fit_opts(fit_cmd);
  std::optional<double> l1, l2;
  bool no_refit = false;
  fit_cmd->add_option("--output", c.output, "model file to write")->required();
  fit_cmd->add_option("--lambda1", l1, "fixed lambda1 (skips CV)");
  fit_cmd->add_option("--lambda2", l2, "fixed lambda2 (skips CV)");
  fit_cmd->add_flag("--no-refit", no_refit, "skip the OLS refit on the active effects");

  auto* pred_cmd = app.add_subcommand("predict", "score and classify rows with a saved model");
  std::string model_path;
  bool use_refit = false;
  add_data_opts(pred_cmd, true);
  pred_cmd->add_option("--model", model_path, "model file")->required();
  pred_cmd->add_option("--output", c.output, "predictions CSV (default: stdout)");
  pred_cmd->add_flag("--refit", use_refit, "use the OLS refit coefficients");

  auto* cv_cmd = app.add_subcommand("cv", "cross-validation table over the default grid");
  add_data_opts(cv_cmd, true);
  add_fit_opts(cv_cmd);
  cv_cmd->add_option("--output", c.output, "CSV file for the full CV table");

  auto* bench_cmd = app.add_subcommand("bench", "simulation benchmark or random-split evaluation");
  BenchArgs b;
  add_data_opts(bench_cmd, false);
  add_fit_opts(bench_cmd);
  bench_cmd->add_option("--model", b.model, "simulation model 1-5")->capture_default_str();
  bench_cmd->add_option("--p", b.p, "number of predictors")->capture_default_str();
  bench_cmd->add_option("--reps", b.reps, "replications")->capture_default_str();
  bench_cmd->add_option("--n-train", b.n_train, "training observations per class")->capture_default_str();
  bench_cmd->add_option("--n-test", b.n_test, "test observations per class")->capture_default_str();
  bench_cmd->add_option("--methods", b.methods, "comma list of CAP-SQDA,OLS-SQDA,BIC_b,BIC_fb,ORACLE,FULL-QDA")
      ->capture_default_str();
  bench_cmd->add_option("--train-counts", b.train_counts, "split mode: training rows per class 'pos,neg'");
  bench_cmd->add_option("--splits", b.splits, "split mode: number of random splits")->capture_default_str();
  bench_cmd->add_option("--output", c.output, "results table (.csv, or .json for simulations)")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "write one simulated sample to CSV");
  int sim_model = 1, sim_rep = 1;
  Index sim_p = 20, sim_n = 50;
  std::string sim_split = "train";
  sim_cmd->add_option("--model", sim_model, "simulation model 1-5")->capture_default_str();
  sim_cmd->add_option("--p", sim_p, "number of predictors")->capture_default_str();
  sim_cmd->add_option("--n", sim_n, "observations per class")->capture_default_str();
  sim_cmd->add_option("--rep", sim_rep, "replication number (1-based)")->capture_default_str();
  sim_cmd->add_option("--split", sim_split, "train or test stream")->capture_default_str();
  sim_cmd->add_option("--seed", c.seed, "master random seed");
  sim_cmd->add_option("--label", c.label, "name of the label column")->capture_default_str();
  sim_cmd->add_option("--output", c.output, "CSV file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(c, l1, l2, no_refit);
    if (*pred_cmd) return cmd_predict(c, model_path, use_refit);
    if (*cv_cmd) return cmd_cv(c);
    if (*bench_cmd) {
      if (!c.data.empty() && b.train_counts.empty())
        throw ConfigError("bench: split mode (--data) needs --train-counts");
      return cmd_bench(c, b);
    }
    if (*sim_cmd) return cmd_simulate(c, sim_model, sim_p, sim_n, sim_rep, sim_split);
  } catch (const ConfigError& e) {
    return report(2, "usage", e.what());
  } catch (const DataError& e) {
    return report(3, "data", e.what());
  } catch (const NumericalError& e) {
    return report(4, "numerical", e.what());
  } catch (const std::exception& e) {
    return report(4, "internal", e.what());
  }
  return 2;
}
