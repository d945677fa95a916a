// Command-line front end: run, train, eval, gram.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "menn/classifier.hpp"
#include "menn/error.hpp"
#include "menn/experiment.hpp"
#include "menn/model_io.hpp"

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

struct DataFlags {
  std::string csv;
  std::string label_column = "last";
  std::string gram;
  std::string labels;
  std::string name;
  std::size_t subsample = 0;
  std::uint64_t subsample_seed = 0;

  void add(CLI::App* app, const std::string& csv_flag = "--data") {
    app->add_option(csv_flag, csv, "feature CSV (reals plus one label column)");
    app->add_option("--label-column", label_column, "position of the label column")
        ->check(CLI::IsMember({"first", "last"}));
    app->add_option("--gram", gram, "precomputed square Gram CSV instead of features");
    app->add_option("--labels", labels, "one label per line, paired with --gram");
    app->add_option("--name", name, "dataset name used in reports");
    app->add_option("--subsample", subsample, "stratified subsample size (0 keeps all rows)");
    app->add_option("--subsample-seed", subsample_seed, "seed for --subsample");
  }

  menn::DatasetSource source() const {
    menn::DatasetSource s;
    s.name = name;
    s.csv_path = csv;
    s.label_column = label_column == "first" ? menn::LabelColumn::kFirst : menn::LabelColumn::kLast;
    s.gram_path = gram;
    s.labels_path = labels;
    s.subsample = subsample;
    s.subsample_seed = subsample_seed;
    return s;
  }
};

struct KernelFlags {
  std::string kind = "gaussian";
  double width = 1.0;
  int degree = 2;
  double offset = 1.0;

  void add(CLI::App* app) {
    app->add_option("--kernel", kind, "kernel family")->check(CLI::IsMember({"linear", "gaussian", "polynomial"}));
    app->add_option("--width", width, "gaussian width rho in exp(-rho |x-y|^2)");
    app->add_option("--degree", degree, "polynomial degree");
    app->add_option("--offset", offset, "polynomial offset");
  }

  menn::KernelSpec spec() const {
    menn::KernelSpec s = menn::parse_kernel_kind(kind);
    s.width = width;
    s.degree = degree;
    s.offset = offset;
    s.validate();
    return s;
  }
};

struct SolverFlags {
  std::string method = "smoothed";
  int max_iters = 10000;
  double tol = 1e-7;
  double step_init = 0.0;
  int refresh = 100;
  bool include_diagonal = false;

  void add(CLI::App* app, const std::string& prefix = "") {
    app->add_option("--" + prefix + "method", method, "smoothed or subgradient")
        ->check(CLI::IsMember({"smoothed", "subgradient"}));
    app->add_option("--" + prefix + "max-iters", max_iters, "solver iteration cap");
    app->add_option("--" + prefix + "tol", tol, "relative objective change for convergence");
    app->add_option("--" + prefix + "step-init", step_init, "initial step (0 picks 1e-3 n / |K|_F)");
    app->add_option("--" + prefix + "active-set-refresh", refresh, "iterations between active-set audits");
    app->add_flag("--" + prefix + "include-diagonal", include_diagonal, "keep i = j pairs in the hinge sum");
  }

  void apply(menn::SolverConfig& c) const {
    c.method = method == "subgradient" ? menn::SolverMethod::kSubgradient : menn::SolverMethod::kSmoothed;
    c.max_iters = max_iters;
    c.tol_objective = tol;
    c.step_init = step_init;
    c.active_set_refresh = refresh;
    c.include_diagonal_pairs = include_diagonal;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw menn::InputError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric embedding for nearest-neighbour classification"};
  app.set_config("--config", "", "key = value configuration file; flags override it");
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "cross-validated experiment over splits and grids");
  DataFlags run_data;
  run_data.add(run);
  std::string algorithms = "eucl-nn,kernel-nn,menn";
  std::vector<double> widths = menn::default_width_grid();
  std::vector<double> lambdas = menn::default_lambda_grid();
  int k = 3;
  menn::SplitPlan plan;
  bool no_standardize = false;
  SolverFlags search_flags, final_flags;
  {
    const auto d = menn::ExperimentConfig::search_solver_defaults();
    search_flags.max_iters = d.max_iters;
    search_flags.tol = d.tol_objective;
    const auto f = menn::ExperimentConfig::final_solver_defaults();
    final_flags.max_iters = f.max_iters;
    final_flags.tol = f.tol_objective;
  }
  std::string format = "table";
  std::string output;
  bool timing = false;
  run->add_option("--algorithms", algorithms, "comma list of eucl-nn, kernel-nn, menn, mkl-qp, transductive");
  run->add_option("--widths", widths, "gaussian width grid")->delimiter(',');
  run->add_option("--lambdas", lambdas, "regularization grid")->delimiter(',');
  run->add_option("--k", k, "neighbours for k-NN");
  run->add_option("--seed", plan.seed, "split seed");
  run->add_option("--runs", plan.runs, "number of random splits");
  run->add_option("--train-fraction", plan.train_fraction, "train + validation share");
  run->add_option("--validation-fraction", plan.validation_fraction, "validation share of the training portion");
  run->add_flag("--no-standardize", no_standardize, "skip per-feature z-scoring");
  search_flags.add(run, "search-");
  final_flags.add(run);
  run->add_option("--format", format, "report format")->check(CLI::IsMember({"table", "csv", "jsonl"}));
  run->add_option("--output", output, "report path (stdout when omitted)");
  run->add_flag("--timing", timing, "include wall-clock seconds per run");

  // train
  auto* train = app.add_subcommand("train", "fit one metric on a whole dataset");
  DataFlags train_data;
  train_data.add(train);
  KernelFlags train_kernel;
  train_kernel.add(train);
  double train_lambda = 1.0;
  SolverFlags train_solver;
  std::string model_path;
  bool strict = false;
  bool train_standardize = true;
  train->add_option("--lambda", train_lambda, "regularization weight (eta = 1 / (n lambda))");
  train_solver.add(train);
  train->add_option("--model", model_path, "output model file")->required();
  train->add_flag("--strict", strict, "exit with status 2 if the solver does not converge");
  train->add_flag("!--no-standardize", train_standardize, "skip per-feature z-scoring");

  // eval
  auto* eval = app.add_subcommand("eval", "errors of a saved model");
  DataFlags eval_train;
  eval_train.add(eval, "--train");
  std::string eval_test;
  KernelFlags eval_kernel;
  eval_kernel.add(eval);
  std::string eval_model;
  int eval_k = 3;
  bool eval_standardize = true;
  eval->add_option("--model", eval_model, "model written by train")->required();
  eval->add_option("--test", eval_test, "held-out CSV with the same label column");
  eval->add_option("--k", eval_k, "neighbours for k-NN");
  eval->add_flag("!--no-standardize", eval_standardize, "skip per-feature z-scoring");

  // gram
  auto* gram = app.add_subcommand("gram", "write the Gram matrix of a dataset as CSV");
  DataFlags gram_data;
  gram_data.add(gram);
  KernelFlags gram_kernel;
  gram_kernel.add(gram);
  bool gram_standardize = false;
  std::string gram_output;
  gram->add_flag("--standardize", gram_standardize, "z-score features first");
  gram->add_option("--output", gram_output, "output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*run) {
      menn::ExperimentConfig config;
      config.source = run_data.source();
      config.algorithms.clear();
      for (const auto& name : split_list(algorithms)) config.algorithms.push_back(menn::parse_algorithm(name));
      config.width_grid = widths;
      config.lambda_grid = lambdas;
      config.k = k;
      config.split = plan;
      config.standardize = !no_standardize;
      search_flags.apply(config.search_solver);
      final_flags.apply(config.final_solver);
      const auto report = menn::run_experiment(config);
      write_text(output, menn::emit_report(report, menn::parse_report_format(format), timing));
      return 0;
    }

    if (*train) {
      const auto data = menn::load_dataset(train_data.source());
      menn::SolverConfig solver;
      train_solver.apply(solver);
      const auto result = menn::train_once(data, train_kernel.spec(), train_lambda, solver, train_standardize);
      menn::save_model(model_path, result.model);
      std::printf("objective %.10g\nrank_estimate %d\neps %.10g\niterations %d\nconverged %s\n",
                  result.model.objective, result.model.rank_estimate, result.model.eps,
                  result.model.iterations, result.model.converged ? "yes" : "no");
      if (strict && !result.model.converged) {
        std::fprintf(stderr, "menn: solver did not converge within %d iterations\n", solver.max_iters);
        return kExitNotConverged;
      }
      return 0;
    }

    if (*eval) {
      const auto source = eval_train.source();
      const auto data = menn::load_dataset(source);
      const auto model = menn::load_model(eval_model);
      if (model.cbar.rows() != static_cast<Eigen::Index>(data.size())) {
        throw menn::InputError("model covers " + std::to_string(model.cbar.rows()) +
                               " points, training data has " + std::to_string(data.size()));
      }
      std::optional<menn::Standardizer> scaler;
      Eigen::MatrixXd x = data.features;
      menn::KernelMatrix k_train;
      if (data.has_features()) {
        if (eval_standardize) {
          scaler = menn::Standardizer::fit(x);
          x = scaler->transform(x);
        }
        k_train = menn::build_gram(eval_kernel.spec(), x);
      } else {
        k_train = menn::KernelMatrix(*data.gram);
      }
      const auto oracle = menn::DistanceOracle::learned(k_train, model.cbar);
      std::printf("knn_loo_error %.17g\n", menn::knn_loo_error(oracle, data.labels, eval_k));
      std::printf("eps_loo_error %.17g\n", menn::loo_error(oracle, data.labels, model.eps));
      if (!eval_test.empty()) {
        if (!data.has_features()) throw menn::InputError("--test needs a feature dataset for training");
        std::map<std::string, int> names;
        for (std::size_t c = 0; c < data.class_names.size(); ++c) names[data.class_names[c]] = static_cast<int>(c);
        auto test = menn::load_csv(eval_test, source.label_column, names);
        if (test.features.cols() != data.features.cols()) {
          throw menn::InputError("test features have " + std::to_string(test.features.cols()) +
                                 " columns, training features have " + std::to_string(data.features.cols()));
        }
        Eigen::MatrixXd q = scaler ? scaler->transform(test.features) : test.features;
        const Eigen::MatrixXd maps = menn::cross_gram(eval_kernel.spec(), x, q);
        std::printf("test_error %.17g\n", menn::knn_test_error(oracle, data.labels, maps, test.labels, eval_k));
      }
      return 0;
    }

    if (*gram) {
      auto data = menn::load_dataset(gram_data.source());
      if (!data.has_features()) throw menn::InputError("gram needs a feature dataset");
      Eigen::MatrixXd x = data.features;
      if (gram_standardize) x = menn::Standardizer::fit(x).transform(x);
      std::ostringstream out;
      menn::write_matrix_csv(out, menn::build_gram(gram_kernel.spec(), x).matrix());
      write_text(gram_output, out.str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "menn: %s\n", e.what());
    return kExitInput;
  }
  return 0;
}
