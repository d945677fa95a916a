#pragma once

#include <optional>
#include <string>
#include <vector>

#include "menn/data.hpp"
#include "menn/kernel.hpp"
#include "menn/solver.hpp"

namespace menn {

enum class Algorithm { kEuclNn, kKernelNn, kMenn, kMklQp, kTransductive };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

/// Where the data comes from: a feature CSV, or a Gram CSV plus a labels file.
struct DatasetSource {
  std::string name;
  std::string csv_path;
  LabelColumn label_column = LabelColumn::kLast;
  std::string gram_path;
  std::string labels_path;
  std::size_t subsample = 0;  // 0 keeps every row; otherwise a stratified sample
  std::uint64_t subsample_seed = 0;
};

std::vector<double> default_width_grid();       // 2^i, i = -4..4
std::vector<double> default_lambda_grid();      // 10^i, i = -3..3

struct ExperimentConfig {
  DatasetSource source;
  std::vector<Algorithm> algorithms = {Algorithm::kEuclNn, Algorithm::kKernelNn, Algorithm::kMenn};
  std::vector<double> width_grid = default_width_grid();
  std::vector<double> lambda_grid = default_lambda_grid();
  int k = 3;
  SplitPlan split;
  SolverConfig search_solver = search_solver_defaults();  // grid-point fits
  SolverConfig final_solver = final_solver_defaults();    // refit on train + validation
  bool standardize = true;

  static SolverConfig search_solver_defaults();
  static SolverConfig final_solver_defaults();

  void validate() const;
};

/// One grid point scored on the validation portion.
struct GridPoint {
  double width = 0.0;
  double lambda = 0.0;
  double validation_error = 0.0;
  bool converged = true;
};

struct RunResult {
  int run = 0;
  double loo_error = 0.0;   // NaN when not defined for the algorithm
  double test_error = 0.0;  // NaN for the transductive arm
  double width = 0.0;       // selected; NaN when the algorithm has no width
  double lambda = 0.0;      // selected; NaN when the algorithm has no lambda
  bool converged = true;
  std::size_t train_size = 0;  // rows of the final fit: train + validation
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
  std::vector<GridPoint> selection;
  double seconds = 0.0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
  int count = 0;
};

/// Mean and sample standard deviation of the finite values.
Summary summarize(const std::vector<double>& values);

struct AlgorithmReport {
  Algorithm algorithm = Algorithm::kEuclNn;
  std::vector<RunResult> runs;

  Summary loo() const;
  Summary test() const;
};

struct ExperimentReport {
  std::string dataset;
  std::size_t points = 0;
  std::size_t dimension = 0;
  int classes = 0;
  int k = 3;
  SplitPlan split;
  std::vector<double> width_grid;
  std::vector<double> lambda_grid;
  std::vector<AlgorithmReport> algorithms;

  const AlgorithmReport* find(Algorithm algorithm) const;
};

/// Field-wise equality; NaNs compare equal to NaNs. `compare_timing`
/// includes the wall-clock fields.
bool reports_equal(const ExperimentReport& a, const ExperimentReport& b, bool compare_timing);

LabeledDataset load_dataset(const DatasetSource& source);

/// Full protocol on an already loaded dataset: for each split, score every
/// grid point on the validation portion, refit the best (ties favour smaller
/// lambda, then smaller width) on train + validation, then record k-NN LOO
/// error on that portion and k-NN test error on the held-out part.
ExperimentReport run_experiment(const ExperimentConfig& config, const LabeledDataset& data);
ExperimentReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { kTable, kCsv, kJsonLines };

ReportFormat parse_report_format(const std::string& name);

/// table: percentages, mean +- std to two decimals, one column per algorithm.
/// csv:   header "dataset,algorithm,run,metric,value"; one row per
///        (algorithm, run, metric), values at 17 significant digits.
/// jsonl: one header object, then one object per (algorithm, run).
std::string emit_report(const ExperimentReport& report, ReportFormat format,
                        bool include_timing = false);

ExperimentReport parse_report_jsonl(const std::string& text);

/// Single fit on the whole dataset; lambda~ = n * lambda, eta = 1 / lambda~.
struct TrainResult {
  MetricModel model;
  KernelMatrix gram;
  std::optional<Standardizer> standardizer;
};

TrainResult train_once(const LabeledDataset& data, const KernelSpec& spec, double lambda,
                       const SolverConfig& solver, bool standardize);

/// eta for a regularization weight lambda on n points.
double eta_for(double lambda, std::size_t n);

}  // namespace menn
