#include "menn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>

#include "menn/classifier.hpp"
#include "menn/error.hpp"
#include "menn/mercer.hpp"

namespace menn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct AlgorithmName {
  Algorithm algorithm;
  const char* name;
};

constexpr AlgorithmName kAlgorithmNames[] = {
    {Algorithm::kEuclNn, "eucl-nn"},   {Algorithm::kKernelNn, "kernel-nn"},
    {Algorithm::kMenn, "menn"},        {Algorithm::kMklQp, "mkl-qp"},
    {Algorithm::kTransductive, "transductive"},
};

}  // namespace

std::string to_string(Algorithm algorithm) {
  for (const auto& entry : kAlgorithmNames) {
    if (entry.algorithm == algorithm) return entry.name;
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (const auto& entry : kAlgorithmNames) {
    if (name == entry.name) return entry.algorithm;
  }
  throw InputError("unknown algorithm '" + name +
                   "' (expected eucl-nn, kernel-nn, menn, mkl-qp or transductive)");
}

std::vector<double> default_width_grid() {
  std::vector<double> grid;
  for (int i = -4; i <= 4; ++i) grid.push_back(std::ldexp(1.0, i));
  return grid;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = -3; i <= 3; ++i) grid.push_back(std::pow(10.0, i));
  return grid;
}

SolverConfig ExperimentConfig::search_solver_defaults() {
  SolverConfig config;
  config.max_iters = 1000;
  config.tol_objective = 1e-6;
  return config;
}

// Same budget as the search, so the refit behaves like the metric that won.
SolverConfig ExperimentConfig::final_solver_defaults() { return search_solver_defaults(); }

void ExperimentConfig::validate() const {
  if (algorithms.empty()) throw InputError("experiment: algorithm list is empty");
  if (width_grid.empty()) throw InputError("experiment: width grid is empty");
  if (lambda_grid.empty()) throw InputError("experiment: lambda grid is empty");
  for (double w : width_grid) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InputError("experiment: widths must be positive");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InputError("experiment: lambdas must be positive");
  }
  if (k < 1) throw InputError("experiment: k must be >= 1");
  split.validate();
  search_solver.validate();
  final_solver.validate();
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  }
  if (s.count == 0) return {kNaN, kNaN, 0};
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) {
      if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.stddev = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

Summary AlgorithmReport::loo() const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.loo_error);
  return summarize(v);
}

Summary AlgorithmReport::test() const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.test_error);
  return summarize(v);
}

const AlgorithmReport* ExperimentReport::find(Algorithm algorithm) const {
  for (const auto& a : algorithms) {
    if (a.algorithm == algorithm) return &a;
  }
  return nullptr;
}

namespace {

bool same_real(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_reals(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_real(a[i], b[i])) return false;
  }
  return true;
}

bool same_run(const RunResult& a, const RunResult& b, bool timing) {
  if (a.run != b.run || !same_real(a.loo_error, b.loo_error) || !same_real(a.test_error, b.test_error) ||
      !same_real(a.width, b.width) || !same_real(a.lambda, b.lambda) || a.converged != b.converged ||
      a.train_size != b.train_size || a.validation_size != b.validation_size ||
      a.test_size != b.test_size || a.validation_indices != b.validation_indices ||
      a.test_indices != b.test_indices || a.selection.size() != b.selection.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.selection.size(); ++i) {
    const auto& x = a.selection[i];
    const auto& y = b.selection[i];
    if (!same_real(x.width, y.width) || !same_real(x.lambda, y.lambda) ||
        !same_real(x.validation_error, y.validation_error) || x.converged != y.converged) {
      return false;
    }
  }
  return !timing || same_real(a.seconds, b.seconds);
}

}  // namespace

bool reports_equal(const ExperimentReport& a, const ExperimentReport& b, bool compare_timing) {
  if (a.dataset != b.dataset || a.points != b.points || a.dimension != b.dimension ||
      a.classes != b.classes || a.k != b.k || a.split.seed != b.split.seed ||
      !same_real(a.split.train_fraction, b.split.train_fraction) ||
      !same_real(a.split.validation_fraction, b.split.validation_fraction) ||
      a.split.runs != b.split.runs || !same_reals(a.width_grid, b.width_grid) ||
      !same_reals(a.lambda_grid, b.lambda_grid) || a.algorithms.size() != b.algorithms.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.algorithms.size(); ++i) {
    const auto& x = a.algorithms[i];
    const auto& y = b.algorithms[i];
    if (x.algorithm != y.algorithm || x.runs.size() != y.runs.size()) return false;
    for (std::size_t r = 0; r < x.runs.size(); ++r) {
      if (!same_run(x.runs[r], y.runs[r], compare_timing)) return false;
    }
  }
  return true;
}

LabeledDataset load_dataset(const DatasetSource& source) {
  LabeledDataset data;
  if (!source.gram_path.empty()) {
    if (source.labels_path.empty()) throw InputError("a Gram dataset needs a labels file");
    data = load_gram_dataset(source.gram_path, source.labels_path);
  } else {
    if (source.csv_path.empty()) throw InputError("no dataset path given");
    data = load_csv(source.csv_path, source.label_column);
  }
  if (source.subsample > 0 && source.subsample < data.size()) {
    const auto rows = stratified_sample(data, source.subsample, source.subsample_seed);
    data = subset(data, rows);
  }
  data.validate();
  return data;
}

double eta_for(double lambda, std::size_t n) {
  if (!(lambda > 0.0)) throw InputError("lambda must be positive");
  if (n == 0) throw InputError("eta_for: empty training set");
  return 1.0 / (static_cast<double>(n) * lambda);
}

TrainResult train_once(const LabeledDataset& data, const KernelSpec& spec, double lambda,
                       const SolverConfig& solver, bool standardize) {
  data.validate();
  std::optional<Standardizer> scaler;
  KernelMatrix gram;
  if (data.has_features()) {
    Eigen::MatrixXd x = data.features;
    if (standardize) {
      scaler = Standardizer::fit(x);
      x = scaler->transform(x);
    }
    gram = build_gram(spec, x);
  } else {
    gram = KernelMatrix(*data.gram);
  }
  SolverConfig config = solver;
  config.eta = eta_for(lambda, data.size());
  MetricModel model = solve(gram, PairSign::from_labels(data.labels), config);
  return {std::move(model), std::move(gram), std::move(scaler)};
}

namespace {

std::vector<int> labels_at(const LabeledDataset& data, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.labels[r]);
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::MatrixXd block_of(const Eigen::MatrixXd& m, std::span<const std::size_t> rows,
                         std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    }
  }
  return out;
}

Eigen::MatrixXd cross_squared_distances(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& train) {
  Eigen::MatrixXd d(queries.rows(), train.rows());
  for (Eigen::Index t = 0; t < queries.rows(); ++t) {
    for (Eigen::Index i = 0; i < train.rows(); ++i) d(t, i) = (queries.row(t) - train.row(i)).squaredNorm();
  }
  return d;
}

// A training portion and a query portion of one dataset, with features
// standardized on the training portion. Gram-only datasets are sliced.
class Fold {
 public:
  Fold(const LabeledDataset& data, std::vector<std::size_t> train, std::vector<std::size_t> query,
       bool standardize)
      : data_(data), train_(std::move(train)), query_(std::move(query)) {
    train_labels_ = labels_at(data, train_);
    query_labels_ = labels_at(data, query_);
    if (data.has_features()) {
      train_x_ = rows_of(data.features, train_);
      query_x_ = rows_of(data.features, query_);
      if (standardize) {
        const auto scaler = Standardizer::fit(train_x_);
        train_x_ = scaler.transform(train_x_);
        query_x_ = scaler.transform(query_x_);
      }
    }
  }

  bool has_features() const { return data_.has_features(); }
  std::size_t train_size() const { return train_.size(); }
  const std::vector<int>& train_labels() const { return train_labels_; }
  const std::vector<int>& query_labels() const { return query_labels_; }

  KernelMatrix train_gram(double width) const {
    if (has_features()) return build_gram(KernelSpec::gaussian(width), train_x_);
    return KernelMatrix(block_of(*data_.gram, train_, train_));
  }

  // Row t is the empirical map of query t.
  Eigen::MatrixXd query_maps(double width) const {
    if (has_features()) return cross_gram(KernelSpec::gaussian(width), train_x_, query_x_);
    return block_of(*data_.gram, query_, train_);
  }

  Eigen::VectorXd query_self(double width) const {
    (void)width;
    if (has_features()) return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(query_.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(query_.size()));
    for (std::size_t t = 0; t < query_.size(); ++t) {
      out(static_cast<Eigen::Index>(t)) = (*data_.gram)(static_cast<Eigen::Index>(query_[t]), static_cast<Eigen::Index>(query_[t]));
    }
    return out;
  }

  // Squared distances in the input space; for Gram-only data the kernel
  // induced distance stands in.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> euclidean() const {
    if (has_features()) return {squared_distances(train_x_), cross_squared_distances(query_x_, train_x_)};
    const KernelMatrix k = train_gram(0.0);
    const Eigen::MatrixXd train = kernel_distances(k.matrix());
    const Eigen::MatrixXd maps = query_maps(0.0);
    const Eigen::VectorXd self = query_self(0.0);
    Eigen::MatrixXd cross(maps.rows(), maps.cols());
    for (Eigen::Index t = 0; t < maps.rows(); ++t) {
      for (Eigen::Index i = 0; i < maps.cols(); ++i) cross(t, i) = self(t) + k(i, i) - 2.0 * maps(t, i);
    }
    return {train.cwiseMax(0.0), cross.cwiseMax(0.0)};
  }

 private:
  const LabeledDataset& data_;
  std::vector<std::size_t> train_, query_;
  std::vector<int> train_labels_, query_labels_;
  Eigen::MatrixXd train_x_, query_x_;
};

double query_error(const Eigen::MatrixXd& query_distances, const std::vector<int>& train_labels,
                   const std::vector<int>& truth, int k) {
  if (truth.empty()) return kNaN;
  std::size_t wrong = 0;
  for (Eigen::Index t = 0; t < query_distances.rows(); ++t) {
    const Prediction p = knn_from_distances(query_distances.row(t).transpose(), train_labels, k);
    if (p.label != truth[static_cast<std::size_t>(t)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

struct Distances {
  Eigen::MatrixXd train;
  Eigen::MatrixXd query;
  bool converged = true;
};

// One fitted metric evaluated on a fold.
class Arm {
 public:
  virtual ~Arm() = default;
  virtual bool uses_width() const = 0;
  virtual bool uses_lambda() const = 0;
  virtual Distances fit(const Fold& fold, double width, double lambda, bool final) const = 0;
};

class EuclideanArm : public Arm {
 public:
  bool uses_width() const override { return false; }
  bool uses_lambda() const override { return false; }
  Distances fit(const Fold& fold, double, double, bool) const override {
    auto [train, query] = fold.euclidean();
    return {std::move(train), std::move(query), true};
  }
};

class KernelMapArm : public Arm {
 public:
  bool uses_width() const override { return true; }
  bool uses_lambda() const override { return false; }
  Distances fit(const Fold& fold, double width, double, bool) const override {
    const auto oracle = DistanceOracle::empirical_map(fold.train_gram(width));
    return {oracle.train_distances(), oracle.query_distances(fold.query_maps(width)), true};
  }
};

class MennArm : public Arm {
 public:
  MennArm(SolverConfig search, SolverConfig final) : search_(search), final_(final) {}
  bool uses_width() const override { return true; }
  bool uses_lambda() const override { return true; }
  Distances fit(const Fold& fold, double width, double lambda, bool final) const override {
    const KernelMatrix gram = fold.train_gram(width);
    SolverConfig config = final ? final_ : search_;
    config.eta = eta_for(lambda, fold.train_size());
    const MetricModel model = solve(gram, PairSign::from_labels(fold.train_labels()), config);
    const auto oracle = DistanceOracle::learned(gram, model.cbar);
    return {oracle.train_distances(), oracle.query_distances(fold.query_maps(width)), model.converged};
  }

 private:
  SolverConfig search_, final_;
};

KernelLearningConfig mkl_config() {
  KernelLearningConfig config;
  config.max_iters = 2000;
  config.tol_objective = 1e-8;
  return config;
}

// Gaussian dictionary over the whole width grid; lambda is searched.
class MklArm : public Arm {
 public:
  explicit MklArm(std::vector<double> widths) : widths_(std::move(widths)) {}
  bool uses_width() const override { return false; }
  bool uses_lambda() const override { return true; }
  Distances fit(const Fold& fold, double, double lambda, bool) const override {
    std::vector<Eigen::MatrixXd> grams, maps;
    std::vector<Eigen::VectorXd> selves;
    const std::vector<double> widths = fold.has_features() ? widths_ : std::vector<double>{0.0};
    for (double w : widths) {
      grams.push_back(fold.train_gram(w).matrix());
      maps.push_back(fold.query_maps(w));
      selves.push_back(fold.query_self(w));
    }
    const KernelDictionary dict(grams);
    const double lambda_tilde = static_cast<double>(fold.train_size()) * lambda;
    const MklModel model =
        learn_kernel_combination_qp(dict, PairSign::from_labels(fold.train_labels()), lambda_tilde, mkl_config());
    Distances out;
    out.train = kernel_distances(model.combined).cwiseMax(0.0);
    out.train.diagonal().setZero();
    out.query = Eigen::MatrixXd::Zero(maps.front().rows(), maps.front().cols());
    for (std::size_t r = 0; r < grams.size(); ++r) {
      const double b = model.beta(static_cast<Eigen::Index>(r));
      if (b == 0.0) continue;
      for (Eigen::Index t = 0; t < out.query.rows(); ++t) {
        for (Eigen::Index i = 0; i < out.query.cols(); ++i) {
          out.query(t, i) += b * (selves[r](t) + grams[r](i, i) - 2.0 * maps[r](t, i));
        }
      }
    }
    out.query = out.query.cwiseMax(0.0);
    out.converged = model.iterations < mkl_config().max_iters;
    return out;
  }

 private:
  std::vector<double> widths_;
};

struct Candidate {
  double width;
  double lambda;
};

// Candidates ordered so that the first minimum wins: smaller lambda first,
// then smaller width.
std::vector<Candidate> candidates(const Arm& arm, const ExperimentConfig& config, bool features) {
  std::vector<double> widths = arm.uses_width() && features ? config.width_grid : std::vector<double>{kNaN};
  std::vector<double> lambdas = arm.uses_lambda() ? config.lambda_grid : std::vector<double>{kNaN};
  std::sort(widths.begin(), widths.end());
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<Candidate> out;
  for (double l : lambdas) {
    for (double w : widths) out.push_back({w, l});
  }
  return out;
}

std::vector<std::size_t> merged(const SplitIndices& split) {
  std::vector<std::size_t> rows = split.train;
  rows.insert(rows.end(), split.validation.begin(), split.validation.end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

RunResult run_arm(const Arm& arm, const ExperimentConfig& config, const LabeledDataset& data,
                  const SplitIndices& split, int run) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.run = run;
  result.validation_indices = split.validation;
  result.test_indices = split.test;
  result.validation_size = split.validation.size();
  result.test_size = split.test.size();

  const auto grid = candidates(arm, config, data.has_features());
  Candidate chosen = grid.front();
  if (grid.size() > 1) {
    const Fold search(data, split.train, split.validation, config.standardize);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : grid) {
      const Distances d = arm.fit(search, c.width, c.lambda, false);
      const double err = query_error(d.query, search.train_labels(), search.query_labels(), config.k);
      result.selection.push_back({c.width, c.lambda, err, d.converged});
      if (err < best) {
        best = err;
        chosen = c;
      }
    }
  }

  const auto fit_rows = merged(split);
  result.train_size = fit_rows.size();
  const Fold final_fold(data, fit_rows, split.test, config.standardize);
  const Distances d = arm.fit(final_fold, chosen.width, chosen.lambda, true);
  result.width = chosen.width;
  result.lambda = chosen.lambda;
  result.converged = d.converged;
  result.loo_error =
      knn_loo_error(DistanceOracle::precomputed(d.train), final_fold.train_labels(), config.k);
  result.test_error = query_error(d.query, final_fold.train_labels(), final_fold.query_labels(), config.k);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Learns the Gram matrix on train + validation directly. No out-of-sample
// rule exists, so only the leave-one-out error is reported, at the smallest
// lambda of the grid.
RunResult run_transductive(const ExperimentConfig& config, const LabeledDataset& data,
                           const SplitIndices& split, int run) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.run = run;
  result.validation_indices = split.validation;
  result.test_indices = split.test;
  result.validation_size = split.validation.size();
  result.test_size = split.test.size();
  const auto rows = merged(split);
  result.train_size = rows.size();
  const auto labels = labels_at(data, rows);
  const double lambda = *std::min_element(config.lambda_grid.begin(), config.lambda_grid.end());
  KernelLearningConfig kl;
  kl.max_iters = 2000;
  const auto learned = learn_kernel_transductive(PairSign::from_labels(labels),
                                                 static_cast<double>(rows.size()) * lambda, kl);
  Eigen::MatrixXd d = kernel_distances(learned.k).cwiseMax(0.0);
  d.diagonal().setZero();
  result.width = kNaN;
  result.lambda = lambda;
  result.converged = learned.iterations < kl.max_iters;
  result.loo_error = knn_loo_error(DistanceOracle::precomputed(d), labels, config.k);
  result.test_error = kNaN;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const LabeledDataset& data) {
  config.validate();
  data.validate();
  const auto splits = make_splits(data, config.split);

  ExperimentReport report;
  report.dataset = config.source.name;
  if (report.dataset.empty()) {
    report.dataset = stem_of(config.source.gram_path.empty() ? config.source.csv_path : config.source.gram_path);
  }
  report.points = data.size();
  report.dimension = static_cast<std::size_t>(data.features.cols());
  report.classes = data.num_classes;
  report.k = config.k;
  report.split = config.split;
  report.width_grid = config.width_grid;
  report.lambda_grid = config.lambda_grid;

  for (Algorithm algorithm : config.algorithms) {
    AlgorithmReport ar;
    ar.algorithm = algorithm;
    std::unique_ptr<Arm> arm;
    switch (algorithm) {
      case Algorithm::kEuclNn:
        arm = std::make_unique<EuclideanArm>();
        break;
      case Algorithm::kKernelNn:
        arm = std::make_unique<KernelMapArm>();
        break;
      case Algorithm::kMenn:
        arm = std::make_unique<MennArm>(config.search_solver, config.final_solver);
        break;
      case Algorithm::kMklQp:
        arm = std::make_unique<MklArm>(config.width_grid);
        break;
      case Algorithm::kTransductive:
        break;
    }
    for (std::size_t r = 0; r < splits.size(); ++r) {
      const int run = static_cast<int>(r);
      ar.runs.push_back(arm ? run_arm(*arm, config, data, splits[r], run)
                            : run_transductive(config, data, splits[r], run));
    }
    report.algorithms.push_back(std::move(ar));
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, load_dataset(config.source));
}

}  // namespace menn
