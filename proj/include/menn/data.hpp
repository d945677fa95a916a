#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace menn {

/// Training or evaluation data: feature rows with integer class labels in
/// [0, num_classes). Non-vector metric spaces carry a precomputed Gram matrix
/// instead of features.
struct LabeledDataset {
  Eigen::MatrixXd features;  // n x D; 0 columns when only a Gram is supplied
  std::vector<int> labels;
  std::optional<Eigen::MatrixXd> gram;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  bool has_features() const { return features.cols() > 0; }

  /// Checks n >= 2, contiguous labels covering every class, consistent shapes.
  void validate() const;
};

enum class LabelColumn { kFirst, kLast };

/// Parses a comma-separated file of reals plus one label column. A first row
/// containing a non-numeric feature field is treated as a header. Labels are
/// encoded in first-appearance order unless `label_map` is given.
LabeledDataset load_csv(const std::string& path, LabelColumn label_column,
                        const std::optional<std::map<std::string, int>>& label_map = std::nullopt);
LabeledDataset parse_csv(std::istream& in, LabelColumn label_column,
                         const std::optional<std::map<std::string, int>>& label_map = std::nullopt);

/// Writes features and label (last column, by class name when known) at 17
/// significant digits, so that loading the output reproduces the features.
void write_csv(std::ostream& out, const LabeledDataset& data);

/// Square CSV of reals. Symmetry is checked by the KernelMatrix constructor.
Eigen::MatrixXd load_matrix_csv(const std::string& path);
Eigen::MatrixXd parse_matrix_csv(std::istream& in);
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

/// One label per line, encoded in first-appearance order.
LabeledDataset load_gram_dataset(const std::string& gram_path, const std::string& labels_path);

/// Rows `indices` of `data` (and the matching Gram sub-block when present).
LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices);

/// Per-feature z-score with statistics from the training set only.
class Standardizer {
 public:
  static Standardizer fit(const Eigen::MatrixXd& train_features);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& features) const;
  LabeledDataset transform(const LabeledDataset& data) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;  // 0 marks a constant column
};

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.70;
  double validation_fraction = 0.15;  // of the training portion
  int runs = 10;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Stratified, seeded train/validation/test partitions, one per run. Each
/// class contributes round(fraction * size) members to test and to
/// validation (at least one each), so every class needs >= 3 members.
std::vector<SplitIndices> make_splits(const LabeledDataset& data, const SplitPlan& plan);

/// Stratified sample of `n` rows (proportional allocation, largest remainder).
std::vector<std::size_t> stratified_sample(const LabeledDataset& data, std::size_t n,
                                           std::uint64_t seed);

/// Isotropic unit-variance Gaussian clusters centred at separation * e_c in
/// max(l, 2) dimensions.
LabeledDataset make_blobs(int n_per_class, int num_classes, double separation, std::uint64_t seed);

/// Two interleaved half circles in the first two coordinates, plus
/// `noise_dims` extra Gaussian coordinates with standard deviation
/// `noise_scale` that carry no label information.
LabeledDataset make_moons(int n_per_class, double jitter, int noise_dims, double noise_scale,
                          std::uint64_t seed);

/// Portable Fisher-Yates shuffle driven by mt19937_64 raw output.
void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed);

}  // namespace menn
