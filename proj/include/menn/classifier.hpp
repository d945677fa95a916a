#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "menn/kernel.hpp"
#include "menn/solver.hpp"

namespace menn {

enum class OracleKind { kRawEuclidean, kEmpiricalMap, kLearned };

/// Squared distances between training points and between a query and the
/// training set. Queries are given in the oracle's representation: raw
/// feature vectors for kRawEuclidean, empirical maps k_t otherwise.
class DistanceOracle {
 public:
  /// Eucl-NN: |x - y|^2 on raw features (rows).
  static DistanceOracle raw_euclidean(Eigen::MatrixXd train_features);
  /// Kernel-NN: |k_t - k_i|^2 on empirical maps.
  static DistanceOracle empirical_map(const KernelMatrix& gram);
  /// (k_t - k_i)' C (k_t - k_i).
  static DistanceOracle learned(const KernelMatrix& gram, const Eigen::MatrixXd& cbar);
  /// Any precomputed n x n squared-distance matrix (symmetric, zero diagonal).
  /// Only train-side queries are available.
  static DistanceOracle precomputed(Eigen::MatrixXd train_distances);

  OracleKind kind() const { return kind_; }
  std::size_t size() const { return static_cast<std::size_t>(train_distances_.rows()); }
  const Eigen::MatrixXd& train_distances() const { return train_distances_; }

  Eigen::VectorXd query_distances(const Eigen::VectorXd& query) const;
  /// One row of distances per query row.
  Eigen::MatrixXd query_distances(const Eigen::MatrixXd& queries) const;

 private:
  OracleKind kind_ = OracleKind::kRawEuclidean;
  Eigen::MatrixXd train_distances_;
  Eigen::MatrixXd train_repr_;  // rows: raw features or empirical maps
  Eigen::MatrixXd metric_;      // C (learned only)
  Eigen::VectorXd train_self_;  // k_i' C k_i (learned only)
  bool queryable_ = true;
};

struct Prediction {
  int label = -1;
  std::vector<std::size_t> neighbors;  // ascending distance, ties by index
  int vote_margin = 0;                 // winning votes minus runner-up votes
};

/// Majority among the k nearest. Distance ties at the k-th slot go to the
/// lower training index; vote ties go to the class whose nearest member is
/// closest, then the lower class id. `exclude` drops one training index
/// (leave-one-out).
Prediction knn_from_distances(const Eigen::Ref<const Eigen::VectorXd>& distances,
                              std::span<const int> labels, int k, long exclude = -1);

/// Majority among points with d^2 <= eps; an empty ball or an exactly tied
/// vote falls back to 1-NN.
Prediction eps_nn_from_distances(const Eigen::Ref<const Eigen::VectorXd>& distances,
                                 std::span<const int> labels, double eps, long exclude = -1);

Prediction knn_classify(const DistanceOracle& oracle, std::span<const int> labels,
                        const Eigen::Ref<const Eigen::VectorXd>& query, int k);
Prediction eps_nn_classify(const DistanceOracle& oracle, std::span<const int> labels,
                           const Eigen::Ref<const Eigen::VectorXd>& query, double eps);

/// Exact leave-one-out error of the eps-neighbourhood rule:
///   1/2 + 1/(2n) sum_i sgn(#opposite in ball - #same in ball excluding i)
/// with sgn(0) = 0.
double loo_error(const DistanceOracle& oracle, std::span<const int> labels, double eps);
double loo_error(const Eigen::MatrixXd& train_distances, std::span<const int> labels, double eps);

/// Fraction of training points misclassified by k-NN with themselves held out.
double knn_loo_error(const DistanceOracle& oracle, std::span<const int> labels, int k);

/// Fraction of queries whose k-NN label differs from `truth`.
double knn_test_error(const DistanceOracle& oracle, std::span<const int> train_labels,
                      const Eigen::MatrixXd& queries, std::span<const int> truth, int k);

}  // namespace menn
