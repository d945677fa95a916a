#pragma once

#include <Eigen/Dense>

#include <vector>

#include "menn/kernel.hpp"
#include "menn/solver.hpp"

namespace menn {

/// Base Gram matrices K_1..K_q over the same n points.
class KernelDictionary {
 public:
  explicit KernelDictionary(std::vector<Eigen::MatrixXd> grams);
  static KernelDictionary from_specs(const std::vector<KernelSpec>& specs,
                                     const Eigen::MatrixXd& features);

  std::size_t count() const { return grams_.size(); }
  Eigen::Index points() const { return grams_.empty() ? 0 : grams_.front().rows(); }
  const Eigen::MatrixXd& gram(std::size_t r) const { return grams_[r]; }

  /// sum_r beta_r K_r
  Eigen::MatrixXd combine(const Eigen::VectorXd& beta) const;

 private:
  std::vector<Eigen::MatrixXd> grams_;
};

/// Descent settings shared by the two kernel-learning problems.
struct KernelLearningConfig {
  int max_iters = 20000;
  double step_init = 0.0;  // <= 0 picks a scale from the first subgradient
  double step_up = 1.05;
  double step_down = 0.5;
  double tol_objective = 1e-10;
  int convergence_window = 20;
};

/// Induced squared distances k_ii + k_jj - 2 k_ij.
Eigen::MatrixXd kernel_distances(const Eigen::MatrixXd& k);

/// sum_{i != j} [1 + tau_ij d_ij - tau_ij eps]_+ + lambda * |K|_F^2
double transductive_objective(const Eigen::MatrixXd& k, const PairSign& tau, double eps,
                              double lambda);

struct TransductiveKernel {
  Eigen::MatrixXd k;
  double eps = 1.0;
  double objective = 0.0;
  int iterations = 0;
};

/// Learns the Gram matrix itself (K psd, eps > 0) on a fixed labelled set.
/// Starts from the class-indicator Gram plus 1e-3 I.
TransductiveKernel learn_kernel_transductive(const PairSign& tau, double lambda,
                                             const KernelLearningConfig& config = {});

struct MklModel {
  Eigen::VectorXd beta;
  double eps = 1.0;
  double objective = 0.0;
  Eigen::MatrixXd combined;
  std::vector<double> history;  // objective at accepted iterates
  int iterations = 0;
};

/// sum_{i != j} [1 + tau_ij sum_r beta_r d^r_ij - tau_ij eps]_+
///   + lambda * sum_rs beta_r beta_s tr(K_r K_s)
double mkl_objective(const KernelDictionary& dict, const PairSign& tau, const Eigen::VectorXd& beta,
                     double eps, double lambda);

/// Projected subgradient over beta >= 0 and eps >= kEpsMin.
MklModel learn_kernel_combination_qp(const KernelDictionary& dict, const PairSign& tau, double lambda,
                                     const KernelLearningConfig& config = {});

/// True iff, for every query, the ascending neighbour order under the
/// combined-kernel feature distance sum_r beta_r (k_r(t,t) + k_r(i,i) - 2 k_r(t,i))
/// equals the order under raw Euclidean distance (ties by index in both).
/// Every spec must be radial; beta >= 0 and not all zero.
bool qp_ranking_equivalent(const std::vector<KernelSpec>& specs, const Eigen::VectorXd& beta,
                           const Eigen::MatrixXd& queries, const Eigen::MatrixXd& train_features);

}  // namespace menn
