#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "menn/kernel.hpp"

namespace menn {

inline constexpr double kEpsMin = 1e-8;

/// tau_ij = +1 for same-class pairs, -1 otherwise.
class PairSign {
 public:
  PairSign() = default;
  static PairSign from_labels(std::span<const int> labels);
  /// Explicit +-1 matrix; must be symmetric with a +1 diagonal.
  static PairSign from_matrix(Eigen::MatrixXd tau);

  Eigen::Index size() const { return tau_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return tau_(i, j); }
  const Eigen::MatrixXd& matrix() const { return tau_; }

 private:
  Eigen::MatrixXd tau_;
};

enum class SolverMethod {
  // Descent in kernel-PCA coordinates on a smoothed hinge whose smoothing
  // shrinks stage by stage, with momentum and backtracking, finished by
  // kSubgradient steps on the exact objective.
  kSmoothed,
  // Projected subgradient steps on the exact objective in C coordinates.
  kSubgradient,
};

struct SolverConfig {
  SolverMethod method = SolverMethod::kSmoothed;
  double eta = 1.0;  // hinge weight, 1 / lambda~
  int max_iters = 10000;
  double step_init = 0.0;  // <= 0 selects 1e-3 * n / |K|_F
  double step_up = 1.01;
  double step_down = 0.5;
  double tol_objective = 1e-7;
  int convergence_window = 10;
  int active_set_refresh = 100;  // iterations between active-set audits
  bool include_diagonal_pairs = false;

  void validate() const;
};

/// Learned metric rho^2(x_i, x_j) = (k_i - k_j)' C (k_i - k_j) with the
/// neighbourhood radius^2 eps.
struct MetricModel {
  Eigen::MatrixXd cbar;
  double eps = 1.0;
  double objective = 0.0;
  int rank_estimate = 0;
  int iterations = 0;
  bool converged = false;
};

using PairList = std::vector<std::pair<int, int>>;

/// Iterate plus bookkeeping, exposed to observers after every accepted step.
struct SolverState {
  Eigen::MatrixXd cbar;
  double eps = 1.0;
  double step = 0.0;
  double objective = 0.0;
  PairList active;  // ordered pairs with positive hinge at the iterate
  std::vector<double> history;  // objective at each accepted iterate
  int iteration = 0;
};

/// <C, K>_F + eta * sum_ij [1 - tau_ij (eps - tr(A_ij C))]_+ over ordered
/// pairs (i != j unless include_diag).
double objective(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                 double eps, double eta, bool include_diag);

/// Ordered pairs whose hinge term is strictly positive.
PairList active_pairs(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                      double eps, bool include_diag);

struct Subgradient {
  Eigen::MatrixXd cbar;
  double eps = 0.0;
};

/// K + eta * sum_active tau_ij A_ij, and -eta * sum_active tau_ij. The pair
/// sum is accumulated as K L K with L the signed Laplacian of the pair list.
Subgradient subgradient(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                        double eps, double eta, const PairList& active);

/// Centre-then-clamp onto {C psd, 1'C1 = 0} and eps onto [kEpsMin, inf).
std::pair<Eigen::MatrixXd, double> project_feasible(const Eigen::MatrixXd& cbar, double eps);

/// Eigenvalues above 1e-6 * the largest one; 0 for the zero matrix.
int rank_estimate(const Eigen::VectorXd& eigenvalues);

using SolverObserver = std::function<void(const SolverState&)>;

/// Minimizes `objective` over centred PSD C and eps >= kEpsMin. Every trial
/// point counts as one iteration; a trial is accepted when the exact
/// objective does not increase, so the accepted trace is monotone. Steps
/// shrink by step_down on rejection and grow by step_up on success. Stops
/// after max_iters trials or when the relative objective change across the
/// last convergence_window accepted steps drops below tol_objective.
MetricModel solve(const KernelMatrix& gram, const PairSign& tau, const SolverConfig& config,
                  const SolverObserver& on_accept = nullptr);

/// M = X' C X for the linear kernel, so that (x_i - x_j)' M (x_i - x_j)
/// equals pair_quadratic_form(K, C, i, j). Rows of `features` are the data.
Eigen::MatrixXd mahalanobis_of_linear(const Eigen::MatrixXd& cbar, const Eigen::MatrixXd& features);

/// n x d coordinates: row i is L k_i with L = Lambda_d^{1/2} V_d' from the top
/// d eigenpairs of C.
Eigen::MatrixXd extract_embedding(const MetricModel& model, const KernelMatrix& gram, int d);

}  // namespace menn
