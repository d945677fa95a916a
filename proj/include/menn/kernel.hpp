#pragma once

#include <Eigen/Dense>

#include <string>

#include "menn/data.hpp"

namespace menn {

enum class KernelKind { kLinear, kGaussian, kPolynomial };

/// k(x, y) for vector data.
///   linear      x'y
///   gaussian    exp(-width * |x - y|^2)
///   polynomial  (x'y + offset)^degree
struct KernelSpec {
  KernelKind kind = KernelKind::kGaussian;
  double width = 1.0;
  int degree = 2;
  double offset = 1.0;

  static KernelSpec linear() { return {KernelKind::kLinear}; }
  static KernelSpec gaussian(double width) { return {KernelKind::kGaussian, width}; }
  static KernelSpec polynomial(int degree, double offset = 1.0) {
    return {KernelKind::kPolynomial, 1.0, degree, offset};
  }

  void validate() const;

  /// Radial and strictly decreasing in the squared distance.
  bool is_radial() const { return kind == KernelKind::kGaussian; }

  std::string describe() const;
};

KernelSpec parse_kernel_kind(const std::string& name);

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// Symmetric n x n Gram matrix. Immutable; column i is the empirical map k_i
/// of training point i.
class KernelMatrix {
 public:
  KernelMatrix() = default;

  /// Takes a user-supplied Gram. Rejects non-square input and asymmetry
  /// beyond 1e-10 relative; stores the exact symmetrization (K + K') / 2.
  explicit KernelMatrix(Eigen::MatrixXd entries);

  Eigen::Index size() const { return entries_.rows(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  auto column(Eigen::Index i) const { return entries_.col(i); }

 private:
  Eigen::MatrixXd entries_;
};

/// K_ij = k(x_i, x_j) over the rows of `features`. Entries are evaluated on
/// the upper triangle and mirrored, so K is exactly symmetric.
KernelMatrix build_gram(const KernelSpec& spec, const Eigen::MatrixXd& features);
KernelMatrix build_gram(const KernelSpec& spec, const LabeledDataset& data);

/// k_t = [k(x_t, x_1), ..., k(x_t, x_n)]'.
Eigen::VectorXd test_map(const KernelSpec& spec, const Eigen::MatrixXd& train_features,
                         const Eigen::Ref<const Eigen::VectorXd>& query);
Eigen::VectorXd test_map(const KernelSpec& spec, const LabeledDataset& train,
                         const Eigen::Ref<const Eigen::VectorXd>& query);

/// Row t holds test_map for query row t.
Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& train_features,
                           const Eigen::MatrixXd& queries);

/// (k_i - k_j)' C (k_i - k_j) = tr(C A_ij) without forming A_ij.
double pair_quadratic_form(const KernelMatrix& gram, const Eigen::MatrixXd& cbar, Eigen::Index i,
                           Eigen::Index j);

/// All pairwise tr(C A_ij) at once from B = K C K: B_ii + B_jj - 2 B_ij,
/// clamped at zero with an exact zero diagonal.
Eigen::MatrixXd pair_quadratic_forms(const KernelMatrix& gram, const Eigen::MatrixXd& cbar);

/// Squared distances between rows; exact zero diagonal.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& rows);

}  // namespace menn
