#pragma once

#include <Eigen/Dense>

namespace menn::linalg {

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m);

double min_eigenvalue(const Eigen::MatrixXd& m);
double max_eigenvalue(const Eigen::MatrixXd& m);

/// P M P with P = I - 11'/n, computed by subtracting row and column means.
Eigen::MatrixXd center(const Eigen::MatrixXd& m);

/// Projection onto the PSD cone: eigenvalues below the roundoff floor
/// 64 * eps_mach * max|lambda| are set to zero. `eig_out` receives the
/// clamped spectrum when non-null.
Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& m, SymmetricEigen* eig_out = nullptr);

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol);

}  // namespace menn::linalg
