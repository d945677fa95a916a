#include "menn/linalg.hpp"

#include <cmath>
#include <limits>

#include "menn/error.hpp"

namespace menn::linalg {

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InputError("symmetric_eigen: matrix is not square");
  if (m.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: no convergence");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(m.rows() - 1);
}

Eigen::MatrixXd center(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd col_mean = m.rowwise().mean();
  const Eigen::RowVectorXd row_mean = m.colwise().mean();
  const double all_mean = m.mean();
  Eigen::MatrixXd out = m;
  out.colwise() -= col_mean;
  out.rowwise() -= row_mean;
  out.array() += all_mean;
  return out;
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& m, SymmetricEigen* eig_out) {
  SymmetricEigen eig = symmetric_eigen(m);
  if (eig.values.size() == 0) {
    if (eig_out) *eig_out = std::move(eig);
    return m;
  }
  const double scale = eig.values.cwiseAbs().maxCoeff();
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) <= floor) eig.values(i) = 0.0;
  }
  // Only the kept eigenpairs contribute; with a low-rank spectrum this is
  // much cheaper than V diag(lambda) V'.
  Eigen::Index first = 0;
  while (first < eig.values.size() && eig.values(first) == 0.0) ++first;
  const Eigen::Index kept = eig.values.size() - first;
  Eigen::MatrixXd out;
  if (kept == 0) {
    out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  } else {
    Eigen::MatrixXd scaled = eig.vectors.rightCols(kept) *
                             eig.values.tail(kept).cwiseSqrt().asDiagonal();
    out = scaled * scaled.transpose();
    out = 0.5 * (out + out.transpose()).eval();
  }
  if (eig_out) *eig_out = std::move(eig);
  return out;
}

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace menn::linalg
