#include "menn/kernel.hpp"

#include <cmath>
#include <sstream>

#include "menn/error.hpp"
#include "menn/linalg.hpp"

namespace menn {

void KernelSpec::validate() const {
  switch (kind) {
    case KernelKind::kLinear:
      return;
    case KernelKind::kGaussian:
      if (!(width > 0.0) || !std::isfinite(width)) throw InputError("gaussian kernel needs width > 0");
      return;
    case KernelKind::kPolynomial:
      if (degree < 1) throw InputError("polynomial kernel needs degree >= 1");
      if (!std::isfinite(offset)) throw InputError("polynomial kernel offset must be finite");
      return;
  }
}

std::string KernelSpec::describe() const {
  std::ostringstream out;
  switch (kind) {
    case KernelKind::kLinear:
      out << "linear";
      break;
    case KernelKind::kGaussian:
      out << "gaussian(width=" << width << ")";
      break;
    case KernelKind::kPolynomial:
      out << "polynomial(degree=" << degree << ", offset=" << offset << ")";
      break;
  }
  return out.str();
}

KernelSpec parse_kernel_kind(const std::string& name) {
  if (name == "linear") return KernelSpec::linear();
  if (name == "gaussian") return KernelSpec::gaussian(1.0);
  if (name == "polynomial") return KernelSpec::polynomial(2);
  throw InputError("unknown kernel '" + name + "' (expected linear, gaussian or polynomial)");
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) {
    throw InputError("eval_kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  switch (spec.kind) {
    case KernelKind::kLinear:
      return x.dot(y);
    case KernelKind::kGaussian:
      return std::exp(-spec.width * (x - y).squaredNorm());
    case KernelKind::kPolynomial:
      return std::pow(x.dot(y) + spec.offset, spec.degree);
  }
  return 0.0;
}

KernelMatrix::KernelMatrix(Eigen::MatrixXd entries) {
  if (entries.rows() != entries.cols()) {
    throw InputError("kernel matrix must be square, got " + std::to_string(entries.rows()) + "x" +
                     std::to_string(entries.cols()));
  }
  if (!entries.allFinite()) throw InputError("kernel matrix has non-finite entries");
  if (!linalg::is_symmetric(entries, 1e-10)) throw InputError("kernel matrix is not symmetric");
  entries_ = 0.5 * (entries + entries.transpose());
}

KernelMatrix build_gram(const KernelSpec& spec, const Eigen::MatrixXd& features) {
  spec.validate();
  const Eigen::Index n = features.rows();
  if (n == 0) throw InputError("build_gram: empty dataset");
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = eval_kernel(spec, features.row(i).transpose(), features.row(j).transpose());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return KernelMatrix(std::move(k));
}

KernelMatrix build_gram(const KernelSpec& spec, const LabeledDataset& data) {
  if (!data.has_features()) throw InputError("build_gram: dataset has no feature vectors");
  return build_gram(spec, data.features);
}

Eigen::VectorXd test_map(const KernelSpec& spec, const Eigen::MatrixXd& train_features,
                         const Eigen::Ref<const Eigen::VectorXd>& query) {
  if (query.size() != train_features.cols()) {
    throw InputError("test_map: query has dimension " + std::to_string(query.size()) +
                     ", training data has " + std::to_string(train_features.cols()));
  }
  Eigen::VectorXd out(train_features.rows());
  for (Eigen::Index i = 0; i < train_features.rows(); ++i) {
    out(i) = eval_kernel(spec, query, train_features.row(i).transpose());
  }
  return out;
}

Eigen::VectorXd test_map(const KernelSpec& spec, const LabeledDataset& train,
                         const Eigen::Ref<const Eigen::VectorXd>& query) {
  return test_map(spec, train.features, query);
}

Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& train_features,
                           const Eigen::MatrixXd& queries) {
  spec.validate();
  Eigen::MatrixXd out(queries.rows(), train_features.rows());
  for (Eigen::Index t = 0; t < queries.rows(); ++t) {
    out.row(t) = test_map(spec, train_features, queries.row(t).transpose()).transpose();
  }
  return out;
}

double pair_quadratic_form(const KernelMatrix& gram, const Eigen::MatrixXd& cbar, Eigen::Index i,
                           Eigen::Index j) {
  const Eigen::Index n = gram.size();
  if (cbar.rows() != n || cbar.cols() != n) {
    throw InputError("pair_quadratic_form: C is " + std::to_string(cbar.rows()) + "x" +
                     std::to_string(cbar.cols()) + ", K is " + std::to_string(n) + "x" +
                     std::to_string(n));
  }
  if (i < 0 || j < 0 || i >= n || j >= n) {
    throw InputError("pair_quadratic_form: index out of range");
  }
  if (i == j) return 0.0;
  const Eigen::VectorXd diff = gram.column(i) - gram.column(j);
  return diff.dot(cbar * diff);
}

Eigen::MatrixXd pair_quadratic_forms(const KernelMatrix& gram, const Eigen::MatrixXd& cbar) {
  const Eigen::Index n = gram.size();
  if (cbar.rows() != n || cbar.cols() != n) {
    throw InputError("pair_quadratic_forms: dimension mismatch");
  }
  const Eigen::MatrixXd& k = gram.matrix();
  Eigen::MatrixXd b = k * (cbar * k);
  const Eigen::VectorXd diag = b.diagonal();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      // Average the two off-diagonal products so d is exactly symmetric.
      const double v = std::max(0.0, diag(i) + diag(j) - (b(i, j) + b(j, i)));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = (rows.row(i) - rows.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

}  // namespace menn
