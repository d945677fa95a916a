#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <vector>

#include "menn/kernel.hpp"

namespace testing {

// Hand-rolled generators for property tests; every draw comes from one
// seeded engine so failures replay.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Eigen::MatrixXd symmetric(Eigen::Index n) {
    Eigen::MatrixXd a = matrix(n, n);
    return 0.5 * (a + a.transpose());
  }

  // Random psd matrix of the given rank.
  Eigen::MatrixXd psd(Eigen::Index n, Eigen::Index rank) {
    Eigen::MatrixXd f = matrix(n, rank);
    return f * f.transpose();
  }

  // Labels with every class in [0, classes) present.
  std::vector<int> labels(int n, int classes) {
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) y[i] = i < classes ? i : integer(0, classes - 1);
    std::shuffle(y.begin(), y.end(), rng_);
    return y;
  }

  menn::KernelSpec kernel() {
    switch (integer(0, 2)) {
      case 0:
        return menn::KernelSpec::linear();
      case 1:
        return menn::KernelSpec::gaussian(uniform(0.05, 2.0));
      default:
        return menn::KernelSpec::polynomial(integer(1, 3), uniform(0.0, 2.0));
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline Eigen::MatrixXd centering(Eigen::Index n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

}  // namespace testing
