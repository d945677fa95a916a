#include <doctest.h>

#include <cmath>

#include "menn/error.hpp"
#include "menn/kernel.hpp"
#include "menn/linalg.hpp"
#include "support.hpp"

using namespace menn;

TEST_CASE("eval_kernel values") {
  Eigen::Vector2d e1(1, 0), e2(0, 1);
  CHECK(eval_kernel(KernelSpec::gaussian(1.0), e1, e1) == 1.0);
  CHECK(eval_kernel(KernelSpec::linear(), e1, e2) == 0.0);
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(eval_kernel(KernelSpec::gaussian(1.0), a, b) == doctest::Approx(0.367879).epsilon(1e-6));
  Eigen::Vector2d x(1, 2), y(3, -1);
  CHECK(eval_kernel(KernelSpec::polynomial(2, 1.0), x, y) == doctest::Approx(4.0));  // (3 - 2 + 1)^2
  CHECK(eval_kernel(KernelSpec::polynomial(3, 0.0), x, y) == doctest::Approx(1.0));
}

TEST_CASE("eval_kernel rejects mismatched dimensions and bad specs") {
  Eigen::Vector2d x(1, 2);
  Eigen::Vector3d y(1, 2, 3);
  CHECK_THROWS_AS(eval_kernel(KernelSpec::linear(), x, y), InputError);
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), InputError);
  CHECK_THROWS_AS(KernelSpec::gaussian(-1.0).validate(), InputError);
  CHECK_THROWS_AS(KernelSpec::polynomial(0).validate(), InputError);
  CHECK_THROWS_AS(parse_kernel_kind("rbf2"), InputError);
  CHECK(parse_kernel_kind("polynomial").kind == KernelKind::kPolynomial);
}

TEST_CASE("build_gram examples") {
  testing::Gen g(11);
  const Eigen::MatrixXd x = g.matrix(7, 3);

  const KernelMatrix kg = build_gram(KernelSpec::gaussian(0.7), x);
  for (Eigen::Index i = 0; i < 7; ++i) CHECK(kg(i, i) == 1.0);

  const KernelMatrix kl = build_gram(KernelSpec::linear(), x);
  const Eigen::MatrixXd xxt = x * x.transpose();
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 7; ++j) CHECK(kl(i, j) == doctest::Approx(xxt(i, j)).epsilon(1e-14));

  Eigen::MatrixXd dup = x;
  dup.row(4) = dup.row(1);
  const KernelMatrix kd = build_gram(KernelSpec::polynomial(2), dup);
  CHECK((kd.matrix().row(1) - kd.matrix().row(4)).norm() == 0.0);
}

TEST_CASE("KernelMatrix construction checks") {
  CHECK_THROWS_AS(KernelMatrix(Eigen::MatrixXd::Zero(2, 3)), InputError);
  Eigen::MatrixXd a(2, 2);
  a << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(KernelMatrix{a}, InputError);
  a(1, 0) = 0.5 + 1e-14;
  const KernelMatrix k(a);
  CHECK(k(0, 1) == k(1, 0));
}

TEST_CASE("pair_quadratic_form examples") {
  testing::Gen g(3);
  const KernelMatrix k = build_gram(KernelSpec::gaussian(0.5), g.matrix(6, 2));
  const Eigen::MatrixXd c = g.symmetric(6);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(pair_quadratic_form(k, c, i, i) == 0.0);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(6, 6);
  CHECK(pair_quadratic_form(k, id, 1, 4) ==
        doctest::Approx((k.column(1) - k.column(4)).squaredNorm()).epsilon(1e-13));

  const KernelMatrix k2(Eigen::MatrixXd::Identity(2, 2));
  CHECK(pair_quadratic_form(k2, Eigen::MatrixXd::Identity(2, 2), 0, 1) == doctest::Approx(2.0));

  CHECK_THROWS_AS(pair_quadratic_form(k, c, 0, 6), InputError);
  CHECK_THROWS_AS(pair_quadratic_form(k, c, -1, 0), InputError);
  CHECK_THROWS_AS(pair_quadratic_form(k, Eigen::MatrixXd::Zero(5, 5), 0, 1), InputError);
}

TEST_CASE("test_map examples") {
  testing::Gen g(5);
  const Eigen::MatrixXd x = g.matrix(5, 3);
  const KernelSpec gauss = KernelSpec::gaussian(0.3);
  const KernelMatrix k = build_gram(gauss, x);
  const Eigen::VectorXd k1 = test_map(gauss, x, x.row(0).transpose());
  CHECK((k1 - k.column(0)).norm() == 0.0);

  const Eigen::VectorXd far = test_map(gauss, x, Eigen::VectorXd::Constant(3, 1e3));
  CHECK(far.maxCoeff() < 1e-300);

  const Eigen::VectorXd zero = test_map(KernelSpec::linear(), x, Eigen::VectorXd::Zero(3));
  CHECK(zero.norm() == 0.0);
  CHECK(zero.size() == 5);

  CHECK_THROWS_AS(test_map(gauss, x, Eigen::VectorXd::Zero(2)), InputError);

  const Eigen::MatrixXd q = g.matrix(4, 3);
  const Eigen::MatrixXd maps = cross_gram(gauss, x, q);
  for (Eigen::Index t = 0; t < 4; ++t) CHECK((maps.row(t).transpose() - test_map(gauss, x, q.row(t).transpose())).norm() == 0.0);
}

TEST_CASE("property: gram symmetric and psd for every family") {
  testing::Gen g(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = g.integer(1, 50);
    const KernelSpec spec = g.kernel();
    const KernelMatrix k = build_gram(spec, g.matrix(n, g.integer(1, 6)));
    CHECK(k.matrix() == k.matrix().transpose());
    const auto eig = linalg::symmetric_eigen(k.matrix());
    CHECK(eig.values.minCoeff() >= -1e-8 * std::max(1.0, eig.values.maxCoeff()));
  }
}

TEST_CASE("property: pair_quadratic_form symmetry, triangle inequality, explicit A_ij") {
  testing::Gen g(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = g.integer(2, 20);
    const KernelMatrix k = build_gram(g.kernel(), g.matrix(n, 3));
    const Eigen::MatrixXd c = g.psd(n, g.integer(1, n));
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        d(i, j) = pair_quadratic_form(k, c, i, j);
        CHECK(d(i, j) >= 0.0);
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(d(i, j) == doctest::Approx(d(j, i)).epsilon(1e-12));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          CHECK(std::sqrt(d(i, l)) <= std::sqrt(d(i, j)) + std::sqrt(d(j, l)) + 1e-9);
        }

    const Eigen::MatrixXd all = pair_quadratic_forms(k, c);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(testing::rel_err(all(i, j), d(i, j)) < 1e-10);

    if (n <= 10) {
      const Eigen::MatrixXd s = g.symmetric(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const Eigen::VectorXd diff = k.column(i) - k.column(j);
          const Eigen::MatrixXd a = diff * diff.transpose();
          const double frob = (s.array() * a.array()).sum();
          CHECK(std::abs(frob - pair_quadratic_form(k, s, i, j)) <= 1e-10 * std::max(1.0, std::abs(frob)));
        }
    }
  }
}

TEST_CASE("squared_distances") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 3, 4, 1, 1;
  const Eigen::MatrixXd d = squared_distances(x);
  CHECK(d(0, 1) == doctest::Approx(25));
  CHECK(d(2, 1) == doctest::Approx(13));
  CHECK(d.diagonal().norm() == 0.0);
}
