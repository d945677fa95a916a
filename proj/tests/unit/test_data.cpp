#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "menn/classifier.hpp"
#include "menn/data.hpp"
#include "menn/error.hpp"
#include "support.hpp"

using namespace menn;

TEST_CASE("parse_csv label encoding") {
  std::istringstream in("1,2,b\n3,4,a\n5,6,b\n");
  const LabeledDataset d = parse_csv(in, LabelColumn::kLast);
  CHECK(d.labels == std::vector<int>{0, 1, 0});
  CHECK(d.class_names == std::vector<std::string>{"b", "a"});
  CHECK(d.features(1, 1) == 4.0);
  CHECK(d.num_classes == 2);

  std::istringstream first("g,0.5\nb,1.5\ng,2.5\n");
  const LabeledDataset m = parse_csv(first, LabelColumn::kFirst, std::map<std::string, int>{{"g", 0}, {"b", 1}});
  CHECK(m.labels == std::vector<int>{0, 1, 0});
  CHECK(m.features(2, 0) == 2.5);

  std::istringstream header("x,y,label\n1,2,a\n3,4,b\n");
  CHECK(parse_csv(header, LabelColumn::kLast).size() == 2);
}

TEST_CASE("parse_csv errors") {
  std::istringstream ragged("1,2,a\n3,b\n");
  try {
    parse_csv(ragged, LabelColumn::kLast);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream text("1,2,a\n3,zz,b\n");
  CHECK_THROWS_AS(parse_csv(text, LabelColumn::kLast), InputError);
  std::istringstream unknown("1,a\n2,c\n");
  CHECK_THROWS_AS(parse_csv(unknown, LabelColumn::kLast, std::map<std::string, int>{{"a", 0}}), InputError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_csv(empty, LabelColumn::kLast), InputError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", LabelColumn::kLast), InputError);
}

TEST_CASE("csv round trip is exact") {
  testing::Gen g(1);
  LabeledDataset d;
  d.features = g.matrix(9, 4) * 1e3;
  d.features(0, 0) = 1.0 / 3.0;
  d.labels = g.labels(9, 3);
  d.num_classes = 3;
  std::stringstream s;
  write_csv(s, d);
  const LabeledDataset back = parse_csv(s, LabelColumn::kLast);
  CHECK(back.features == d.features);
  CHECK(back.size() == 9);
  // Labels are re-encoded by first appearance, so compare the partition.
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) CHECK((back.labels[i] == back.labels[j]) == (d.labels[i] == d.labels[j]));
}

TEST_CASE("matrix csv") {
  std::istringstream in("1,0.5\n0.5,2\n");
  const Eigen::MatrixXd m = parse_matrix_csv(in);
  CHECK(m(1, 1) == 2.0);
  std::stringstream out;
  write_matrix_csv(out, m);
  CHECK(parse_matrix_csv(out) == m);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(parse_matrix_csv(ragged), InputError);
}

TEST_CASE("standardize") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
  const Standardizer s = Standardizer::fit(x);
  const Eigen::MatrixXd z = s.transform(x);
  for (int c : {0, 2}) {
    CHECK(std::abs(z.col(c).mean()) <= 1e-12);
    CHECK(std::sqrt(z.col(c).squaredNorm() / 4.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(z.col(1).norm() == 0.0);
  Eigen::MatrixXd q(1, 3);
  q << 2.5, 7.0, 5.0;
  const Eigen::MatrixXd tq = s.transform(q);
  CHECK(tq(0, 0) == doctest::Approx(0.0));
  CHECK(tq(0, 1) == 0.0);
  CHECK(tq(0, 2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(s.transform(Eigen::MatrixXd::Zero(1, 2)), InputError);

  testing::Gen g(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd a = g.matrix(g.integer(2, 30), 4) * g.uniform(0.1, 10);
    const Eigen::MatrixXd once = Standardizer::fit(a).transform(a);
    const Eigen::MatrixXd twice = Standardizer::fit(once).transform(once);
    CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("make_splits arithmetic and determinism") {
  LabeledDataset d;
  d.features = Eigen::MatrixXd::Zero(100, 1);
  for (int i = 0; i < 100; ++i) {
    d.features(i, 0) = i;
    d.labels.push_back(i % 2);
  }
  d.num_classes = 2;
  SplitPlan plan;
  plan.runs = 5;
  const auto a = make_splits(d, plan);
  const auto b = make_splits(d, plan);
  REQUIRE(a.size() == 5);
  bool all_same = true;
  for (int r = 0; r < 5; ++r) {
    CHECK(a[r].test.size() == 30);
    CHECK(a[r].validation.size() >= 10);
    CHECK(a[r].validation.size() <= 11);
    CHECK(a[r].train.size() == 100 - 30 - a[r].validation.size());
    CHECK(a[r].train == b[r].train);
    CHECK(a[r].validation == b[r].validation);
    CHECK(a[r].test == b[r].test);
    std::set<std::size_t> seen;
    for (auto* part : {&a[r].train, &a[r].validation, &a[r].test}) seen.insert(part->begin(), part->end());
    CHECK(seen.size() == 100);
    if (r > 0 && a[r].test != a[0].test) all_same = false;
  }
  CHECK_FALSE(all_same);
  plan.seed = 99;
  CHECK(make_splits(d, plan)[0].test != a[0].test);
}

TEST_CASE("property: splits are stratified") {
  testing::Gen g(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = g.integer(20, 120);
    const int classes = g.integer(2, 4);
    LabeledDataset d;
    d.features = g.matrix(n, 1);
    for (int i = 0; i < n; ++i) d.labels.push_back(i < 3 * classes ? i % classes : g.integer(0, classes - 1));
    std::shuffle(d.labels.begin(), d.labels.end(), g.engine());
    d.num_classes = classes;
    SplitPlan plan;
    plan.runs = 2;
    plan.seed = static_cast<std::uint64_t>(trial);
    for (const auto& s : make_splits(d, plan)) {
      const double ratio = static_cast<double>(s.test.size()) / n;
      for (int c = 0; c < d.num_classes; ++c) {
        const auto members = std::count(d.labels.begin(), d.labels.end(), c);
        const auto in_test = std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return d.labels[i] == c; });
        CHECK(std::abs(static_cast<double>(in_test) - ratio * members) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("make_splits rejects tiny classes") {
  LabeledDataset d;
  d.features = Eigen::MatrixXd::Zero(6, 1);
  d.labels = {0, 0, 0, 0, 1, 1};
  d.num_classes = 2;
  CHECK_THROWS_AS(make_splits(d, SplitPlan{}), InputError);
  SplitPlan bad;
  bad.train_fraction = 1.0;
  d.labels = {0, 0, 0, 1, 1, 1};
  CHECK_THROWS_AS(make_splits(d, bad), InputError);
}

TEST_CASE("make_blobs") {
  const LabeledDataset a = make_blobs(10, 3, 12.0, 5);
  const LabeledDataset b = make_blobs(10, 3, 12.0, 5);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.size() == 30);
  CHECK(knn_loo_error(DistanceOracle::raw_euclidean(a.features), a.labels, 1) == 0.0);
  const LabeledDataset one = make_blobs(4, 1, 1.0, 1);
  CHECK(std::all_of(one.labels.begin(), one.labels.end(), [](int y) { return y == 0; }));
  CHECK_THROWS_AS(make_blobs(0, 2, 1.0, 1), InputError);
}

TEST_CASE("subset and stratified_sample") {
  const LabeledDataset d = make_blobs(10, 3, 5.0, 6);
  const std::vector<std::size_t> idx = {3, 15, 27};
  const LabeledDataset s = subset(d, idx);
  CHECK(s.size() == 3);
  CHECK(s.features.row(1) == d.features.row(15));
  const std::vector<std::size_t> bad = {30};
  CHECK_THROWS_AS(subset(d, bad), InputError);

  const auto sample = stratified_sample(d, 12, 1);
  CHECK(sample.size() == 12);
  CHECK(sample == stratified_sample(d, 12, 1));
  std::vector<int> per(3, 0);
  for (auto i : sample) ++per[d.labels[i]];
  CHECK(per == std::vector<int>{4, 4, 4});
  CHECK_THROWS_AS(stratified_sample(d, 31, 1), InputError);
}

TEST_CASE("seeded_shuffle is a deterministic permutation") {
  std::vector<std::size_t> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) a[i] = b[i] = i;
  seeded_shuffle(a, 7);
  seeded_shuffle(b, 7);
  CHECK(a == b);
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
