#include "menn/classifier.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "menn/error.hpp"
#include "menn/linalg.hpp"

namespace menn {

DistanceOracle DistanceOracle::raw_euclidean(Eigen::MatrixXd train_features) {
  DistanceOracle o;
  o.kind_ = OracleKind::kRawEuclidean;
  o.train_distances_ = squared_distances(train_features);
  o.train_repr_ = std::move(train_features);
  return o;
}

DistanceOracle DistanceOracle::empirical_map(const KernelMatrix& gram) {
  DistanceOracle o;
  o.kind_ = OracleKind::kEmpiricalMap;
  o.train_repr_ = gram.matrix();  // symmetric: row i is k_i'
  o.train_distances_ = squared_distances(o.train_repr_);
  return o;
}

DistanceOracle DistanceOracle::learned(const KernelMatrix& gram, const Eigen::MatrixXd& cbar) {
  if (cbar.rows() != gram.size() || cbar.cols() != gram.size()) {
    throw InputError("learned oracle: C and K dimensions differ");
  }
  DistanceOracle o;
  o.kind_ = OracleKind::kLearned;
  o.train_repr_ = gram.matrix();
  o.metric_ = cbar;
  o.train_distances_ = pair_quadratic_forms(gram, cbar);
  const Eigen::MatrixXd ck = cbar * gram.matrix();
  o.train_self_ = (gram.matrix().array() * ck.array()).colwise().sum().transpose();
  return o;
}

DistanceOracle DistanceOracle::precomputed(Eigen::MatrixXd train_distances) {
  if (train_distances.rows() != train_distances.cols()) {
    throw InputError("precomputed oracle: distance matrix must be square");
  }
  DistanceOracle o;
  o.kind_ = OracleKind::kRawEuclidean;
  o.train_distances_ = std::move(train_distances);
  o.queryable_ = false;
  return o;
}

Eigen::VectorXd DistanceOracle::query_distances(const Eigen::VectorXd& query) const {
  if (!queryable_) throw InputError("oracle built from precomputed distances cannot answer queries");
  if (query.size() != train_repr_.cols()) {
    throw InputError("query has dimension " + std::to_string(query.size()) + ", oracle expects " +
                     std::to_string(train_repr_.cols()));
  }
  const Eigen::Index n = train_repr_.rows();
  Eigen::VectorXd d(n);
  if (kind_ == OracleKind::kLearned) {
    // (k_t - k_i)' C (k_t - k_i) = k_t'Ck_t - 2 k_t'Ck_i + k_i'Ck_i
    const Eigen::VectorXd ct = metric_ * query;
    const double self = query.dot(ct);
    const Eigen::VectorXd cross = train_repr_ * ct;
    for (Eigen::Index i = 0; i < n; ++i) d(i) = std::max(0.0, self - 2.0 * cross(i) + train_self_(i));
  } else {
    for (Eigen::Index i = 0; i < n; ++i) d(i) = (train_repr_.row(i).transpose() - query).squaredNorm();
  }
  return d;
}

Eigen::MatrixXd DistanceOracle::query_distances(const Eigen::MatrixXd& queries) const {
  Eigen::MatrixXd out(queries.rows(), static_cast<Eigen::Index>(size()));
  for (Eigen::Index t = 0; t < queries.rows(); ++t) {
    out.row(t) = query_distances(Eigen::VectorXd(queries.row(t).transpose())).transpose();
  }
  return out;
}

namespace {

std::vector<std::size_t> order_by_distance(const Eigen::Ref<const Eigen::VectorXd>& distances,
                                           long exclude) {
  std::vector<std::size_t> order;
  order.reserve(static_cast<std::size_t>(distances.size()));
  for (Eigen::Index i = 0; i < distances.size(); ++i) {
    if (i != exclude) order.push_back(static_cast<std::size_t>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distances(static_cast<Eigen::Index>(a)) < distances(static_cast<Eigen::Index>(b));
  });
  return order;
}

// Neighbours must already be in ascending distance order. Among classes tied
// on count, the one whose nearest member is closest wins, then the lower id.
Prediction vote(std::vector<std::size_t> neighbors, std::span<const int> labels,
                const Eigen::Ref<const Eigen::VectorXd>& distances) {
  std::vector<int> counts;
  std::vector<std::size_t> first_seen;
  for (std::size_t rank = 0; rank < neighbors.size(); ++rank) {
    const int y = labels[neighbors[rank]];
    if (y < 0) throw InputError("negative class label");
    if (static_cast<std::size_t>(y) >= counts.size()) {
      counts.resize(static_cast<std::size_t>(y) + 1, 0);
      first_seen.resize(static_cast<std::size_t>(y) + 1, neighbors.size());
    }
    if (counts[static_cast<std::size_t>(y)]++ == 0) first_seen[static_cast<std::size_t>(y)] = rank;
  }
  Prediction p;
  int best = -1;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    if (best < 0 || counts[c] > counts[static_cast<std::size_t>(best)] ||
        (counts[c] == counts[static_cast<std::size_t>(best)] &&
         distances(static_cast<Eigen::Index>(neighbors[first_seen[c]])) <
             distances(static_cast<Eigen::Index>(neighbors[first_seen[static_cast<std::size_t>(best)]])))) {
      best = static_cast<int>(c);
    }
  }
  int runner_up = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (static_cast<int>(c) != best) runner_up = std::max(runner_up, counts[c]);
  }
  p.label = best;
  p.vote_margin = best < 0 ? 0 : counts[static_cast<std::size_t>(best)] - runner_up;
  p.neighbors = std::move(neighbors);
  return p;
}

void check_labels(std::size_t distances, std::span<const int> labels) {
  if (labels.size() != distances) {
    throw InputError("distance vector has " + std::to_string(distances) + " entries but there are " +
                     std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

Prediction knn_from_distances(const Eigen::Ref<const Eigen::VectorXd>& distances,
                              std::span<const int> labels, int k, long exclude) {
  check_labels(static_cast<std::size_t>(distances.size()), labels);
  auto order = order_by_distance(distances, exclude);
  if (order.empty()) throw InputError("knn: empty training set");
  if (k < 1 || static_cast<std::size_t>(k) > order.size()) {
    throw InputError("knn: k = " + std::to_string(k) + " outside [1, " + std::to_string(order.size()) + "]");
  }
  order.resize(static_cast<std::size_t>(k));
  return vote(std::move(order), labels, distances);
}

Prediction eps_nn_from_distances(const Eigen::Ref<const Eigen::VectorXd>& distances,
                                 std::span<const int> labels, double eps, long exclude) {
  check_labels(static_cast<std::size_t>(distances.size()), labels);
  if (!(eps > 0.0)) throw InputError("eps-NN: eps must be positive");
  auto order = order_by_distance(distances, exclude);
  if (order.empty()) throw InputError("eps-NN: empty training set");
  std::vector<std::size_t> ball;
  for (std::size_t i : order) {
    if (distances(static_cast<Eigen::Index>(i)) <= eps) ball.push_back(i);
  }
  if (!ball.empty()) {
    Prediction p = vote(ball, labels, distances);
    if (p.vote_margin > 0) return p;
  }
  Prediction nearest = vote({order.front()}, labels, distances);
  nearest.vote_margin = 0;
  return nearest;
}

Prediction knn_classify(const DistanceOracle& oracle, std::span<const int> labels,
                        const Eigen::Ref<const Eigen::VectorXd>& query, int k) {
  return knn_from_distances(oracle.query_distances(Eigen::VectorXd(query)), labels, k);
}

Prediction eps_nn_classify(const DistanceOracle& oracle, std::span<const int> labels,
                           const Eigen::Ref<const Eigen::VectorXd>& query, double eps) {
  return eps_nn_from_distances(oracle.query_distances(Eigen::VectorXd(query)), labels, eps);
}

double loo_error(const Eigen::MatrixXd& train_distances, std::span<const int> labels, double eps) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n < 2) throw InputError("loo_error: need at least 2 points");
  if (train_distances.rows() != n || train_distances.cols() != n) {
    throw InputError("loo_error: distance matrix does not match label count");
  }
  if (!(eps > 0.0)) throw InputError("loo_error: eps must be positive");
  long sign_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    long opposite = 0, same = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || train_distances(i, j) > eps) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
        ++same;
      } else {
        ++opposite;
      }
    }
    sign_sum += (opposite > same) - (opposite < same);
  }
  return 0.5 + static_cast<double>(sign_sum) / (2.0 * static_cast<double>(n));
}

double loo_error(const DistanceOracle& oracle, std::span<const int> labels, double eps) {
  return loo_error(oracle.train_distances(), labels, eps);
}

double knn_loo_error(const DistanceOracle& oracle, std::span<const int> labels, int k) {
  const Eigen::MatrixXd& d = oracle.train_distances();
  check_labels(static_cast<std::size_t>(d.rows()), labels);
  if (labels.size() < 2) throw InputError("knn_loo_error: need at least 2 points");
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const Prediction p = knn_from_distances(d.row(i).transpose(), labels, k, static_cast<long>(i));
    if (p.label != labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double knn_test_error(const DistanceOracle& oracle, std::span<const int> train_labels,
                      const Eigen::MatrixXd& queries, std::span<const int> truth, int k) {
  if (static_cast<std::size_t>(queries.rows()) != truth.size()) {
    throw InputError("knn_test_error: query count does not match truth labels");
  }
  if (truth.empty()) throw InputError("knn_test_error: no queries");
  std::size_t wrong = 0;
  for (Eigen::Index t = 0; t < queries.rows(); ++t) {
    const Eigen::VectorXd q = queries.row(t).transpose();
    if (knn_classify(oracle, train_labels, q, k).label != truth[static_cast<std::size_t>(t)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace menn
