#include "menn/mercer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "menn/error.hpp"
#include "menn/linalg.hpp"

namespace menn {

KernelDictionary::KernelDictionary(std::vector<Eigen::MatrixXd> grams) : grams_(std::move(grams)) {
  if (grams_.empty()) throw InputError("kernel dictionary needs at least one matrix");
  const Eigen::Index n = grams_.front().rows();
  for (std::size_t r = 0; r < grams_.size(); ++r) {
    const auto& k = grams_[r];
    if (k.rows() != n || k.cols() != n) {
      throw InputError("kernel dictionary: matrix " + std::to_string(r) + " is " +
                       std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + ", expected " +
                       std::to_string(n) + "x" + std::to_string(n));
    }
    if (!linalg::is_symmetric(k, 1e-10)) {
      throw InputError("kernel dictionary: matrix " + std::to_string(r) + " is not symmetric");
    }
    const auto eig = linalg::symmetric_eigen(k);
    const double top = eig.values.size() ? eig.values.maxCoeff() : 0.0;
    if (eig.values.size() && eig.values.minCoeff() < -1e-8 * std::max(1.0, top)) {
      throw InputError("kernel dictionary: matrix " + std::to_string(r) + " is not PSD");
    }
  }
}

KernelDictionary KernelDictionary::from_specs(const std::vector<KernelSpec>& specs,
                                              const Eigen::MatrixXd& features) {
  std::vector<Eigen::MatrixXd> grams;
  grams.reserve(specs.size());
  for (const auto& spec : specs) grams.push_back(build_gram(spec, features).matrix());
  return KernelDictionary(std::move(grams));
}

Eigen::MatrixXd KernelDictionary::combine(const Eigen::VectorXd& beta) const {
  if (static_cast<std::size_t>(beta.size()) != grams_.size()) {
    throw InputError("kernel dictionary: beta has " + std::to_string(beta.size()) + " entries for " +
                     std::to_string(grams_.size()) + " kernels");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points(), points());
  for (std::size_t r = 0; r < grams_.size(); ++r) out += beta(static_cast<Eigen::Index>(r)) * grams_[r];
  return out;
}

Eigen::MatrixXd kernel_distances(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) d(i, j) = k(i, i) + k(j, j) - 2.0 * k(i, j);
  }
  return d;
}

namespace {

// Ordered pairs i != j of [1 + tau_ij d_ij - tau_ij eps]_+.
double hinge_sum(const Eigen::MatrixXd& d, const PairSign& tau, double eps) {
  double sum = 0.0;
  const Eigen::Index n = d.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double t = tau(i, j);
      const double term = 1.0 + t * d(i, j) - t * eps;
      if (term > 0.0) sum += term;
    }
  }
  return sum;
}

// Hinge sum with each term replaced by its Huber smoothing (0 below 0,
// z^2 / (2 mu) on [0, mu], z - mu/2 above); mu = 0 gives the exact hinge.
// `slope` receives tau_ij * h'(z_ij), the derivative with respect to d_ij.
struct SmoothScan {
  double smooth = 0.0;
  double exact = 0.0;
  Eigen::MatrixXd slope;
};

SmoothScan smooth_hinges(const Eigen::MatrixXd& d, const PairSign& tau, double eps, double mu) {
  const Eigen::Index n = d.rows();
  SmoothScan scan;
  scan.slope = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double t = tau(i, j);
      const double z = 1.0 + t * d(i, j) - t * eps;
      if (!(z > 0.0)) continue;
      scan.exact += z;
      if (z < mu) {
        scan.smooth += 0.5 * z * z / mu;
        scan.slope(i, j) = t * z / mu;
      } else {
        scan.smooth += z - 0.5 * mu;
        scan.slope(i, j) = t;
      }
    }
  }
  return scan;
}

struct Value {
  double smooth = 0.0;
  double exact = 0.0;
};

struct DescentResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<double> history;
  int iterations = 0;
};

// Accelerated projected gradient on a smoothed objective whose smoothing
// shrinks by 10x per stage (1 down to 1e-6), then projected subgradient
// steps on the exact objective. `evaluate(x, mu, grad)` returns both values
// and the gradient of the smoothed one (mu = 0: a subgradient of the exact
// one). Points whose exact value does not exceed the best so far are
// recorded, so `history` is non-increasing.
template <typename Evaluate, typename Project>
DescentResult smoothed_descent(Eigen::VectorXd x, const KernelLearningConfig& config, Evaluate evaluate,
                               Project project) {
  DescentResult out;
  Eigen::VectorXd grad;
  Value at_x = evaluate(x, 1.0, &grad);
  out.x = x;
  out.value = at_x.exact;
  out.history.push_back(out.value);
  auto record = [&](const Eigen::VectorXd& p, double exact) {
    if (!(exact <= out.value)) return;
    out.x = p;
    out.value = exact;
    out.history.push_back(exact);
  };
  auto settled = [&](const std::vector<double>& trace) {
    const auto window = static_cast<std::size_t>(config.convergence_window);
    if (trace.size() <= window) return false;
    const double before = trace[trace.size() - 1 - window];
    return std::abs(before - trace.back()) <= config.tol_objective * std::max(std::abs(before), 1e-300);
  };

  double step = config.step_init > 0.0 ? config.step_init : 1.0 / std::max(1.0, grad.norm());
  int iter = 0;
  constexpr int kStages = 7;
  double mu = 1.0;
  for (int stage = 0; stage < kStages && iter < config.max_iters; ++stage, mu *= 0.1) {
    const int budget = iter + (config.max_iters - iter) / (kStages - stage + 1);
    Eigen::VectorXd y = x;
    double momentum = 1.0;
    at_x = evaluate(x, mu, &grad);
    std::vector<double> trace{at_x.smooth};
    while (iter < budget) {
      Eigen::VectorXd gy;
      const Value at_y = evaluate(y, mu, &gy);
      Eigen::VectorXd trial;
      Value at_trial;
      bool sufficient = false;
      while (iter < budget) {
        ++iter;
        trial = project(y - step * gy);
        Eigen::VectorXd unused;
        at_trial = evaluate(trial, mu, &unused);
        const Eigen::VectorXd dx = trial - y;
        if (at_trial.smooth <= at_y.smooth + gy.dot(dx) + dx.squaredNorm() / (2.0 * step)) {
          sufficient = true;
          break;
        }
        step *= config.step_down;
      }
      if (!sufficient) break;
      record(trial, at_trial.exact);
      const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      if (at_trial.smooth > at_x.smooth) {
        y = x;
        momentum = 1.0;
      } else {
        y = trial + ((momentum - 1.0) / next) * (trial - x);
        x = std::move(trial);
        at_x = at_trial;
        momentum = next;
        trace.push_back(at_x.smooth);
        if (settled(trace)) break;
      }
      step *= config.step_up;
    }
  }

  x = out.x;
  at_x = evaluate(x, 0.0, &grad);
  std::vector<double> trace{at_x.exact};
  const double step_floor = step * 1e-14;
  while (iter < config.max_iters) {
    ++iter;
    Eigen::VectorXd trial = project(x - step * grad);
    Eigen::VectorXd trial_grad;
    const Value at_trial = evaluate(trial, 0.0, &trial_grad);
    if (at_trial.exact <= at_x.exact) {
      record(trial, at_trial.exact);
      x = std::move(trial);
      grad = std::move(trial_grad);
      at_x = at_trial;
      trace.push_back(at_x.exact);
      step *= config.step_up;
      if (settled(trace)) break;
    } else {
      step *= config.step_down;
      if (step < step_floor) break;
    }
  }
  out.iterations = iter;
  return out;
}

void validate_config(const KernelLearningConfig& config) {
  if (config.max_iters < 1) throw InputError("kernel learning: max_iters must be >= 1");
  if (!(config.step_up > 1.0)) throw InputError("kernel learning: step_up must exceed 1");
  if (!(config.step_down > 0.0 && config.step_down < 1.0)) {
    throw InputError("kernel learning: step_down must lie in (0,1)");
  }
  if (!(config.tol_objective > 0.0)) throw InputError("kernel learning: tol_objective must be positive");
  if (config.convergence_window < 1) throw InputError("kernel learning: convergence_window must be >= 1");
}

}  // namespace

double transductive_objective(const Eigen::MatrixXd& k, const PairSign& tau, double eps, double lambda) {
  if (k.rows() != tau.size() || k.cols() != tau.size()) {
    throw InputError("transductive_objective: dimension mismatch");
  }
  return hinge_sum(kernel_distances(k), tau, eps) + lambda * k.squaredNorm();
}

TransductiveKernel learn_kernel_transductive(const PairSign& tau, double lambda,
                                             const KernelLearningConfig& config) {
  validate_config(config);
  if (!(lambda > 0.0)) throw InputError("learn_kernel_transductive: lambda must be positive");
  const Eigen::Index n = tau.size();
  if (n < 2) throw InputError("learn_kernel_transductive: need at least 2 points");

  // Unknowns: K column-major, then eps.
  const Eigen::Index nn = n * n;
  Eigen::VectorXd x0(nn + 1);
  Eigen::MatrixXd k0 = (tau.matrix().array() + 1.0).matrix() * 0.5;
  k0.diagonal().array() += 1e-3;
  x0.head(nn) = Eigen::Map<const Eigen::VectorXd>(k0.data(), nn);
  x0(nn) = 1.0;

  auto evaluate = [&](const Eigen::VectorXd& p, double mu, Eigen::VectorXd* grad) {
    const Eigen::Map<const Eigen::MatrixXd> k(p.data(), n, n);
    const SmoothScan scan = smooth_hinges(kernel_distances(k), tau, p(nn), mu);
    // d(d_ij)/dK = (e_i - e_j)(e_i - e_j)'
    const Eigen::MatrixXd& w = scan.slope;
    Eigen::MatrixXd g = 2.0 * lambda * k - w - w.transpose();
    g.diagonal() += w.rowwise().sum() + w.colwise().sum().transpose();
    grad->resize(nn + 1);
    grad->head(nn) = Eigen::Map<const Eigen::VectorXd>(g.data(), nn);
    (*grad)(nn) = -w.sum();
    const double reg = lambda * k.squaredNorm();
    return Value{scan.smooth + reg, scan.exact + reg};
  };
  auto project = [&](Eigen::VectorXd p) {
    Eigen::Map<Eigen::MatrixXd> k(p.data(), n, n);
    k = linalg::clamp_psd(0.5 * (k + k.transpose()));
    p(nn) = std::max(p(nn), kEpsMin);
    return p;
  };

  const DescentResult r = smoothed_descent(project(x0), config, evaluate, project);
  TransductiveKernel out;
  out.k = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), n, n);
  out.eps = r.x(nn);
  out.objective = r.value;
  out.iterations = r.iterations;
  return out;
}

namespace {

struct MklProblem {
  std::vector<Eigen::MatrixXd> distances;  // d^r_ij per base kernel
  Eigen::MatrixXd traces;                  // tr(K_r K_s)

  MklProblem(const KernelDictionary& dict) {
    const auto q = static_cast<Eigen::Index>(dict.count());
    traces.resize(q, q);
    for (std::size_t r = 0; r < dict.count(); ++r) {
      distances.push_back(kernel_distances(dict.gram(r)));
      for (std::size_t s = 0; s < dict.count(); ++s) {
        traces(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) =
            (dict.gram(r).array() * dict.gram(s).array()).sum();
      }
    }
  }

  Eigen::MatrixXd combined_distances(const Eigen::VectorXd& beta) const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(distances.front().rows(), distances.front().cols());
    for (std::size_t r = 0; r < distances.size(); ++r) d += beta(static_cast<Eigen::Index>(r)) * distances[r];
    return d;
  }
};

void check_mkl_inputs(const KernelDictionary& dict, const PairSign& tau) {
  if (dict.points() != tau.size()) {
    throw InputError("kernel dictionary covers " + std::to_string(dict.points()) +
                     " points, pair signs cover " + std::to_string(tau.size()));
  }
}

}  // namespace

double mkl_objective(const KernelDictionary& dict, const PairSign& tau, const Eigen::VectorXd& beta,
                     double eps, double lambda) {
  check_mkl_inputs(dict, tau);
  if (static_cast<std::size_t>(beta.size()) != dict.count()) throw InputError("mkl_objective: beta size mismatch");
  const MklProblem problem(dict);
  return hinge_sum(problem.combined_distances(beta), tau, eps) +
         lambda * beta.dot(problem.traces * beta);
}

MklModel learn_kernel_combination_qp(const KernelDictionary& dict, const PairSign& tau, double lambda,
                                     const KernelLearningConfig& config) {
  validate_config(config);
  check_mkl_inputs(dict, tau);
  if (!(lambda > 0.0)) throw InputError("learn_kernel_combination_qp: lambda must be positive");
  const MklProblem problem(dict);
  const auto q = static_cast<Eigen::Index>(dict.count());

  // Unknowns: beta, then eps.
  Eigen::VectorXd x0(q + 1);
  x0.head(q).setConstant(1.0 / static_cast<double>(q));
  x0(q) = 1.0;

  auto evaluate = [&](const Eigen::VectorXd& p, double mu, Eigen::VectorXd* grad) {
    const Eigen::VectorXd beta = p.head(q);
    const SmoothScan scan = smooth_hinges(problem.combined_distances(beta), tau, p(q), mu);
    grad->resize(q + 1);
    grad->head(q) = 2.0 * lambda * (problem.traces * beta);
    for (Eigen::Index r = 0; r < q; ++r) {
      (*grad)(r) += (scan.slope.array() * problem.distances[static_cast<std::size_t>(r)].array()).sum();
    }
    (*grad)(q) = -scan.slope.sum();
    const double reg = lambda * beta.dot(problem.traces * beta);
    return Value{scan.smooth + reg, scan.exact + reg};
  };
  auto project = [q](Eigen::VectorXd p) {
    p.head(q) = p.head(q).cwiseMax(0.0);
    p(q) = std::max(p(q), kEpsMin);
    return p;
  };

  DescentResult r = smoothed_descent(x0, config, evaluate, project);
  MklModel out;
  out.beta = r.x.head(q);
  out.eps = r.x(q);
  out.objective = r.value;
  out.history = std::move(r.history);
  out.iterations = r.iterations;
  out.combined = dict.combine(out.beta);
  return out;
}

bool qp_ranking_equivalent(const std::vector<KernelSpec>& specs, const Eigen::VectorXd& beta,
                           const Eigen::MatrixXd& queries, const Eigen::MatrixXd& train_features) {
  if (specs.empty()) throw InputError("qp_ranking_equivalent: empty dictionary");
  for (const auto& spec : specs) {
    spec.validate();
    if (!spec.is_radial()) {
      throw InputError("qp_ranking_equivalent: " + spec.describe() + " is not a radial kernel");
    }
  }
  if (static_cast<std::size_t>(beta.size()) != specs.size()) {
    throw InputError("qp_ranking_equivalent: beta size does not match the dictionary");
  }
  if ((beta.array() < 0.0).any() || !(beta.maxCoeff() > 0.0)) {
    throw InputError("qp_ranking_equivalent: beta must be nonnegative and not all zero");
  }
  if (queries.cols() != train_features.cols()) {
    throw InputError("qp_ranking_equivalent: query and training dimensions differ");
  }

  const Eigen::Index n = train_features.rows();
  std::vector<double> self_train(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < specs.size(); ++r) {
      const Eigen::VectorXd xi = train_features.row(i).transpose();
      self_train[static_cast<std::size_t>(i)] += beta(static_cast<Eigen::Index>(r)) * eval_kernel(specs[r], xi, xi);
    }
  }
  auto ranked = [n](const std::vector<double>& d) {
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    return order;
  };

  for (Eigen::Index t = 0; t < queries.rows(); ++t) {
    const Eigen::VectorXd xt = queries.row(t).transpose();
    double self_query = 0.0;
    for (std::size_t r = 0; r < specs.size(); ++r) self_query += beta(static_cast<Eigen::Index>(r)) * eval_kernel(specs[r], xt, xt);
    std::vector<double> euclid(static_cast<std::size_t>(n)), combined(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = train_features.row(i).transpose();
      euclid[static_cast<std::size_t>(i)] = (xt - xi).squaredNorm();
      double cross = 0.0;
      for (std::size_t r = 0; r < specs.size(); ++r) cross += beta(static_cast<Eigen::Index>(r)) * eval_kernel(specs[r], xt, xi);
      combined[static_cast<std::size_t>(i)] = self_query + self_train[static_cast<std::size_t>(i)] - 2.0 * cross;
    }
    if (ranked(euclid) != ranked(combined)) return false;
  }
  return true;
}

}  // namespace menn
