#include "menn/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "menn/error.hpp"
#include "menn/linalg.hpp"

namespace menn {

PairSign PairSign::from_labels(std::span<const int> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  PairSign s;
  s.tau_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      s.tau_(i, j) = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
    }
  }
  return s;
}

PairSign PairSign::from_matrix(Eigen::MatrixXd tau) {
  if (tau.rows() != tau.cols()) throw InputError("pair sign matrix must be square");
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    if (tau(i, i) != 1.0) throw InputError("pair sign diagonal must be +1");
    for (Eigen::Index j = 0; j < tau.cols(); ++j) {
      if (tau(i, j) != 1.0 && tau(i, j) != -1.0) throw InputError("pair sign entries must be +-1");
      if (tau(i, j) != tau(j, i)) throw InputError("pair sign matrix is not symmetric");
    }
  }
  PairSign s;
  s.tau_ = std::move(tau);
  return s;
}

void SolverConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("solver: eta must be positive");
  if (max_iters < 1) throw InputError("solver: max_iters must be >= 1");
  if (!(step_up > 1.0)) throw InputError("solver: step_up must exceed 1");
  if (!(step_down > 0.0 && step_down < 1.0)) throw InputError("solver: step_down must lie in (0,1)");
  if (!(tol_objective > 0.0)) throw InputError("solver: tol_objective must be positive");
  if (convergence_window < 1) throw InputError("solver: convergence_window must be >= 1");
  if (active_set_refresh < 1) throw InputError("solver: active_set_refresh must be >= 1");
}

namespace {

void check_dimensions(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar) {
  const Eigen::Index n = gram.size();
  if (tau.size() != n) {
    throw InputError("pair signs cover " + std::to_string(tau.size()) + " points, kernel has " +
                     std::to_string(n));
  }
  if (cbar.rows() != n || cbar.cols() != n) {
    throw InputError("C must be " + std::to_string(n) + "x" + std::to_string(n));
  }
}

struct Evaluation {
  double objective = 0.0;
  double regularizer = 0.0;
  double hinge = 0.0;  // sum over the active pairs, unweighted
  PairList active;
};

Evaluation evaluate(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                    double eps, double eta, bool include_diag) {
  const Eigen::MatrixXd d = pair_quadratic_forms(gram, cbar);
  const Eigen::Index n = gram.size();
  Evaluation ev;
  ev.regularizer = (cbar.array() * gram.matrix().array()).sum();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j && !include_diag) continue;
      const double t = tau(i, j);
      const double term = 1.0 + t * d(i, j) - t * eps;
      if (term > 0.0) {
        ev.hinge += term;
        ev.active.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  ev.objective = ev.regularizer + eta * ev.hinge;
  return ev;
}

std::pair<Eigen::MatrixXd, double> project_unchecked(const Eigen::MatrixXd& cbar, double eps,
                                                     linalg::SymmetricEigen* eig) {
  Eigen::MatrixXd projected = linalg::clamp_psd(linalg::center(cbar), eig);
  return {std::move(projected), std::max(eps, kEpsMin)};
}

}  // namespace

double objective(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                 double eps, double eta, bool include_diag) {
  check_dimensions(gram, tau, cbar);
  return evaluate(gram, tau, cbar, eps, eta, include_diag).objective;
}

PairList active_pairs(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                      double eps, bool include_diag) {
  check_dimensions(gram, tau, cbar);
  return evaluate(gram, tau, cbar, eps, 1.0, include_diag).active;
}

Subgradient subgradient(const KernelMatrix& gram, const PairSign& tau, const Eigen::MatrixXd& cbar,
                        double eps, double eta, const PairList& active) {
  (void)eps;  // the subgradient is piecewise constant in eps once the active set is fixed
  check_dimensions(gram, tau, cbar);
  const Eigen::Index n = gram.size();
  Subgradient g;
  g.cbar = gram.matrix();
  if (active.empty()) return g;
  // sum tau_ij (k_i - k_j)(k_i - k_j)' = K L K with
  // L = sum tau_ij (e_i - e_j)(e_i - e_j)'.
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(n, n);
  double tau_sum = 0.0;
  for (const auto& [i, j] : active) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw InputError("subgradient: pair index out of range");
    const double t = tau(i, j);
    tau_sum += t;
    if (i == j) continue;
    laplacian(i, i) += t;
    laplacian(j, j) += t;
    laplacian(i, j) -= t;
    laplacian(j, i) -= t;
  }
  const Eigen::MatrixXd& k = gram.matrix();
  Eigen::MatrixXd pair_term = k * (laplacian * k);
  g.cbar.noalias() += eta * 0.5 * (pair_term + pair_term.transpose());
  g.eps = -eta * tau_sum;
  return g;
}

std::pair<Eigen::MatrixXd, double> project_feasible(const Eigen::MatrixXd& cbar, double eps) {
  if (!linalg::is_symmetric(cbar, 1e-12)) throw InputError("project_feasible: C is not symmetric");
  return project_unchecked(cbar, eps, nullptr);
}

int rank_estimate(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) return 0;
  const double top = eigenvalues.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<int>((eigenvalues.array() > 1e-6 * top).count());
}

namespace {

struct Iterate {
  Eigen::MatrixXd m;
  double eps = 1.0;
};

bool window_converged(const std::vector<double>& history, const SolverConfig& config) {
  const auto window = static_cast<std::size_t>(config.convergence_window);
  if (history.size() <= window) return false;
  const double before = history[history.size() - 1 - window];
  const double now = history.back();
  return std::abs(before - now) <= config.tol_objective * std::abs(before);
}

MetricModel finish(const KernelMatrix& gram, const PairSign& tau, const SolverConfig& config,
                   Eigen::MatrixXd cbar, double eps, int iterations, bool converged) {
  MetricModel model;
  model.cbar = std::move(cbar);
  model.eps = eps;
  model.objective = objective(gram, tau, model.cbar, model.eps, config.eta, config.include_diagonal_pairs);
  model.rank_estimate = rank_estimate(linalg::symmetric_eigen(model.cbar).values);
  model.iterations = iterations;
  model.converged = converged;
  return model;
}

MetricModel solve_subgradient(const KernelMatrix& gram, const PairSign& tau, const SolverConfig& config,
                              const SolverObserver& on_accept) {
  const Eigen::Index n = gram.size();
  SolverState state;
  state.cbar = linalg::center(Eigen::MatrixXd::Identity(n, n) / static_cast<double>(n));
  state.eps = 1.0;

  const bool diag = config.include_diagonal_pairs;
  Evaluation current = evaluate(gram, tau, state.cbar, state.eps, config.eta, diag);
  state.objective = current.objective;
  state.active = current.active;
  state.history.push_back(state.objective);

  const double k_norm = gram.matrix().norm();
  state.step = config.step_init > 0.0 ? config.step_init
                                      : 1e-3 * static_cast<double>(n) / std::max(k_norm, 1e-300);
  const double step_floor = state.step * 1e-12;

  Subgradient g = subgradient(gram, tau, state.cbar, state.eps, config.eta, state.active);
  bool converged = false;
  int iter = 0;
  while (iter < config.max_iters) {
    ++iter;
    state.iteration = iter;
    auto [trial_c, trial_eps] =
        project_unchecked(state.cbar - state.step * g.cbar, state.eps - state.step * g.eps, nullptr);
    Evaluation trial = evaluate(gram, tau, trial_c, trial_eps, config.eta, diag);

    if (trial.objective <= state.objective) {
      state.cbar = std::move(trial_c);
      state.eps = trial_eps;
      state.objective = trial.objective;
      state.active = std::move(trial.active);
      state.history.push_back(state.objective);
      state.step *= config.step_up;
      if (on_accept) on_accept(state);
      g = subgradient(gram, tau, state.cbar, state.eps, config.eta, state.active);
      if (window_converged(state.history, config)) {
        converged = true;
        break;
      }
    } else {
      state.step *= config.step_down;
      if (state.step < step_floor) {
        // No decrease along the subgradient at any representable step.
        converged = true;
        break;
      }
    }

    if (iter % config.active_set_refresh == 0) {
      const Evaluation audit = evaluate(gram, tau, state.cbar, state.eps, config.eta, diag);
      if (audit.active != state.active ||
          std::abs(audit.objective - state.objective) > 1e-8 * std::max(1.0, std::abs(audit.objective))) {
        throw std::logic_error("solve: tracked active set diverged from a full rescan");
      }
    }
  }
  return finish(gram, tau, config, std::move(state.cbar), state.eps, iter, converged);
}

// Kernel-PCA coordinates. With P K P = U S U' and Phi = U S^{1/2}, every
// centred C supported on range(U) is C = W M W' with W = U S^{-1/2}, and
//   (k_i - k_j)' C (k_i - k_j) = (phi_i - phi_j)' M (phi_i - phi_j),
//   <C, K> = tr M,   C psd <=> M psd.
// Directions of P K P below kPcaCutoff of its top eigenvalue are dropped;
// they move no distance by more than that fraction.
constexpr double kPcaCutoff = 1e-6;

struct PcaBasis {
  Eigen::MatrixXd phi;  // n x r
  Eigen::MatrixXd w;    // n x r
  Eigen::VectorXd s;    // r
};

PcaBasis pca_basis(const KernelMatrix& gram) {
  const auto eig = linalg::symmetric_eigen(linalg::center(gram.matrix()));
  const Eigen::Index n = gram.size();
  const double top = eig.values.size() ? eig.values.maxCoeff() : 0.0;
  Eigen::Index r = 0;
  if (top > 0.0) {
    while (r < n && eig.values(n - 1 - r) > kPcaCutoff * top) ++r;
  }
  PcaBasis b;
  b.s = eig.values.tail(r);
  const Eigen::MatrixXd u = eig.vectors.rightCols(r);
  b.phi = u * b.s.cwiseSqrt().asDiagonal();
  b.w = u * b.s.cwiseSqrt().cwiseInverse().asDiagonal();
  return b;
}

Eigen::MatrixXd to_cbar(const PcaBasis& b, const Eigen::MatrixXd& m) {
  const Eigen::Index n = b.phi.rows();
  if (m.rows() == 0) return Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd c = b.w * (m * b.w.transpose());
  c = 0.5 * (c + c.transpose()).eval();
  return linalg::center(c);
}

// Huber-smoothed hinge: 0 below 0, z^2 / (2 mu) on [0, mu], z - mu/2 above.
struct PcaEvaluation {
  double exact = 0.0;   // objective with the exact hinge
  double smooth = 0.0;  // objective with the smoothed hinge
  PairList active;
  Eigen::MatrixXd weights;  // tau_ij * dh/dz, zero off the active set
};

PcaEvaluation pca_evaluate(const PcaBasis& b, const PairSign& tau, const Iterate& x, double eta, double mu,
                           bool include_diag, bool want_weights) {
  const Eigen::Index n = b.phi.rows();
  PcaEvaluation ev;
  Eigen::MatrixXd bmat = b.phi * (x.m * b.phi.transpose());
  const Eigen::VectorXd diag = bmat.diagonal();
  if (want_weights) ev.weights = Eigen::MatrixXd::Zero(n, n);
  double exact = 0.0, smooth = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j && !include_diag) continue;
      const double d = i == j ? 0.0 : std::max(0.0, diag(i) + diag(j) - (bmat(i, j) + bmat(j, i)));
      const double t = tau(i, j);
      const double z = 1.0 + t * d - t * x.eps;
      if (!(z > 0.0)) continue;
      exact += z;
      ev.active.emplace_back(static_cast<int>(i), static_cast<int>(j));
      if (z < mu) {
        smooth += 0.5 * z * z / mu;
        if (want_weights) ev.weights(i, j) = t * z / mu;
      } else {
        smooth += z - 0.5 * mu;
        if (want_weights) ev.weights(i, j) = t;
      }
    }
  }
  const double reg = x.m.trace();
  ev.exact = reg + eta * exact;
  ev.smooth = reg + eta * smooth;
  return ev;
}

Iterate pca_gradient(const PcaBasis& b, const PcaEvaluation& ev, double eta) {
  const Eigen::Index r = b.phi.cols();
  const Eigen::MatrixXd& wt = ev.weights;
  // sum_ij w_ij (e_i - e_j)(e_i - e_j)' = diag(rows + cols) - W - W'
  Eigen::MatrixXd lap = -(wt + wt.transpose());
  lap.diagonal() += wt.rowwise().sum() + wt.colwise().sum().transpose();
  Iterate g;
  g.m = Eigen::MatrixXd::Identity(r, r);
  if (r > 0) {
    Eigen::MatrixXd pair_term = b.phi.transpose() * (lap * b.phi);
    g.m.noalias() += eta * 0.5 * (pair_term + pair_term.transpose());
  }
  g.eps = -eta * wt.sum();
  return g;
}

Iterate pca_project(Iterate x) {
  if (x.m.rows() > 0) x.m = linalg::clamp_psd(0.5 * (x.m + x.m.transpose()));
  x.eps = std::max(x.eps, kEpsMin);
  return x;
}

MetricModel solve_smoothed(const KernelMatrix& gram, const PairSign& tau, const SolverConfig& config,
                           const SolverObserver& on_accept) {
  const Eigen::Index n = gram.size();
  const bool diag = config.include_diagonal_pairs;
  const PcaBasis basis = pca_basis(gram);
  const Eigen::Index r = basis.phi.cols();

  // P (I/n) P restricted to range(U) is M = S / n.
  Iterate x{Eigen::MatrixXd(basis.s.asDiagonal()) / static_cast<double>(n), 1.0};

  SolverState state;
  PcaEvaluation ev = pca_evaluate(basis, tau, x, config.eta, 1.0, diag, false);
  state.cbar = to_cbar(basis, x.m);
  state.eps = x.eps;
  state.objective = ev.exact;
  state.active = ev.active;
  state.history.push_back(state.objective);
  Iterate best = x;

  const double k_norm = gram.matrix().norm();
  state.step = config.step_init > 0.0 ? config.step_init
                                      : 1e-3 * static_cast<double>(n) / std::max(k_norm, 1e-300);

  auto accept = [&](const Iterate& p, const PcaEvaluation& e) {
    if (!(e.exact <= state.objective)) return;
    best = p;
    state.cbar = to_cbar(basis, p.m);
    state.eps = p.eps;
    state.objective = e.exact;
    state.active = e.active;
    state.history.push_back(state.objective);
    if (on_accept) on_accept(state);
  };

  // Smoothing schedule 1, 0.1, ..., 1e-5. Each stage gets an equal share of
  // the remaining trial budget and ends early once its smoothed objective
  // settles.
  constexpr int kStages = 6;
  int iter = 0;
  bool stage_settled = false;
  double mu = 1.0;
  for (int stage = 0; stage < kStages && iter < config.max_iters; ++stage, mu *= 0.1) {
    const int budget = iter + (config.max_iters - iter) / (kStages - stage + 1);
    Iterate y = x;
    double momentum = 1.0;
    PcaEvaluation at_x = pca_evaluate(basis, tau, x, config.eta, mu, diag, false);
    std::vector<double> trace{at_x.smooth};
    stage_settled = false;
    while (iter < budget) {
      const PcaEvaluation at_y = pca_evaluate(basis, tau, y, config.eta, mu, diag, true);
      const Iterate g = pca_gradient(basis, at_y, config.eta);
      Iterate trial;
      PcaEvaluation at_trial;
      bool sufficient = false;
      while (iter < budget) {
        ++iter;
        state.iteration = iter;
        trial = pca_project({y.m - state.step * g.m, y.eps - state.step * g.eps});
        at_trial = pca_evaluate(basis, tau, trial, config.eta, mu, diag, false);
        const Eigen::MatrixXd dm = trial.m - y.m;
        const double de = trial.eps - y.eps;
        const double model = at_y.smooth + (g.m.array() * dm.array()).sum() + g.eps * de +
                             (dm.squaredNorm() + de * de) / (2.0 * state.step);
        if (at_trial.smooth <= model) {
          sufficient = true;
          break;
        }
        state.step *= config.step_down;
      }
      if (!sufficient) break;
      accept(trial, at_trial);
      const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      if (at_trial.smooth > at_x.smooth) {
        // Momentum overshot: restart from the last point that improved.
        y = x;
        momentum = 1.0;
      } else {
        const double beta = (momentum - 1.0) / next;
        y.m = trial.m + beta * (trial.m - x.m);
        y.eps = trial.eps + beta * (trial.eps - x.eps);
        x = std::move(trial);
        at_x = std::move(at_trial);
        momentum = next;
        trace.push_back(at_x.smooth);
        if (window_converged(trace, config)) {
          stage_settled = true;
          break;
        }
      }
      state.step *= config.step_up;

      if (iter % config.active_set_refresh == 0) {
        const PcaEvaluation audit = pca_evaluate(basis, tau, best, config.eta, 1.0, diag, false);
        if (audit.active != state.active ||
            std::abs(audit.exact - state.objective) > 1e-8 * std::max(1.0, std::abs(audit.exact))) {
          throw std::logic_error("solve: tracked active set diverged from a full rescan");
        }
      }
    }
  }

  // Exact-hinge projected subgradient steps from the best point.
  bool polished = false;
  if (iter < config.max_iters) {
    x = best;
    PcaEvaluation at_x = pca_evaluate(basis, tau, x, config.eta, 0.0, diag, false);
    const double step_floor = state.step * 1e-12;
    auto exact_gradient = [&](const PcaEvaluation& e) {
      PcaEvaluation w = e;
      w.weights = Eigen::MatrixXd::Zero(n, n);
      for (const auto& [i, j] : e.active) w.weights(i, j) = tau(i, j);
      return pca_gradient(basis, w, config.eta);
    };
    Iterate g = exact_gradient(at_x);
    std::vector<double> trace{at_x.exact};
    while (iter < config.max_iters) {
      ++iter;
      state.iteration = iter;
      Iterate trial = pca_project({x.m - state.step * g.m, x.eps - state.step * g.eps});
      PcaEvaluation at_trial = pca_evaluate(basis, tau, trial, config.eta, 0.0, diag, false);
      if (at_trial.exact <= at_x.exact) {
        accept(trial, at_trial);
        x = std::move(trial);
        at_x = std::move(at_trial);
        g = exact_gradient(at_x);
        trace.push_back(at_x.exact);
        state.step *= config.step_up;
        if (window_converged(trace, config)) {
          polished = true;
          break;
        }
      } else {
        state.step *= config.step_down;
        if (state.step < step_floor) {
          polished = true;
          break;
        }
      }
    }
  }
  (void)r;
  return finish(gram, tau, config, to_cbar(basis, best.m), best.eps, iter, stage_settled && polished);
}

}  // namespace

MetricModel solve(const KernelMatrix& gram, const PairSign& tau, const SolverConfig& config,
                  const SolverObserver& on_accept) {
  config.validate();
  const Eigen::Index n = gram.size();
  if (n < 2) throw InputError("solve: need at least 2 training points");
  if (tau.size() != n) {
    throw InputError("pair signs cover " + std::to_string(tau.size()) + " points, kernel has " +
                     std::to_string(n));
  }
  if (!linalg::is_symmetric(tau.matrix(), 0.0)) throw InputError("solve: pair signs not symmetric");
  if (!linalg::is_symmetric(gram.matrix(), 1e-12)) throw InputError("solve: kernel matrix not symmetric");
  if (config.method == SolverMethod::kSubgradient) return solve_subgradient(gram, tau, config, on_accept);
  return solve_smoothed(gram, tau, config, on_accept);
}

Eigen::MatrixXd mahalanobis_of_linear(const Eigen::MatrixXd& cbar, const Eigen::MatrixXd& features) {
  if (cbar.rows() != features.rows() || cbar.cols() != features.rows()) {
    throw InputError("mahalanobis_of_linear: C is " + std::to_string(cbar.rows()) + "x" +
                     std::to_string(cbar.cols()) + " but there are " +
                     std::to_string(features.rows()) + " points");
  }
  Eigen::MatrixXd m = features.transpose() * cbar * features;
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd extract_embedding(const MetricModel& model, const KernelMatrix& gram, int d) {
  if (model.cbar.rows() != gram.size()) throw InputError("extract_embedding: dimension mismatch");
  if (d < 1 || d > model.rank_estimate) {
    throw InputError("extract_embedding: d = " + std::to_string(d) + " outside [1, " +
                     std::to_string(model.rank_estimate) + "]");
  }
  const auto eig = linalg::symmetric_eigen(model.cbar);
  const Eigen::MatrixXd top = eig.vectors.rightCols(d).rowwise().reverse();
  const Eigen::VectorXd scale = eig.values.tail(d).reverse().cwiseMax(0.0).cwiseSqrt();
  return gram.matrix() * top * scale.asDiagonal();
}

}  // namespace menn
