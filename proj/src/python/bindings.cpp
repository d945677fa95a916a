#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "menn/classifier.hpp"
#include "menn/error.hpp"
#include "menn/experiment.hpp"
#include "menn/mercer.hpp"
#include "menn/model_io.hpp"

namespace py = pybind11;
using namespace menn;

namespace {

KernelSpec make_spec(const std::string& kind, double width, int degree, double offset) {
  KernelSpec spec = parse_kernel_kind(kind);
  spec.width = width;
  spec.degree = degree;
  spec.offset = offset;
  spec.validate();
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metric embedding for nearest-neighbour classification";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init(&make_spec), py::arg("kind") = "gaussian", py::arg("width") = 1.0,
           py::arg("degree") = 2, py::arg("offset") = 1.0)
      .def_property_readonly("width", [](const KernelSpec& s) { return s.width; })
      .def_property_readonly("degree", [](const KernelSpec& s) { return s.degree; })
      .def_property_readonly("offset", [](const KernelSpec& s) { return s.offset; })
      .def("is_radial", &KernelSpec::is_radial)
      .def("__repr__", &KernelSpec::describe);

  m.def("eval_kernel",
        [](const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
          return eval_kernel(spec, x, y);
        },
        py::arg("spec"), py::arg("x"), py::arg("y"));
  m.def("build_gram",
        [](const KernelSpec& spec, const Eigen::MatrixXd& x) { return build_gram(spec, x).matrix(); },
        py::arg("spec"), py::arg("features"), "Gram matrix over the rows of `features`.");
  m.def("cross_gram", &cross_gram, py::arg("spec"), py::arg("train"), py::arg("queries"));
  m.def("pair_quadratic_form",
        [](const Eigen::MatrixXd& k, const Eigen::MatrixXd& c, Eigen::Index i, Eigen::Index j) {
          return pair_quadratic_form(KernelMatrix(k), c, i, j);
        },
        py::arg("gram"), py::arg("cbar"), py::arg("i"), py::arg("j"));

  py::enum_<SolverMethod>(m, "SolverMethod")
      .value("SMOOTHED", SolverMethod::kSmoothed)
      .value("SUBGRADIENT", SolverMethod::kSubgradient);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("method", &SolverConfig::method)
      .def_readwrite("eta", &SolverConfig::eta)
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("step_init", &SolverConfig::step_init)
      .def_readwrite("step_up", &SolverConfig::step_up)
      .def_readwrite("step_down", &SolverConfig::step_down)
      .def_readwrite("tol_objective", &SolverConfig::tol_objective)
      .def_readwrite("convergence_window", &SolverConfig::convergence_window)
      .def_readwrite("active_set_refresh", &SolverConfig::active_set_refresh)
      .def_readwrite("include_diagonal_pairs", &SolverConfig::include_diagonal_pairs);

  py::class_<MetricModel>(m, "MetricModel")
      .def_readonly("cbar", &MetricModel::cbar)
      .def_readonly("eps", &MetricModel::eps)
      .def_readonly("objective", &MetricModel::objective)
      .def_readonly("rank_estimate", &MetricModel::rank_estimate)
      .def_readonly("iterations", &MetricModel::iterations)
      .def_readonly("converged", &MetricModel::converged);

  m.def("objective",
        [](const Eigen::MatrixXd& k, const std::vector<int>& labels, const Eigen::MatrixXd& c, double eps,
           double eta, bool include_diag) {
          return objective(KernelMatrix(k), PairSign::from_labels(labels), c, eps, eta, include_diag);
        },
        py::arg("gram"), py::arg("labels"), py::arg("cbar"), py::arg("eps"), py::arg("eta") = 1.0,
        py::arg("include_diag") = false);
  m.def("project_feasible", &project_feasible, py::arg("cbar"), py::arg("eps"));
  m.def("solve",
        [](const Eigen::MatrixXd& k, const std::vector<int>& labels, const SolverConfig& config) {
          py::gil_scoped_release release;
          return solve(KernelMatrix(k), PairSign::from_labels(labels), config);
        },
        py::arg("gram"), py::arg("labels"), py::arg("config") = SolverConfig{});
  m.def("mahalanobis_of_linear", &mahalanobis_of_linear, py::arg("cbar"), py::arg("features"));
  m.def("extract_embedding",
        [](const MetricModel& model, const Eigen::MatrixXd& k, int d) {
          return extract_embedding(model, KernelMatrix(k), d);
        },
        py::arg("model"), py::arg("gram"), py::arg("d"));
  m.def("save_model", &save_model, py::arg("path"), py::arg("model"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def("learned_distances",
        [](const Eigen::MatrixXd& k, const Eigen::MatrixXd& c) { return pair_quadratic_forms(KernelMatrix(k), c); },
        py::arg("gram"), py::arg("cbar"), "All pairwise (k_i - k_j)' C (k_i - k_j).");
  m.def("loo_error",
        [](const Eigen::MatrixXd& d, const std::vector<int>& labels, double eps) { return loo_error(d, labels, eps); },
        py::arg("distances"), py::arg("labels"), py::arg("eps"));
  m.def("knn_loo_error",
        [](const Eigen::MatrixXd& d, const std::vector<int>& labels, int k) {
          return knn_loo_error(DistanceOracle::precomputed(d), labels, k);
        },
        py::arg("distances"), py::arg("labels"), py::arg("k") = 3);
  m.def("knn_predict",
        [](const Eigen::VectorXd& d, const std::vector<int>& labels, int k) {
          return knn_from_distances(d, labels, k).label;
        },
        py::arg("distances"), py::arg("labels"), py::arg("k") = 3);

  py::class_<TransductiveKernel>(m, "TransductiveKernel")
      .def_readonly("gram", &TransductiveKernel::k)
      .def_readonly("eps", &TransductiveKernel::eps)
      .def_readonly("objective", &TransductiveKernel::objective)
      .def_readonly("iterations", &TransductiveKernel::iterations);
  m.def("learn_kernel_transductive",
        [](const std::vector<int>& labels, double lambda, int max_iters) {
          KernelLearningConfig config;
          config.max_iters = max_iters;
          return learn_kernel_transductive(PairSign::from_labels(labels), lambda, config);
        },
        py::arg("labels"), py::arg("lam"), py::arg("max_iters") = 20000);

  py::class_<MklModel>(m, "MklModel")
      .def_readonly("beta", &MklModel::beta)
      .def_readonly("eps", &MklModel::eps)
      .def_readonly("objective", &MklModel::objective)
      .def_readonly("combined", &MklModel::combined)
      .def_readonly("history", &MklModel::history)
      .def_readonly("iterations", &MklModel::iterations);
  m.def("learn_kernel_combination_qp",
        [](const std::vector<Eigen::MatrixXd>& grams, const std::vector<int>& labels, double lambda, int max_iters) {
          KernelLearningConfig config;
          config.max_iters = max_iters;
          return learn_kernel_combination_qp(KernelDictionary(grams), PairSign::from_labels(labels), lambda, config);
        },
        py::arg("grams"), py::arg("labels"), py::arg("lam"), py::arg("max_iters") = 20000);
  m.def("qp_ranking_equivalent", &qp_ranking_equivalent, py::arg("specs"), py::arg("beta"),
        py::arg("queries"), py::arg("train"));

  m.def("make_blobs",
        [](int n_per_class, int classes, double separation, std::uint64_t seed) {
          auto d = make_blobs(n_per_class, classes, separation, seed);
          return py::make_tuple(d.features, d.labels);
        },
        py::arg("n_per_class"), py::arg("classes"), py::arg("separation"), py::arg("seed") = 0);
  m.def("load_csv",
        [](const std::string& path, bool label_first) {
          auto d = load_csv(path, label_first ? LabelColumn::kFirst : LabelColumn::kLast);
          return py::make_tuple(d.features, d.labels, d.class_names);
        },
        py::arg("path"), py::arg("label_first") = false);

  m.def("run_experiment",
        [](const std::string& csv, bool label_first, const std::vector<std::string>& algorithms, int runs,
           std::uint64_t seed, std::vector<double> widths, std::vector<double> lambdas, int k,
           const std::string& format) {
          ExperimentConfig config;
          config.source.csv_path = csv;
          config.source.label_column = label_first ? LabelColumn::kFirst : LabelColumn::kLast;
          config.algorithms.clear();
          for (const auto& a : algorithms) config.algorithms.push_back(parse_algorithm(a));
          config.split.runs = runs;
          config.split.seed = seed;
          if (!widths.empty()) config.width_grid = std::move(widths);
          if (!lambdas.empty()) config.lambda_grid = std::move(lambdas);
          config.k = k;
          const auto fmt = parse_report_format(format);
          py::gil_scoped_release release;
          return emit_report(run_experiment(config), fmt);
        },
        py::arg("csv"), py::arg("label_first") = false,
        py::arg("algorithms") = std::vector<std::string>{"eucl-nn"}, py::arg("runs") = 10,
        py::arg("seed") = 0, py::arg("widths") = std::vector<double>{},
        py::arg("lambdas") = std::vector<double>{}, py::arg("k") = 3, py::arg("format") = "csv");
}
