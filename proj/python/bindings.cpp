#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "l0qsvm/harness.hpp"
#include "l0qsvm/solvers.hpp"

namespace py = pybind11;
using namespace l0qsvm;

namespace {

PDConfig make_config(const std::string& loss, double C, int k, double rho0, double beta,
                     double eps_inner, double eps_outer, int max_outer, int max_inner) {
  PDConfig c;
  c.loss = parse_loss(loss);
  c.C = C;
  c.k = k;
  c.rho0 = rho0;
  c.beta = beta;
  c.eps_inner = eps_inner;
  c.eps_outer = eps_outer;
  c.max_outer = max_outer;
  c.max_inner = max_inner;
  return c;
}

}  // namespace

PYBIND11_MODULE(_l0qsvm, m) {
  m.doc() = "Sparse kernel-free quadratic surface SVM";

  static py::exception<Error> base(m, "L0QSVMError", PyExc_RuntimeError);
  static py::exception<ConvergenceError> convergence(m, "ConvergenceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConvergenceError& e) {
      py::set_error(convergence, e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kInvalidArgument || e.kind() == ErrorKind::kInvalidLabel ||
          e.kind() == ErrorKind::kInvalidData) {
        PyErr_SetString(PyExc_ValueError, e.what());
      } else {
        py::set_error(base, e.what());
      }
    }
  });

  m.def("hvec", &hvec, py::arg("a"));
  m.def("unhvec", &unhvec, py::arg("w"), py::arg("n"));
  m.def("duplication_matrix", &duplication_matrix, py::arg("n"));
  m.def("elimination_matrix", &elimination_matrix, py::arg("n"));
  m.def("lift", &lift, py::arg("x"));
  m.def("hard_threshold", &hard_threshold, py::arg("z"), py::arg("k"));
  m.def("top_k_support", &top_k_support, py::arg("z"), py::arg("k"));

  py::class_<QuadraticSurfaceModel>(m, "QuadraticSurfaceModel")
      .def_readonly("W", &QuadraticSurfaceModel::W)
      .def_readonly("b", &QuadraticSurfaceModel::b)
      .def_readonly("c", &QuadraticSurfaceModel::c)
      .def_readonly("k", &QuadraticSurfaceModel::k)
      .def_property_readonly("loss", [](const QuadraticSurfaceModel& s) { return std::string(to_string(s.loss)); })
      .def_property_readonly("mean", [](const QuadraticSurfaceModel& s) { return s.standardizer.mean; })
      .def_property_readonly("scale", [](const QuadraticSurfaceModel& s) { return s.standardizer.scale; })
      .def("nonzeros", &QuadraticSurfaceModel::nonzeros)
      .def("active_features", &QuadraticSurfaceModel::active_features)
      .def("decision_values", &QuadraticSurfaceModel::decision_values, py::arg("x"))
      .def("predict", [](const QuadraticSurfaceModel& s, const Eigen::MatrixXd& x) {
        Eigen::VectorXi out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = s.predict(x.row(i).transpose());
        return out;
      }, py::arg("x"))
      .def("to_json", [](const QuadraticSurfaceModel& s) { return serialize(s); })
      .def_static("from_json", &deserialize_model, py::arg("document"));

  py::class_<OvRModel>(m, "OvRModel")
      .def_readonly("classes", &OvRModel::classes)
      .def_readonly("models", &OvRModel::models)
      .def("predict", &OvRModel::predict_all, py::arg("x"))
      .def("to_json", [](const OvRModel& s) { return serialize(s); })
      .def_static("from_json", &deserialize_ovr, py::arg("document"));

  py::class_<StationarityReport>(m, "StationarityReport")
      .def_readonly("support", &StationarityReport::support)
      .def_readonly("is_lu_zhang", &StationarityReport::is_lu_zhang)
      .def("max_residual", &StationarityReport::max_residual);

  py::class_<PDResult>(m, "PDResult")
      .def_readonly("W", &PDResult::W)
      .def_readonly("b", &PDResult::b)
      .def_property_readonly("c", [](const PDResult& r) { return r.solution.c; })
      .def_property_readonly("z", [](const PDResult& r) { return r.solution.z; })
      .def_readonly("objective", &PDResult::objective)
      .def_readonly("converged", &PDResult::converged)
      .def_readonly("report", &PDResult::report)
      .def_property_readonly("rho", [](const PDResult& r) {
        std::vector<double> out;
        for (const auto& o : r.trace.outer) out.push_back(o.rho);
        return out;
      })
      .def_property_readonly("trace", [](const PDResult& r) {
        std::ostringstream os;
        r.trace.write_lines(os);
        return os.str();
      });

  m.def("penalty_decompose",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& loss, double C, int k,
           double rho0, double beta, double eps_inner, double eps_outer, int max_outer, int max_inner) {
          const FeatureCache cache = build_feature_cache(x, y);
          return penalty_decompose(
              cache, make_config(loss, C, k, rho0, beta, eps_inner, eps_outer, max_outer, max_inner));
        },
        py::arg("x"), py::arg("y"), py::arg("loss") = "hinge", py::arg("C") = 1.0, py::arg("k") = 1,
        py::arg("rho0") = 1.0, py::arg("beta") = 10.0, py::arg("eps_inner") = 1e-4,
        py::arg("eps_outer") = 1e-4, py::arg("max_outer") = 30, py::arg("max_inner") = 50,
        "Run penalty decomposition on raw (unstandardized) features with labels in {-1, +1}.");

  m.def("train_binary",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& loss, double C, int k,
           double rho0, double beta, double eps_inner, double eps_outer, int max_outer, int max_inner) {
          return train_binary(x, y,
                              make_config(loss, C, k, rho0, beta, eps_inner, eps_outer, max_outer, max_inner));
        },
        py::arg("x"), py::arg("y"), py::arg("loss") = "hinge", py::arg("C") = 1.0, py::arg("k") = 1,
        py::arg("rho0") = 1.0, py::arg("beta") = 10.0, py::arg("eps_inner") = 1e-4,
        py::arg("eps_outer") = 1e-4, py::arg("max_outer") = 30, py::arg("max_inner") = 50);

  m.def("train_ovr",
        [](const Eigen::MatrixXd& x, const std::vector<std::string>& labels, const std::string& loss,
           double C, int k, double rho0, double beta, double eps_inner, double eps_outer, int max_outer,
           int max_inner) {
          return train_ovr(x, labels,
                           make_config(loss, C, k, rho0, beta, eps_inner, eps_outer, max_outer, max_inner));
        },
        py::arg("x"), py::arg("labels"), py::arg("loss") = "hinge", py::arg("C") = 1.0, py::arg("k") = 1,
        py::arg("rho0") = 1.0, py::arg("beta") = 10.0, py::arg("eps_inner") = 1e-4,
        py::arg("eps_outer") = 1e-4, py::arg("max_outer") = 30, py::arg("max_inner") = 50);

  m.def("accuracy", &accuracy, py::arg("predicted"), py::arg("truth"));

  m.def("make_ellipse",
        [](int samples, double margin, std::uint64_t seed, double box) {
          const RawDataset d = make_ellipse(samples, margin, seed, box);
          return py::make_tuple(d.features, d.labels);
        },
        py::arg("m") = 200, py::arg("margin") = 0.1, py::arg("seed") = 0, py::arg("box") = 1.3);

  m.def("load_csv",
        [](const std::string& path, const std::string& label) {
          const RawDataset d = load_csv(path, label);
          return py::make_tuple(d.features, d.labels, d.feature_names);
        },
        py::arg("path"), py::arg("label_column"));

  m.def("cross_validate",
        [](const std::string& path, const std::string& label, const std::string& loss, int folds, int trials,
           std::uint64_t seed, int threads) {
          ExperimentConfig cfg;
          cfg.dataset_path = path;
          cfg.label_column = label;
          cfg.folds = folds;
          cfg.trials = trials;
          cfg.seed = seed;
          cfg.threads = threads;
          cfg.solver.loss = parse_loss(loss);
          const CVReport report = cross_validate(load_csv(path, label), cfg);
          std::vector<double> acc;
          for (const auto& f : report.folds) acc.push_back(f.test_accuracy);
          py::dict out;
          out["fold_accuracy"] = acc;
          out["mean"] = report.mean;
          out["std"] = report.std_dev;
          out["report"] = report.to_text();
          return out;
        },
        py::arg("path"), py::arg("label_column"), py::arg("loss") = "hinge", py::arg("folds") = 5,
        py::arg("trials") = 100, py::arg("seed") = 0, py::arg("threads") = 1);
}
