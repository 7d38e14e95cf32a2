#include "commands.hpp"
#include "config.hpp"

#include "fdaclass/basis.hpp"
#include "fdaclass/classify.hpp"
#include "fdaclass/error.hpp"
#include "fdaclass/fpca.hpp"
#include "fdaclass/poisson.hpp"
#include "fdaclass/smooth.hpp"
#include "fdaclass/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace fdaclass;

namespace {

// BasisPtr points to const; pybind11 holders cannot, so wrap it.
struct Basis {
    BasisPtr ptr;
};

FeatureMatrix feature_matrix(const Eigen::MatrixXd& x, const std::vector<int>& y,
                             std::optional<std::vector<std::string>> names) {
    if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw InputError("X and y have different row counts");
    FeatureMatrix m;
    m.values = x;
    m.labels.assign(y.begin(), y.end());
    if (names) {
        if (static_cast<Eigen::Index>(names->size()) != x.cols()) throw InputError("one name per column required");
        m.names = *names;
    } else {
        for (Eigen::Index j = 0; j < x.cols(); ++j) m.names.push_back("x" + std::to_string(j));
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) m.row_ids.push_back(std::to_string(i));
    return m;
}

// Values may be strings, numbers or lists of either; lists become the
// comma-separated form of the configuration file.
app::ExperimentConfig to_config(const py::dict& fields) {
    app::ExperimentConfig c;
    for (const auto& [key, value] : fields) {
        std::string text;
        if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
            for (const auto& item : value) {
                if (!text.empty()) text += ",";
                text += py::str(item).cast<std::string>();
            }
        } else {
            text = py::str(value).cast<std::string>();
        }
        app::set_field(c, key.cast<std::string>(), text);
    }
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Penalized B-spline smoothing, functional PCA, Poisson intensities and address classifiers";

    auto base = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)base;

    py::class_<Basis>(m, "Basis", "Clamped B-spline basis on [lo, hi]")
        .def(py::init([](int order, std::vector<double> breakpoints, double lo, double hi) {
                 return Basis{make_basis({order, std::move(breakpoints), {lo, hi}})};
             }),
             "order"_a, "breakpoints"_a = std::vector<double>{}, "lo"_a = 0.0, "hi"_a = 1.0)
        .def_static(
            "uniform",
            [](int order, int n_intervals, double lo, double hi) {
                return Basis{make_basis(uniform_spec(order, n_intervals, {lo, hi}))};
            },
            "order"_a, "n_intervals"_a, "lo"_a = 0.0, "hi"_a = 1.0)
        .def_property_readonly("order", [](const Basis& b) { return b.ptr->order(); })
        .def_property_readonly("size", [](const Basis& b) { return b.ptr->size(); })
        .def_property_readonly("knots", [](const Basis& b) { return b.ptr->knots(); })
        .def("eval", [](const Basis& b, double t, int deriv) { return b.ptr->eval(t, deriv); }, "t"_a, "deriv"_a = 0)
        .def("design_matrix", [](const Basis& b, const std::vector<double>& t, int deriv) {
                 return b.ptr->design_matrix(t, deriv);
             }, "times"_a, "deriv"_a = 0)
        .def("gram", [](const Basis& b) { return b.ptr->gram(); })
        .def("penalty", [](const Basis& b, int m) { return b.ptr->penalty(m); }, "m"_a);

    py::class_<SmoothCurve>(m, "SmoothCurve")
        .def_readonly("coef", &SmoothCurve::coef)
        .def_readonly("lam", &SmoothCurve::lambda)
        .def_readonly("penalty_order", &SmoothCurve::penalty_order)
        .def_readonly("condition_estimate", &SmoothCurve::condition_estimate)
        .def("value", &SmoothCurve::value, "t"_a, "deriv"_a = 0)
        .def("evaluate", [](const SmoothCurve& c, const std::vector<double>& grid, int deriv) {
                 return c.evaluate(grid, deriv);
             }, "grid"_a, "deriv"_a = 0);

    m.def("penalized_fit",
          [](const Basis& basis, std::vector<double> times, std::vector<double> values, double lam, int m) {
              return penalized_fit({std::move(times), std::move(values)}, basis.ptr, lam, m);
          },
          "basis"_a, "times"_a, "values"_a, "lam"_a, "m"_a = 2,
          "argmin sum (y - x(t))^2 + lam * integral (D^m x)^2 over the basis");
    m.def("gcv_score",
          [](const Basis& basis, std::vector<double> times, std::vector<double> values, double lam, int m) {
              return gcv_score({std::move(times), std::move(values)}, basis.ptr, lam, m);
          },
          "basis"_a, "times"_a, "values"_a, "lam"_a, "m"_a = 2);

    py::class_<FpcaModel>(m, "FpcaModel")
        .def_readonly("mean_coef", &FpcaModel::mean_coef)
        .def_readonly("eigen_coefs", &FpcaModel::eigen_coefs)
        .def_readonly("eigenvalues", &FpcaModel::eigenvalues)
        .def_readonly("all_eigenvalues", &FpcaModel::all_eigenvalues)
        .def_readonly("gram", &FpcaModel::gram)
        .def_readonly("n_curves", &FpcaModel::n_curves)
        .def_property_readonly("n_components", &FpcaModel::n_components)
        .def("eigenfunction", [](const FpcaModel& f, Eigen::Index j, const std::vector<double>& grid) {
                 return f.eigenfunction(j, grid);
             }, "j"_a, "grid"_a)
        .def("mean", [](const FpcaModel& f, const std::vector<double>& grid) { return f.mean(grid); }, "grid"_a)
        .def("explained_variance", [](const FpcaModel& f, Eigen::Index n) { return explained_variance(f, n); }, "n"_a)
        .def("covariance", [](const FpcaModel& f, double s, double t) { return covariance_at(f, s, t); }, "s"_a, "t"_a)
        .def("truncate", [](const FpcaModel& f, Eigen::Index n) { return truncate(f, n); }, "n"_a)
        .def("train_scores", [](const FpcaModel& f, const Eigen::MatrixXd& coefs) {
                 return train_scores({f.basis, coefs, {}}, f);
             }, "coefs"_a)
        .def("project", [](const FpcaModel& f, const std::vector<double>& times, const Eigen::MatrixXd& values,
                           double lam) { return project_rows(times, values, f, lam); },
             "times"_a, "values"_a, "lam"_a = 1e-10, "scores of curves sampled at shared times, one per row")
        .def("to_json", [](const FpcaModel& f) { return fpca_to_json(f); })
        .def_static("from_json", [](const std::string& text) { return fpca_from_json(text); }, "text"_a);

    m.def("fit_fpca",
          [](const Basis& basis, const Eigen::MatrixXd& coefs, Eigen::Index n_components, int penalty_order) {
              return fit_fpca({basis.ptr, coefs, {}}, n_components, penalty_order);
          },
          "basis"_a, "coefs"_a, "n_components"_a, "penalty_order"_a = 2,
          "FPCA of curves given by basis coefficients, one curve per row");

    py::class_<RateFit>(m, "RateFit")
        .def_readonly("coef", &RateFit::coef)
        .def_readonly("converged", &RateFit::converged)
        .def_readonly("iterations", &RateFit::iterations)
        .def_readonly("empty_events", &RateFit::empty_events)
        .def_readonly("objective_trace", &RateFit::objective_trace)
        .def("log_rate", &RateFit::log_rate, "t"_a)
        .def("eval", [](const RateFit& r, const std::vector<double>& grid) { return r.eval(grid); }, "grid"_a);

    m.def("fit_rate",
          [](const Basis& basis, std::vector<double> events, double lam, int penalty_order) {
              RateOptions opts;
              opts.penalty_order = penalty_order;
              return fit_rate({std::move(events)}, basis.ptr, lam, opts);
          },
          "basis"_a, "events"_a, "lam"_a = kRateLambda, "penalty_order"_a = 1,
          "penalized maximum-likelihood intensity exp(c' phi(t)) from sorted event times in the domain");

    py::class_<Classifier, std::shared_ptr<Classifier>>(m, "Classifier")
        .def("predict", &Classifier::predict, "X"_a)
        .def("importance", &Classifier::importance)
        .def_property_readonly("algorithm", [](const Classifier& c) { return std::string(algorithm_name(c.algorithm())); })
        .def_property_readonly("feature_names", &Classifier::feature_names)
        .def_property_readonly("n_classes", &Classifier::n_classes)
        .def("to_json", &Classifier::to_json)
        .def_static("from_json", [](const std::string& text) {
            return std::shared_ptr<Classifier>(classifier_from_json(text));
        }, "text"_a);

    m.def("train_forest",
          [](const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes, int n_trees, std::uint64_t seed,
             int mtry, int threads, std::optional<std::vector<std::string>> names) {
              ForestOptions opts;
              opts.n_trees = n_trees;
              opts.seed = seed;
              opts.mtry = mtry;
              opts.threads = threads;
              py::gil_scoped_release release;
              return std::shared_ptr<Classifier>(train_forest(feature_matrix(x, y, std::move(names)), n_classes, opts));
          },
          "X"_a, "y"_a, "n_classes"_a, "n_trees"_a = 500, "seed"_a = 1, "mtry"_a = 0, "threads"_a = 1,
          "names"_a = py::none());
    m.def("train_logit",
          [](const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes, double l2,
             std::optional<std::vector<std::string>> names) {
              LogitOptions opts;
              opts.l2 = l2;
              py::gil_scoped_release release;
              return std::shared_ptr<Classifier>(train_logit(feature_matrix(x, y, std::move(names)), n_classes, opts));
          },
          "X"_a, "y"_a, "n_classes"_a, "l2"_a = 1e-4, "names"_a = py::none());

    m.def("write_synthetic",
          [](const std::filesystem::path& dir, std::size_t per_class, std::uint64_t seed) {
              SynthConfig sc;
              sc.per_class = per_class;
              sc.seed = seed;
              const IngestInputs in = write_synthetic(generate_synthetic(sc), dir);
              return py::dict("transactions"_a = in.transactions, "prices"_a = in.prices, "labels"_a = in.labels);
          },
          "dir"_a, "per_class"_a = 120, "seed"_a = 1,
          "labeled synthetic ledgers as transactions.csv, prices.csv and labels.csv");

    m.def("config_text", [](const py::dict& fields) { return app::emit_config(to_config(fields)); }, "fields"_a,
          "configuration file text for the given field overrides");

    m.def("ingest",
          [](const py::dict& fields, bool force, int threads) {
              const app::ExperimentConfig c = to_config(fields);
              app::validate(c);
              app::IngestSummary s;
              {
                  py::gil_scoped_release release;
                  s = app::cmd_ingest(c, force, threads);
              }
              return py::dict("addresses"_a = s.addresses, "below_threshold"_a = s.below_threshold,
                              "failures"_a = s.failures, "per_class"_a = s.per_class);
          },
          "config"_a, "force"_a = false, "threads"_a = 1);

    m.def("run",
          [](const py::dict& fields, int threads) {
              const app::ExperimentConfig c = to_config(fields);
              app::validate(c);
              app::RunSummary s;
              {
                  py::gil_scoped_release release;
                  s = app::cmd_run(c, threads);
              }
              py::list ranked;
              for (const auto& r : s.ranked) {
                  ranked.append(py::dict("cell"_a = r.cell.key(), "mean_accuracy"_a = r.mean_accuracy,
                                         "fold_accuracy"_a = r.fold_accuracy));
              }
              return py::dict("best"_a = s.best.key(), "test_accuracy"_a = s.test_report.accuracy,
                              "confusion"_a = s.test_report.confusion, "train_rows"_a = s.train_rows,
                              "test_rows"_a = s.test_rows, "ranked"_a = ranked);
          },
          "config"_a, "threads"_a = 1);
}
