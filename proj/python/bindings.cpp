#include "repshift/dataio.hpp"
#include "repshift/errors.hpp"
#include "repshift/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace repshift;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows of x are observations; subjects[i] names the subject of row i.
RepeatedDataset to_dataset(const RowMatrix& x, const std::vector<std::int64_t>& subjects,
                           const std::optional<Eigen::VectorXd>& y) {
    if (static_cast<Eigen::Index>(subjects.size()) != x.rows())
        throw ShapeError("subjects must have one entry per row of x");
    if (y && y->size() != x.rows()) throw ShapeError("y must have one entry per row of x");
    std::vector<std::int64_t> order;
    std::map<std::int64_t, std::vector<Eigen::Index>> rows;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        auto [it, fresh] = rows.try_emplace(subjects[static_cast<std::size_t>(i)]);
        if (fresh) order.push_back(it->first);
        it->second.push_back(i);
    }
    RepeatedDataset out(static_cast<int>(x.cols()));
    for (auto id : order) {
        const auto& idx = rows[id];
        Subject s{std::to_string(id), Eigen::MatrixXd(x.cols(), static_cast<Eigen::Index>(idx.size())), {}};
        if (y) s.y.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            s.x.col(static_cast<Eigen::Index>(j)) = x.row(idx[j]).transpose();
            if (y) s.y[static_cast<Eigen::Index>(j)] = (*y)[idx[j]];
        }
        out.add(std::move(s));
    }
    return out;
}

Eigen::MatrixXd columns(const RowMatrix& x) { return x.transpose(); }

TrainConfig with_epochs(TrainConfig t, std::size_t epochs, std::uint64_t seed) {
    t.max_epochs = epochs;
    t.seed = seed;
    return t;
}

ClipPolicy clip_policy(const std::string& s) {
    if (s == "none") return ClipPolicy::none;
    if (s == "fixed") return ClipPolicy::fixed;
    if (s == "percentile") return ClipPolicy::percentile;
    throw ConfigError("unknown clip policy '" + s + "'");
}

py::dict row_dict(const ResultRow& r) {
    py::dict d;
    d["method"] = to_string(r.method);
    d["regime"] = to_string(r.regime);
    d["n_p"] = r.n_p;
    d["m"] = r.m;
    d["mse_mean"] = r.mse_mean;
    d["mse_sd"] = r.mse_sd;
    d["mses"] = r.mses;
    d["failures"] = r.failures;
    return d;
}

}  // namespace

PYBIND11_MODULE(_repshift, m) {
    m.doc() = "Regression under covariate shift with repeated measurements";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DivergedTraining>(m, "DivergedTraining", PyExc_RuntimeError);

    m.def(
        "simulate",
        [](const std::string& sim_case, const std::string& regime, const std::string& domain, std::size_t n,
           std::size_t m_obs, std::uint64_t seed, bool responses) {
            auto cfg = ScenarioConfig::make(parse_sim_case(sim_case), parse_regime(regime));
            cfg.seed = seed;
            const bool target = domain == "target";
            if (!target && domain != "source") throw ConfigError("domain must be 'source' or 'target'");
            auto data = gen_covariates(target ? Domain::target : Domain::source, cfg, n, m_obs,
                                       target ? DataRole::target : DataRole::source);
            if (responses) data = gen_responses(data, cfg, target ? DataRole::target : DataRole::source);
            std::vector<std::int64_t> subject;
            for (std::size_t i = 0; i < data.num_subjects(); ++i)
                subject.insert(subject.end(), static_cast<std::size_t>(data.subject(i).num_observations()),
                               static_cast<std::int64_t>(i));
            py::dict out;
            out["x"] = RowMatrix(data.covariates().transpose());
            out["subject"] = subject;
            if (responses) out["y"] = Eigen::VectorXd(data.responses());
            return out;
        },
        py::arg("case") = "case1", py::arg("regime") = "bounded", py::arg("domain") = "source", py::arg("n") = 100,
        py::arg("m") = 25, py::arg("seed") = 0, py::arg("responses") = true,
        "Simulated panel as a dict with x (rows are observations), subject and y.");

    m.def(
        "exact_ratio",
        [](const RowMatrix& x, double mu_p, double var_p, double mu_q, double var_q) {
            const CopulaParams c{mu_p, var_p, mu_q, var_q, static_cast<int>(x.cols())};
            c.validate();
            return Eigen::VectorXd(RatioModel::exact_copula(c).evaluate_batch(columns(x)));
        },
        py::arg("x"), py::arg("mu_p"), py::arg("var_p"), py::arg("mu_q"), py::arg("var_q"));

    py::class_<MlpNetwork>(m, "Network")
        .def_static("load", py::overload_cast<const std::string&>(&MlpNetwork::load))
        .def("save", py::overload_cast<const std::string&>(&MlpNetwork::save, py::const_))
        .def_property_readonly("dims", &MlpNetwork::dims)
        .def_property_readonly("num_parameters", &MlpNetwork::num_parameters)
        .def("forward", [](const MlpNetwork& n, const RowMatrix& x) {
            return Eigen::VectorXd(n.forward_batch(columns(x)));
        });

    py::class_<RatioModel>(m, "Ratio")
        .def_static("load", py::overload_cast<const std::string&>(&RatioModel::load))
        .def("save", py::overload_cast<const std::string&>(&RatioModel::save, py::const_))
        .def_property_readonly("clip_level", &RatioModel::clip_level)
        .def("clipped", &RatioModel::clipped)
        .def("__call__", [](const RatioModel& r, const RowMatrix& x) {
            return Eigen::VectorXd(r.evaluate_batch(columns(x)));
        });

    m.def(
        "fit_ratio",
        [](const RowMatrix& source_x, const std::vector<std::int64_t>& source_subject, const RowMatrix& target_x,
           const std::vector<std::int64_t>& target_subject, std::vector<int> hidden, std::size_t epochs,
           const std::string& clip, double clip_value, std::uint64_t seed) {
            RatioFitOptions opt;
            opt.hidden = std::move(hidden);
            opt.train = with_epochs(opt.train, epochs, seed);
            opt.clip_policy = clip_policy(clip);
            opt.clip_value = clip_value;
            py::gil_scoped_release unlock;
            return fit_ratio(to_dataset(source_x, source_subject, std::nullopt),
                             to_dataset(target_x, target_subject, std::nullopt), opt)
                .model;
        },
        py::arg("source_x"), py::arg("source_subject"), py::arg("target_x"), py::arg("target_subject"),
        py::arg("hidden") = std::vector<int>{64, 64}, py::arg("epochs") = 200, py::arg("clip") = "none",
        py::arg("clip_value") = 0.95, py::arg("seed") = 0);

    py::class_<FittedRegression>(m, "Regression")
        .def_static("load", &FittedRegression::load)
        .def("save", &FittedRegression::save)
        .def_property_readonly("method", [](const FittedRegression& f) { return to_string(f.kind); })
        .def_property_readonly("network", [](const FittedRegression& f) { return f.net; })
        .def_property_readonly("ratio", [](const FittedRegression& f) { return f.ratio; })
        .def_property_readonly("epochs", [](const FittedRegression& f) { return f.report.epochs_run; })
        .def("predict", [](const FittedRegression& f, const RowMatrix& x) {
            return Eigen::VectorXd(f.predict_batch(columns(x)));
        });

    m.def(
        "fit",
        [](const std::string& method, const RowMatrix& x, const std::vector<std::int64_t>& subject,
           const Eigen::VectorXd& y, std::optional<RowMatrix> target_x,
           std::optional<std::vector<std::int64_t>> target_subject, std::optional<RatioModel> ratio,
           std::vector<int> hidden, std::size_t epochs, const std::string& clip, double clip_value,
           std::uint64_t seed) {
            RegressionOptions opt;
            opt.hidden = std::move(hidden);
            opt.train = with_epochs(opt.train, epochs, seed);
            const auto source = to_dataset(x, subject, y);
            switch (parse_estimator_kind(method)) {
                case EstimatorKind::ne: {
                    py::gil_scoped_release unlock;
                    return fit_naive(source, opt);
                }
                case EstimatorKind::kre: {
                    if (!ratio) throw ConfigError("method kre needs a ratio");
                    py::gil_scoped_release unlock;
                    return fit_kre(source, *ratio, opt);
                }
                case EstimatorKind::ure: {
                    if (!target_x || !target_subject) throw ConfigError("method ure needs target covariates");
                    RatioFitOptions ropt;
                    ropt.train = with_epochs(ropt.train, epochs, seed + 1);
                    ropt.clip_policy = clip_policy(clip);
                    ropt.clip_value = clip_value;
                    const auto target = to_dataset(*target_x, *target_subject, std::nullopt);
                    py::gil_scoped_release unlock;
                    return fit_ure(source, target, opt, ropt, seed);
                }
            }
            throw ConfigError("unknown method");
        },
        py::arg("method"), py::arg("x"), py::arg("subject"), py::arg("y"), py::arg("target_x") = py::none(),
        py::arg("target_subject") = py::none(), py::arg("ratio") = py::none(),
        py::arg("hidden") = std::vector<int>{128, 128, 128}, py::arg("epochs") = 200, py::arg("clip") = "none",
        py::arg("clip_value") = 2.0, py::arg("seed") = 0);

    m.def(
        "run_experiment",
        [](const std::string& sim_case, const std::string& regime, std::size_t n_p, std::size_t n_q, std::size_t m_obs,
           std::size_t replications, std::size_t eval_n_q, const std::vector<std::string>& methods,
           std::vector<int> hidden, std::size_t epochs, std::uint64_t seed, const std::string& output_dir) {
            ExperimentConfig cfg;
            cfg.scenario = ScenarioConfig::make(parse_sim_case(sim_case), parse_regime(regime));
            cfg.scenario.n_p = n_p;
            cfg.scenario.n_q = n_q;
            cfg.scenario.m = m_obs;
            cfg.scenario.seed = seed;
            cfg.replications = replications;
            cfg.eval_n_q = eval_n_q;
            cfg.methods.clear();
            for (const auto& s : methods) cfg.methods.push_back(parse_estimator_kind(s));
            cfg.regression.hidden = std::move(hidden);
            cfg.regression.train.max_epochs = epochs;
            cfg.ratio.train.max_epochs = epochs;
            cfg.output_dir = output_dir;
            ExperimentResult res;
            {
                py::gil_scoped_release unlock;
                res = run_experiment(cfg);
            }
            py::list rows;
            for (const auto& r : res.rows) rows.append(row_dict(r));
            return rows;
        },
        py::arg("case") = "case1", py::arg("regime") = "bounded", py::arg("n_p") = 500, py::arg("n_q") = 2000,
        py::arg("m") = 25, py::arg("replications") = 10, py::arg("eval_n_q") = 2000,
        py::arg("methods") = std::vector<std::string>{"ne", "kre", "ure"},
        py::arg("hidden") = std::vector<int>{128, 128, 128}, py::arg("epochs") = 200, py::arg("seed") = 0,
        py::arg("output_dir") = "");

    m.def(
        "approx_bench",
        [](const std::vector<double>& zetas, const std::vector<int>& resolutions, std::size_t points,
           std::uint64_t seed) {
            py::list out;
            for (const auto& r : approx_benchmark(default_bench_functions(), zetas, resolutions, points, seed)) {
                py::dict d;
                d["function"] = r.function;
                d["d"] = r.d;
                d["zeta"] = r.zeta;
                d["t"] = r.t;
                d["B"] = r.B;
                d["N"] = r.N;
                d["sup_error"] = r.sup_error;
                d["certificate"] = r.certificate;
                out.append(d);
            }
            return out;
        },
        py::arg("zetas") = std::vector<double>{2.0}, py::arg("resolutions") = std::vector<int>{4, 8, 16, 32},
        py::arg("points") = 10000, py::arg("seed") = 0);

    m.def(
        "binned_mse",
        [](const Eigen::VectorXd& true_y, const Eigen::VectorXd& pred_y, std::size_t bins) {
            py::list out;
            for (const auto& b : repshift::binned_mse(true_y, pred_y, bins)) {
                py::dict d;
                d["mean_true"] = b.mean_true;
                d["mse"] = b.mse;
                d["count"] = b.count;
                out.append(d);
            }
            return out;
        },
        py::arg("true_y"), py::arg("pred_y"), py::arg("bins") = 10);
}
