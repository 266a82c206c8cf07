#include "repshift/dataio.hpp"
#include "repshift/density_ratio.hpp"
#include "repshift/errors.hpp"
#include "repshift/harness.hpp"
#include "repshift/regression.hpp"
#include "repshift/rng.hpp"
#include "repshift/simgen.hpp"
#include "repshift/simplex.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

using namespace repshift;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct ScenarioFlags {
    std::string sim_case = "case1";
    std::string regime = "bounded";
    std::size_t n_p = 500;
    std::size_t n_q = 2000;
    std::size_t m = 25;
    int series_terms = 50;
    double noise_sd = 0.01;
    double lambda_sd = 0.1;

    void add(CLI::App* app) {
        app->add_option("--case", sim_case, "Simulation case: case1 (d=3) or case2 (d=10)")->capture_default_str();
        app->add_option("--regime", regime, "Copula regime: bounded or unbounded")->capture_default_str();
        app->add_option("--n-p", n_p, "Source subjects")->capture_default_str();
        app->add_option("--n-q", n_q, "Target subjects")->capture_default_str();
        app->add_option("--m", m, "Observations per subject")->capture_default_str();
        app->add_option("--series-terms", series_terms, "Random-effect series length")->capture_default_str();
        app->add_option("--noise-sd", noise_sd, "Observation noise SD")->capture_default_str();
        app->add_option("--lambda-sd", lambda_sd, "Random-effect coefficient SD")->capture_default_str();
    }

    ScenarioConfig build(std::uint64_t seed) const {
        auto cfg = ScenarioConfig::make(parse_sim_case(sim_case), parse_regime(regime));
        cfg.n_p = n_p;
        cfg.n_q = n_q;
        cfg.m = m;
        cfg.series_terms = series_terms;
        cfg.noise_sd = noise_sd;
        cfg.lambda_sd = lambda_sd;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    std::size_t epochs = 200;
    std::size_t batch = 0;
    std::size_t patience = 0;
    bool weighted_sampling = false;
    std::optional<double> max_grad_norm;
    std::optional<double> learning_rate;

    void add(CLI::App* app, const std::string& prefix = "", bool regression = true) {
        app->add_option("--" + prefix + "epochs", epochs, "Maximum training epochs")->capture_default_str();
        app->add_option("--" + prefix + "batch-size", batch, "Minibatch size (0 keeps the recipe default)");
        app->add_option("--" + prefix + "patience", patience, "Early-stopping patience (0 keeps the default)");
        app->add_option("--" + prefix + "learning-rate", learning_rate, "Initial learning rate (default: the recipe's)");
        app->add_option("--" + prefix + "max-grad-norm", max_grad_norm,
                        "Cap on the minibatch gradient norm, 0 disables (default: the recipe's)");
        if (regression)
            app->add_flag("--weighted-sampling", weighted_sampling,
                          "Draw regression minibatches in proportion to the ratio weights");
    }

    void apply(TrainConfig& t) const {
        t.max_epochs = epochs;
        if (batch) t.batch_size = batch;
        if (patience) t.early_stop_patience = patience;
        if (max_grad_norm) t.max_grad_norm = *max_grad_norm;
        if (learning_rate) std::visit([&](auto& o) { o.learning_rate = *learning_rate; }, t.optimizer);
        t.weighted_sampling = weighted_sampling;
    }
};

std::filesystem::path out_path(const std::string& out, const std::string& fallback) {
    return out.empty() ? std::filesystem::path(fallback) : std::filesystem::path(out);
}

RepeatedDataset load_dataset(const std::string& path) { return read_dataset_csv(path).data; }

ClipPolicy parse_clip_policy(const std::string& s) {
    if (s == "none") return ClipPolicy::none;
    if (s == "fixed") return ClipPolicy::fixed;
    if (s == "percentile") return ClipPolicy::percentile;
    throw ConfigError("unknown clip policy '" + s + "'");
}

std::vector<EstimatorKind> parse_methods(const std::string& s) {
    std::vector<EstimatorKind> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_estimator_kind(item));
    }
    if (out.empty()) throw ConfigError("no methods given");
    return out;
}

void print_rows(const std::vector<ResultRow>& rows) {
    std::cout << std::left << std::setw(6) << "method" << std::setw(12) << "mse_mean" << std::setw(12) << "mse_sd"
              << std::setw(10) << "x10 mean" << "failures\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(6) << to_string(r.method) << std::setw(12) << r.mse_mean << std::setw(12)
                  << r.mse_sd << std::setw(10) << std::setprecision(3) << r.mse_mean * 10.0 << std::setprecision(6)
                  << r.failures << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep regression under covariate shift for repeated-measurements data"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key = value file");
    std::uint64_t seed = 0;
    std::string out;
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--out", out, "Output file or directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate source and target datasets");
    ScenarioFlags sim_flags;
    sim_flags.add(sim);

    // fit-ratio
    auto* fr = app.add_subcommand("fit-ratio", "Fit a density ratio from source and target covariates");
    std::string fr_source, fr_target, fr_clip = "none";
    double fr_clip_value = 0.95;
    TrainFlags fr_train;
    fr->add_option("--source", fr_source, "Source dataset CSV")->required();
    fr->add_option("--target", fr_target, "Target dataset CSV")->required();
    fr->add_option("--clip", fr_clip, "Clip policy: none, fixed or percentile")->capture_default_str();
    fr->add_option("--clip-value", fr_clip_value, "Clip level (fixed) or quantile (percentile)")
        ->capture_default_str();
    fr_train.add(fr, "", false);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a regression estimator");
    std::string fit_method = "ne", fit_source, fit_target, fit_ratio_path, fit_validation, fit_regime;
    double fit_split = 0.5;
    std::string fit_clip = "auto";
    double fit_clip_value = ClipSetting::fitted_ratio().value;
    TrainFlags fit_train;
    fit->add_option("--method", fit_method, "ne, kre or ure")->capture_default_str();
    fit->add_option("--source", fit_source, "Source dataset CSV with responses")->required();
    fit->add_option("--target", fit_target, "Target covariates CSV (ure)");
    fit->add_option("--ratio", fit_ratio_path, "Ratio model file (kre)");
    fit->add_option("--regime", fit_regime, "Use the exact copula ratio of this regime (kre)");
    fit->add_option("--validation", fit_validation, "Source validation CSV for model selection");
    fit->add_option("--split", fit_split, "Regression share of the source subjects (ure)")->capture_default_str();
    fit->add_option("--clip", fit_clip, "Ratio clip mode for ure: auto (fixed when unbounded), none, fixed or percentile")
        ->capture_default_str();
    fit->add_option("--clip-value", fit_clip_value, "Clip level or quantile")->capture_default_str();
    fit_train.add(fit);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a fitted model on a dataset");
    std::string ev_model, ev_data, ev_case, ev_pred;
    ev->add_option("--model", ev_model, "Model prefix written by fit")->required();
    ev->add_option("--data", ev_data, "Dataset CSV")->required();
    ev->add_option("--case", ev_case, "Score against this case's regression function instead of y");
    ev->add_option("--predictions", ev_pred, "Write per-observation predictions to this CSV");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Monte Carlo comparison of the estimators");
    ScenarioFlags ex_flags;
    ex_flags.add(ex);
    std::string ex_methods = "ne,kre,ure", ex_kre_clip = "auto", ex_ure_clip = "auto";
    double ex_kre_value = ClipSetting::known_ratio().value, ex_ure_value = ClipSetting::fitted_ratio().value;
    std::size_t ex_reps = 10, ex_eval = 2000, ex_par = 1;
    TrainFlags ex_train, ex_ratio_train;
    ex->add_option("--methods", ex_methods, "Comma-separated subset of ne,kre,ure")->capture_default_str();
    ex->add_option("--replications", ex_reps, "Monte Carlo replications")->capture_default_str();
    ex->add_option("--eval-n-q", ex_eval, "Target subjects used to score each fit")->capture_default_str();
    ex->add_option("--parallelism", ex_par, "Replications run concurrently")->capture_default_str();
    ex->add_option("--kre-clip", ex_kre_clip, "auto (percentile when unbounded), none, fixed or percentile")->capture_default_str();
    ex->add_option("--kre-clip-value", ex_kre_value, "Clip level or quantile for kre")->capture_default_str();
    ex->add_option("--ure-clip", ex_ure_clip, "auto (fixed when unbounded), none, fixed or percentile")->capture_default_str();
    ex->add_option("--ure-clip-value", ex_ure_value, "Clip level or quantile for ure")->capture_default_str();
    ex_train.add(ex);
    ex_ratio_train.add(ex, "ratio-", false);

    // approx-bench
    auto* ab = app.add_subcommand("approx-bench", "Simplicial approximation error against its certificate");
    std::vector<int> ab_N{4, 8, 16, 32};
    std::vector<double> ab_zeta{2.0};
    std::size_t ab_points = 10000;
    ab->add_option("--N", ab_N, "Mesh resolutions")->capture_default_str();
    ab->add_option("--zeta", ab_zeta, "Smoothness levels")->capture_default_str();
    ab->add_option("--points", ab_points, "Random evaluation points per function")->capture_default_str();

    // binned-mse
    auto* bm = app.add_subcommand("binned-mse", "Prediction MSE within quantile bins of the true response");
    std::string bm_input, bm_true = "true", bm_pred = "pred";
    std::size_t bm_bins = 10;
    bm->add_option("--input", bm_input, "CSV with true and predicted columns")->required();
    bm->add_option("--true-col", bm_true, "Column of true responses")->capture_default_str();
    bm->add_option("--pred-col", bm_pred, "Column of predictions")->capture_default_str();
    bm->add_option("--bins", bm_bins, "Number of bins")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*sim) {
            const auto cfg = sim_flags.build(seed);
            const auto dir = out_path(out, ".");
            std::filesystem::create_directories(dir);
            const auto manifest = scenario_manifest(cfg);
            const auto source = gen_responses(gen_covariates(Domain::source, cfg, cfg.n_p, cfg.m, DataRole::source),
                                              cfg, DataRole::source);
            const auto validation = gen_responses(
                gen_covariates(Domain::source, cfg, (cfg.n_p + 4) / 5, cfg.m, DataRole::validation), cfg,
                DataRole::validation);
            const auto target = gen_responses(gen_covariates(Domain::target, cfg, cfg.n_q, cfg.m, DataRole::target),
                                              cfg, DataRole::target);
            write_dataset_csv((dir / "source.csv").string(), source, manifest + " role=source");
            write_dataset_csv((dir / "validation.csv").string(), validation, manifest + " role=validation");
            write_dataset_csv((dir / "target.csv").string(), target, manifest + " role=target");
            std::cout << "wrote source.csv, validation.csv, target.csv to " << dir.string() << '\n';
        } else if (*fr) {
            RatioFitOptions opt;
            opt.train.seed = seed;
            opt.clip_policy = parse_clip_policy(fr_clip);
            opt.clip_value = fr_clip_value;
            fr_train.apply(opt.train);
            const auto res = fit_ratio(load_dataset(fr_source), load_dataset(fr_target), opt);
            const auto path = out_path(out, "ratio.txt");
            res.model.save(path.string());
            std::cout << "epochs " << res.report.epochs_run << " best_loss " << res.report.best_loss << " clip "
                      << (res.clip_level ? std::to_string(*res.clip_level) : "none") << '\n'
                      << "wrote " << path.string() << '\n';
        } else if (*fit) {
            const auto method = parse_estimator_kind(fit_method);
            RegressionOptions opt;
            opt.train.seed = seed;
            fit_train.apply(opt.train);
            const auto source = load_dataset(fit_source);
            std::optional<RepeatedDataset> validation;
            if (!fit_validation.empty()) validation = load_dataset(fit_validation);
            const RepeatedDataset* val = validation ? &*validation : nullptr;
            FittedRegression model;
            if (method == EstimatorKind::ne) {
                model = fit_naive(source, opt, val);
            } else if (method == EstimatorKind::kre) {
                std::optional<RatioModel> ratio;
                if (!fit_ratio_path.empty()) ratio = RatioModel::load(fit_ratio_path);
                else if (!fit_regime.empty())
                    ratio = RatioModel::exact_copula(default_copula(parse_regime(fit_regime), source.dim()));
                else throw ConfigError("kre needs --ratio or --regime");
                model = fit_kre(source, *ratio, opt, val);
            } else {
                if (fit_target.empty()) throw ConfigError("ure needs --target");
                RatioFitOptions ro;
                ro.train.seed = derive_seed(seed, {stream::target});
                const Regime regime = fit_regime.empty() ? Regime::bounded : parse_regime(fit_regime);
                auto clip = ClipSetting::fitted_ratio();
                clip.mode = parse_clip_mode(fit_clip);
                clip.value = fit_clip_value;
                std::tie(ro.clip_policy, ro.clip_value) = clip.resolve(regime);
                model = fit_ure(source, load_dataset(fit_target), opt, ro, derive_seed(seed, {stream::split}), val,
                                nullptr, fit_split);
            }
            const auto prefix = out_path(out, "model");
            if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
            model.save(prefix.string());
            std::cout << to_string(method) << " epochs " << model.report.epochs_run << " best_loss "
                      << model.report.best_loss << '\n'
                      << "wrote " << prefix.string() << ".net and " << prefix.string() << ".meta\n";
        } else if (*ev) {
            const auto model = FittedRegression::load(ev_model);
            const auto data = load_dataset(ev_data);
            const Eigen::MatrixXd x = data.covariates();
            const Eigen::VectorXd pred = model.predict_batch(x);
            double mse = 0.0;
            if (!ev_case.empty()) {
                mse = prediction_mse(model, data, oracle_f0(parse_sim_case(ev_case)));
            } else {
                const Eigen::VectorXd y = data.responses();
                mse = (pred - y).squaredNorm() / static_cast<double>(y.size());
            }
            if (!ev_pred.empty()) {
                std::ofstream os(ev_pred);
                if (!os) throw std::runtime_error("cannot open " + ev_pred + " for writing");
                os << std::setprecision(17) << "true,pred\n";
                const auto f0 = ev_case.empty() ? PointFunction{} : oracle_f0(parse_sim_case(ev_case));
                const Eigen::VectorXd y = ev_case.empty() ? data.responses() : Eigen::VectorXd();
                for (Eigen::Index j = 0; j < x.cols(); ++j) {
                    const Eigen::VectorXd c = x.col(j);
                    const double t = f0 ? f0(std::span<const double>(c.data(), static_cast<std::size_t>(c.size())))
                                        : y[j];
                    os << t << ',' << pred[j] << '\n';
                }
            }
            std::cout << std::setprecision(10) << "mse " << mse << '\n';
        } else if (*ex) {
            ExperimentConfig cfg;
            cfg.scenario = ex_flags.build(seed);
            cfg.methods = parse_methods(ex_methods);
            cfg.replications = ex_reps;
            cfg.eval_n_q = ex_eval;
            cfg.parallelism = ex_par;
            cfg.output_dir = out_path(out, "experiment").string();
            cfg.kre_clip.mode = parse_clip_mode(ex_kre_clip);
            cfg.kre_clip.value = ex_kre_value;
            cfg.ure_clip.mode = parse_clip_mode(ex_ure_clip);
            cfg.ure_clip.value = ex_ure_value;
            ex_train.apply(cfg.regression.train);
            ex_ratio_train.apply(cfg.ratio.train);
            const auto res = run_experiment(cfg);
            print_rows(res.rows);
            std::cout << "wrote results to " << cfg.output_dir << '\n';
            if (res.failures > 0) {
                std::cerr << res.failures << " fit(s) failed, see replications.csv\n";
                if (res.divergences > 0) return kExitDiverged;
                return kExitFailure;
            }
        } else if (*ab) {
            const auto rows = approx_benchmark(default_bench_functions(), ab_zeta, ab_N, ab_points, seed);
            const auto path = out_path(out, "approx_bench.csv");
            std::ofstream os(path);
            if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
            write_bench_csv(os, rows);
            write_bench_csv(std::cout, rows);
        } else if (*bm) {
            std::ifstream is(bm_input);
            if (!is) throw ConfigError("cannot open " + bm_input);
            std::string line;
            if (!std::getline(is, line)) throw EmptyInputError(bm_input + " is empty");
            const auto header = split_csv_line(line);
            auto column = [&](const std::string& name) {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) throw SchemaError("column '" + name + "' not found in " + bm_input);
                return static_cast<std::size_t>(it - header.begin());
            };
            const std::size_t ti = column(bm_true), pi = column(bm_pred);
            std::vector<double> t, p;
            std::size_t line_no = 1;
            while (std::getline(is, line)) {
                ++line_no;
                if (line.empty()) continue;
                const auto f = split_csv_line(line);
                if (f.size() != header.size()) throw ParseError(line_no, "wrong number of fields");
                try {
                    t.push_back(std::stod(f[ti]));
                    p.push_back(std::stod(f[pi]));
                } catch (const std::logic_error&) {
                    throw ParseError(line_no, "cannot parse a number");
                }
            }
            const auto bins = binned_mse(Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
                                         Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())),
                                         bm_bins);
            if (out.empty()) {
                write_binned_csv(std::cout, bins);
            } else {
                std::ofstream os(out);
                if (!os) throw std::runtime_error("cannot open " + out + " for writing");
                write_binned_csv(os, bins);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergedTraining& e) {
        std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
