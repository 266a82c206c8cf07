#include "repshift/harness.hpp"

#include "repshift/errors.hpp"
#include "repshift/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace repshift {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::size_t ceil_fraction(std::size_t n, double f) {
    return static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json train_json(const TrainConfig& t) {
    nlohmann::json j;
    std::visit([&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, AdamConfig>) {
            j["optimizer"] = "adam";
            j["beta1"] = o.beta1;
            j["beta2"] = o.beta2;
            j["epsilon"] = o.epsilon;
        } else {
            j["optimizer"] = "nesterov";
            j["momentum"] = o.momentum;
        }
        j["learning_rate"] = o.learning_rate;
        j["decay_factor"] = o.decay_factor;
    }, t.optimizer);
    j["max_epochs"] = t.max_epochs;
    j["batch_size"] = t.batch_size;
    j["early_stop_patience"] = t.early_stop_patience;
    j["max_grad_norm"] = t.max_grad_norm;
    j["weighted_sampling"] = t.weighted_sampling;
    return j;
}

}  // namespace

std::string to_string(ClipMode m) {
    switch (m) {
        case ClipMode::automatic: return "auto";
        case ClipMode::none: return "none";
        case ClipMode::fixed: return "fixed";
        case ClipMode::percentile: return "percentile";
    }
    return "auto";
}

ClipMode parse_clip_mode(const std::string& s) {
    if (s == "auto") return ClipMode::automatic;
    if (s == "none") return ClipMode::none;
    if (s == "fixed") return ClipMode::fixed;
    if (s == "percentile") return ClipMode::percentile;
    throw ConfigError("unknown clip mode '" + s + "' (expected auto, none, fixed or percentile)");
}

std::pair<ClipPolicy, double> ClipSetting::resolve(Regime r) const {
    switch (mode) {
        case ClipMode::automatic:
            if (r == Regime::bounded) return {ClipPolicy::none, 0.0};
            if (unbounded_policy == ClipPolicy::none) return {ClipPolicy::none, 0.0};
            return {unbounded_policy, value};
        case ClipMode::none: return {ClipPolicy::none, 0.0};
        case ClipMode::fixed: return {ClipPolicy::fixed, value};
        case ClipMode::percentile: return {ClipPolicy::percentile, value};
    }
    return {ClipPolicy::none, 0.0};
}

std::string ClipSetting::describe(Regime r) const {
    const auto [policy, v] = resolve(r);
    if (policy == ClipPolicy::none) return "none";
    if (policy == ClipPolicy::fixed) return "fixed:" + fmt(v);
    return "percentile:" + fmt(v);
}

void ExperimentConfig::validate() const {
    scenario.validate();
    if (methods.empty()) throw ConfigError("at least one method is required");
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (eval_n_q < 1) throw ConfigError("eval_n_q must be positive");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    regression.train.validate();
    ratio.train.validate();
    for (const auto* c : {&kre_clip, &ure_clip}) {
        const auto [policy, v] = c->resolve(Regime::unbounded);
        if (policy == ClipPolicy::fixed && !(v > 0.0)) throw ConfigError("fixed clip level must be positive");
        if (policy == ClipPolicy::percentile && !(v > 0.0 && v < 1.0))
            throw ConfigError("clip percentile must lie in (0, 1)");
    }
    const bool ure = std::find(methods.begin(), methods.end(), EstimatorKind::ure) != methods.end();
    if (ure && scenario.n_p < 2) throw ConfigError("URE needs at least two source subjects");
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t r) {
    return derive_seed(master, {stream::replication, static_cast<std::uint64_t>(r)});
}

ReplicationData make_replication(const ExperimentConfig& cfg, std::size_t r) {
    ReplicationData d;
    d.seed = replication_seed(cfg.scenario.seed, r);
    d.scenario = cfg.scenario;
    d.scenario.seed = d.seed;
    const auto& s = d.scenario;
    d.source = gen_responses(gen_covariates(Domain::source, s, s.n_p, s.m, DataRole::source), s, DataRole::source);
    d.validation = gen_responses(
        gen_covariates(Domain::source, s, ceil_fraction(s.n_p, 0.2), s.m, DataRole::validation), s,
        DataRole::validation);
    d.target = gen_covariates(Domain::target, s, s.n_q, s.m, DataRole::target);
    d.target_validation =
        gen_covariates(Domain::target, s, ceil_fraction(s.n_q, 0.2), s.m, DataRole::target_validation);
    d.evaluation = gen_covariates(Domain::target, s, cfg.eval_n_q, s.m, DataRole::evaluation);
    return d;
}

double prediction_mse(const BatchFunction& model, const RepeatedDataset& target_cov, const PointFunction& f0) {
    if (target_cov.num_observations() == 0) throw EmptyInputError("no target covariates");
    const Eigen::MatrixXd x = target_cov.covariates();
    const Eigen::VectorXd pred = model(x);
    if (pred.size() != x.cols()) throw ShapeError("model returned the wrong number of predictions");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Eigen::VectorXd col = x.col(j);
        const double r = pred[j] - f0(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        sum += r * r;
    }
    return sum / static_cast<double>(x.cols());
}

double prediction_mse(const FittedRegression& model, const RepeatedDataset& target_cov, const PointFunction& f0) {
    if (target_cov.dim() != model.net.input_dim()) throw ShapeError("covariates do not match the model dimension");
    return prediction_mse([&](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return model.predict_batch(x); },
                          target_cov, f0);
}

ReplicationRecord run_replication(const ExperimentConfig& cfg, const ReplicationData& data, EstimatorKind method) {
    ReplicationRecord rec;
    rec.seed = data.seed;
    rec.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    RegressionOptions reg = cfg.regression;
    reg.train.seed = data.seed;
    const Regime regime = data.scenario.regime;
    try {
        FittedRegression fit;
        switch (method) {
            case EstimatorKind::ne:
                fit = fit_naive(data.source, reg, &data.validation);
                break;
            case EstimatorKind::kre: {
                RatioModel ratio = RatioModel::exact_copula(data.scenario.copula);
                const auto [policy, v] = cfg.kre_clip.resolve(regime);
                if (policy == ClipPolicy::fixed) ratio = ratio.clipped(v);
                if (policy == ClipPolicy::percentile) {
                    const double xi = ratio_quantile(ratio, data.source.covariates(), v);
                    if (xi > 0.0) ratio = ratio.clipped(xi);
                }
                fit = fit_kre(data.source, ratio, reg, &data.validation);
                break;
            }
            case EstimatorKind::ure: {
                RatioFitOptions ro = cfg.ratio;
                ro.train.seed = derive_seed(data.seed, {stream::target});
                std::tie(ro.clip_policy, ro.clip_value) = cfg.ure_clip.resolve(regime);
                const LsifLossData ratio_val{data.validation.covariates(), data.target_validation.covariates()};
                fit = fit_ure(data.source, data.target, reg, ro, derive_seed(data.seed, {stream::split}),
                              &data.validation, &ratio_val);
                break;
            }
        }
        rec.mse = prediction_mse(fit, data.evaluation, oracle_f0(data.scenario.sim_case));
        rec.epochs = fit.report.epochs_run;
        if (fit.ratio) rec.clip_level = fit.ratio->clip_level();
    } catch (const DivergedTraining& e) {
        rec.mse = std::numeric_limits<double>::quiet_NaN();
        rec.error = std::string("diverged: ") + e.what();
    } catch (const std::exception& e) {
        rec.mse = std::numeric_limits<double>::quiet_NaN();
        rec.error = e.what();
        if (rec.error.empty()) rec.error = "failed";
    }
    rec.wall_time = seconds_since(t0);
    return rec;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t R = cfg.replications;
    const std::size_t M = cfg.methods.size();
    std::vector<ReplicationRecord> records(R * M);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t r = next++; r < R; r = next++) {
            try {
                const ReplicationData data = make_replication(cfg, r);
                for (std::size_t k = 0; k < M; ++k) {
                    ReplicationRecord rec = run_replication(cfg, data, cfg.methods[k]);
                    rec.replication = r;
                    records[r * M + k] = std::move(rec);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(cfg.parallelism, R);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentResult out;
    out.records = records;
    for (std::size_t k = 0; k < M; ++k) {
        ResultRow row;
        row.method = cfg.methods[k];
        row.regime = cfg.scenario.regime;
        row.n_p = cfg.scenario.n_p;
        row.m = cfg.scenario.m;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& rec = records[r * M + k];
            row.wall_time += rec.wall_time;
            if (rec.ok()) {
                row.mses.push_back(rec.mse);
            } else {
                ++row.failures;
                if (rec.error.rfind("diverged", 0) == 0) ++out.divergences;
            }
        }
        std::tie(row.mse_mean, row.mse_sd) = mean_sd(row.mses);
        out.failures += row.failures;
        out.rows.push_back(std::move(row));
    }

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        const std::filesystem::path dir(cfg.output_dir);
        std::ofstream res(dir / "results.csv");
        std::ofstream reps(dir / "replications.csv");
        std::ofstream man(dir / "manifest.json");
        if (!res || !reps || !man) throw std::runtime_error("cannot write results to " + cfg.output_dir);
        write_results_csv(res, out.rows);
        write_replications_csv(reps, out.records);
        man << experiment_manifest(cfg) << '\n';
    }
    return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "method,regime,n_p,m,replications,failures,mse_mean,mse_sd,mses,wall_time\n";
    for (const auto& r : rows) {
        os << to_string(r.method) << ',' << to_string(r.regime) << ',' << r.n_p << ',' << r.m << ','
           << r.mses.size() + r.failures << ',' << r.failures << ',' << fmt(r.mse_mean) << ',' << fmt(r.mse_sd)
           << ',';
        for (std::size_t i = 0; i < r.mses.size(); ++i) os << (i ? ";" : "") << fmt(r.mses[i]);
        os << ',' << std::fixed << std::setprecision(3) << r.wall_time << std::defaultfloat << '\n';
    }
}

void write_replications_csv(std::ostream& os, const std::vector<ReplicationRecord>& records) {
    os << "replication,seed,method,mse,clip_level,epochs,error,wall_time\n";
    for (const auto& r : records) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << r.replication << ',' << r.seed << ',' << to_string(r.method) << ',' << (r.ok() ? fmt(r.mse) : "NaN")
           << ',' << (r.clip_level ? fmt(*r.clip_level) : "none") << ',' << r.epochs << ',' << err << ','
           << std::fixed << std::setprecision(3) << r.wall_time << std::defaultfloat << '\n';
    }
}

std::string experiment_manifest(const ExperimentConfig& cfg) {
    const auto& s = cfg.scenario;
    nlohmann::json j;
    j["version"] = kVersion;
    j["master_seed"] = s.seed;
    j["scenario"] = {{"case", to_string(s.sim_case)},
                     {"regime", to_string(s.regime)},
                     {"d", s.dim()},
                     {"n_p", s.n_p},
                     {"n_q", s.n_q},
                     {"m", s.m},
                     {"copula",
                      {{"mu_p", s.copula.mu_p}, {"var_p", s.copula.var_p}, {"mu_q", s.copula.mu_q},
                       {"var_q", s.copula.var_q}}},
                     {"noise_sd", s.noise_sd},
                     {"lambda_sd", s.lambda_sd},
                     {"series_terms", s.series_terms}};
    std::vector<std::string> methods;
    for (auto m : cfg.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["replications"] = cfg.replications;
    j["eval_n_q"] = cfg.eval_n_q;
    j["validation_subjects"] = ceil_fraction(s.n_p, 0.2);
    j["target_validation_subjects"] = ceil_fraction(s.n_q, 0.2);
    j["parallelism"] = cfg.parallelism;
    std::vector<std::uint64_t> seeds;
    for (std::size_t r = 0; r < cfg.replications; ++r) seeds.push_back(replication_seed(s.seed, r));
    j["replication_seeds"] = seeds;
    j["regression"] = {{"hidden", cfg.regression.hidden}, {"train", train_json(cfg.regression.train)}};
    j["ratio"] = {{"hidden", cfg.ratio.hidden}, {"train", train_json(cfg.ratio.train)}};
    j["kre_clip"] = cfg.kre_clip.describe(s.regime);
    j["ure_clip"] = cfg.ure_clip.describe(s.regime);
    j["split_fraction"] = 0.5;
    return j.dump(2);
}

std::string scenario_manifest(const ScenarioConfig& s) {
    std::ostringstream os;
    os << "version=" << kVersion << " case=" << to_string(s.sim_case) << " regime=" << to_string(s.regime)
       << " d=" << s.dim() << " n_p=" << s.n_p << " n_q=" << s.n_q << " m=" << s.m << " mu_p=" << fmt(s.copula.mu_p)
       << " var_p=" << fmt(s.copula.var_p) << " mu_q=" << fmt(s.copula.mu_q) << " var_q=" << fmt(s.copula.var_q)
       << " noise_sd=" << fmt(s.noise_sd) << " lambda_sd=" << fmt(s.lambda_sd) << " series_terms=" << s.series_terms
       << " seed=" << s.seed;
    return os.str();
}

std::vector<BenchRow> approx_benchmark(const std::vector<BenchFunction>& functions, const std::vector<double>& zetas,
                                       const std::vector<int>& resolutions, std::size_t points, std::uint64_t seed) {
    if (points == 0) throw ConfigError("approx_benchmark needs at least one point");
    std::vector<BenchRow> rows;
    for (std::size_t fi = 0; fi < functions.size(); ++fi) {
        const auto& f = functions[fi];
        const int d = f.ridge.dim();
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(fi)});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::MatrixXd pts(d, static_cast<Eigen::Index>(points));
        for (Eigen::Index j = 0; j < pts.cols(); ++j)
            for (int l = 0; l < d; ++l) pts(l, j) = u(rng);
        for (double zeta : zetas) {
            HolderSpec spec = HolderSpec::from_smoothness(zeta, 1.0);
            spec.B = f.ridge.holder_constant(spec.t);
            for (int N : resolutions) {
                const auto approx = build_approximant(f.ridge.oracle(), d, spec, N);
                double sup = 0.0;
                for (Eigen::Index j = 0; j < pts.cols(); ++j) {
                    const Eigen::VectorXd x = pts.col(j);
                    const std::span<const double> xs(x.data(), static_cast<std::size_t>(d));
                    sup = std::max(sup, std::abs(approx.evaluate(xs) - f.ridge.value(xs)));
                }
                rows.push_back(BenchRow{f.name, d, zeta, spec.t, spec.B, N, sup, error_certificate(spec, d, N)});
            }
        }
    }
    return rows;
}

double loglog_slope(const std::vector<BenchRow>& rows) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
        if (r.sup_error > 0.0) pts.emplace_back(std::log(static_cast<double>(r.N)), std::log(r.sup_error));
    if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    return sxy / sxx;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
    os << "function,d,zeta,t,B,N,sup_error,certificate\n";
    for (const auto& r : rows)
        os << r.function << ',' << r.d << ',' << fmt(r.zeta) << ',' << r.t << ',' << fmt(r.B) << ',' << r.N << ','
           << fmt(r.sup_error) << ',' << fmt(r.certificate) << '\n';
}

std::vector<BenchFunction> default_bench_functions() {
    return {
        {"sine_d1", SineRidge{{1.0}, 2.0, 0.3, 1.0}},
        {"sine_d2", SineRidge{{0.7, 0.4}, 2.0, 0.1, 1.0}},
        {"cosine_d3", SineRidge{{0.5, 0.3, 0.2}, 2.5, 1.5707963267948966, 1.0}},
    };
}

}  // namespace repshift
