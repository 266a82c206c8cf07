#include <doctest.h>

#include "repshift/errors.hpp"
#include "repshift/harness.hpp"
#include "repshift/normal.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace repshift;

namespace {

// E[exp(i t Phi(Z))], Z ~ N(mu, var), trapezoid rule.
std::complex<double> copula_char_fn(double t, double mu, double var) {
    const double sd = std::sqrt(var);
    const int n = 200000;
    const double lo = mu - 12 * sd, hi = mu + 12 * sd, h = (hi - lo) / n;
    std::complex<double> s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = lo + i * h;
        const double dens = std::exp(-0.5 * (z - mu) * (z - mu) / var) / (sd * std::sqrt(2 * std::numbers::pi));
        s += (i == 0 || i == n ? 0.5 : 1.0) * std::polar(dens, t * normal_cdf(z));
    }
    return s * h;
}

// E_Q[f0^2] for the first design: f0 = sin(pi S) with S = x_1 + 2 x_2 + 3 x_3,
// so f0^2 = (1 - cos(2 pi S)) / 2 and E[exp(2 pi i S)] factorizes.
double case1_target_second_moment(const CopulaParams& c) {
    std::complex<double> prod = 1.0;
    for (int l = 1; l <= 3; ++l) prod *= copula_char_fn(2 * std::numbers::pi * l, c.mu_q, c.var_q);
    return 0.5 - 0.5 * prod.real();
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.scenario = ScenarioConfig::make(SimCase::case1, Regime::unbounded);
    cfg.scenario.n_p = 12;
    cfg.scenario.n_q = 12;
    cfg.scenario.m = 4;
    cfg.scenario.seed = 2024;
    cfg.replications = 3;
    cfg.eval_n_q = 20;
    cfg.regression.hidden = {8, 8};
    cfg.regression.train.max_epochs = 3;
    cfg.ratio.hidden = {8};
    cfg.ratio.train.max_epochs = 3;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string drop_last_column(const std::string& csv) {
    std::istringstream is(csv);
    std::string line, out;
    while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

}  // namespace

TEST_CASE("prediction mse against the regression function") {
    auto sc = ScenarioConfig::make(SimCase::case1, Regime::bounded);
    sc.seed = 31;
    const auto small = gen_covariates(Domain::target, sc, 10, 5, DataRole::evaluation);
    const auto f0 = oracle_f0(SimCase::case1);
    const BatchFunction exact = [&](const Eigen::MatrixXd& x) {
        Eigen::VectorXd v(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) v[j] = f0({x.col(j).data(), 3});
        return v;
    };
    CHECK(prediction_mse(exact, small, f0) == 0.0);
    const BatchFunction offset = [&](const Eigen::MatrixXd& x) { return (exact(x).array() + 0.1).matrix(); };
    CHECK(prediction_mse(offset, small, f0) == doctest::Approx(0.01).epsilon(1e-12));

    const auto big = gen_covariates(Domain::target, sc, 4000, 25, DataRole::evaluation);
    const BatchFunction zero = [](const Eigen::MatrixXd& x) { return Eigen::VectorXd::Zero(x.cols()); };
    const double mc = prediction_mse(zero, big, f0);
    const Eigen::MatrixXd x = big.covariates();
    Eigen::ArrayXd sq(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) sq[j] = std::pow(f0({x.col(j).data(), 3}), 2);
    const double se = std::sqrt((sq - sq.mean()).square().sum() / (sq.size() - 1) / sq.size());
    const double oracle = case1_target_second_moment(sc.copula);
    MESSAGE("E_Q[f0^2] quadrature " << oracle << ", Monte Carlo " << mc);
    CHECK(std::abs(mc - oracle) <= 3 * se);

    MlpNetwork net({2, 1});
    FittedRegression wrong;
    wrong.net = net;
    CHECK_THROWS_AS(prediction_mse(wrong, small, f0), ShapeError);
}

TEST_CASE("clip settings resolve per regime") {
    ClipSetting automatic;
    CHECK(automatic.resolve(Regime::bounded).first == ClipPolicy::none);
    const auto [policy, q] = automatic.resolve(Regime::unbounded);
    CHECK(policy == ClipPolicy::percentile);
    CHECK(q == automatic.value);
    const auto fitted = ClipSetting::fitted_ratio();
    CHECK(fitted.resolve(Regime::unbounded) == std::pair{ClipPolicy::fixed, 2.0});
    CHECK(fitted.resolve(Regime::bounded).first == ClipPolicy::none);
    CHECK(ExperimentConfig{}.ure_clip.describe(Regime::unbounded) == "fixed:2");
    CHECK(ClipSetting{ClipMode::fixed, 4.0}.resolve(Regime::bounded) == std::pair{ClipPolicy::fixed, 4.0});
    CHECK(parse_clip_mode("percentile") == ClipMode::percentile);
    CHECK(to_string(ClipMode::automatic) == "auto");
    CHECK_THROWS_AS(parse_clip_mode("sometimes"), ConfigError);
}

TEST_CASE("experiment config validation") {
    auto cfg = tiny_config();
    cfg.validate();
    cfg.methods.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.kre_clip = ClipSetting{ClipMode::percentile, 1.2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.regression.train.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("replication data") {
    const auto cfg = tiny_config();
    CHECK(replication_seed(1, 0) != replication_seed(1, 1));
    CHECK(replication_seed(1, 2) == replication_seed(1, 2));
    const auto d = make_replication(cfg, 1);
    CHECK(d.seed == replication_seed(cfg.scenario.seed, 1));
    CHECK(d.source.num_subjects() == 12);
    CHECK(d.validation.num_subjects() == 3);
    CHECK(d.target.num_subjects() == 12);
    CHECK(d.target_validation.num_subjects() == 3);
    CHECK(d.evaluation.num_subjects() == 20);
    CHECK(d.source.has_responses());
    CHECK_FALSE(d.target.has_responses());
}

TEST_CASE("single replication smoke run") {
    auto cfg = tiny_config();
    cfg.scenario.n_p = 20;
    cfg.scenario.m = 5;
    cfg.replications = 1;
    cfg.methods = {EstimatorKind::ne};
    const auto res = run_experiment(cfg);
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].method == EstimatorKind::ne);
    CHECK(res.rows[0].mses.size() == 1);
    CHECK(std::isfinite(res.rows[0].mse_mean));
    CHECK(res.rows[0].mse_sd == 0.0);
    CHECK(res.failures == 0);
}

TEST_CASE("experiments are deterministic, order-independent and self-consistent") {
    const auto dir = std::filesystem::temp_directory_path() / "repshift_harness_test";
    std::filesystem::remove_all(dir);
    auto cfg = tiny_config();
    cfg.output_dir = (dir / "a").string();
    const auto a = run_experiment(cfg);
    cfg.output_dir = (dir / "b").string();
    cfg.parallelism = 2;
    const auto b = run_experiment(cfg);

    REQUIRE(a.rows.size() == 3);
    for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(a.rows[k].mses == b.rows[k].mses);
    for (const char* f : {"results.csv", "replications.csv"})
        CHECK(drop_last_column(slurp(dir / "a" / f)) == drop_last_column(slurp(dir / "b" / f)));

    for (const auto& row : a.rows) {
        const auto [mean, sd] = mean_sd(row.mses);
        CHECK(std::abs(mean - row.mse_mean) <= 1e-12);
        CHECK(std::abs(sd - row.mse_sd) <= 1e-12);
    }

    // Replication 2 run on its own matches its record inside the full run.
    const auto data = make_replication(cfg, 2);
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        const auto alone = run_replication(cfg, data, cfg.methods[k]);
        const auto& rec = a.records[2 * cfg.methods.size() + k];
        CHECK(rec.replication == 2);
        CHECK(rec.method == cfg.methods[k]);
        CHECK(alone.mse == rec.mse);
    }

    const auto manifest = slurp(dir / "a" / "manifest.json");
    for (const char* key : {"\"version\"", "\"master_seed\"", "\"series_terms\"", "\"kre_clip\"", "\"ure_clip\"",
                            "\"replication_seeds\""})
        CHECK(manifest.find(key) != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("diverging fits are recorded, not fatal") {
    auto cfg = tiny_config();
    cfg.replications = 2;
    cfg.methods = {EstimatorKind::ne};
    cfg.regression.train.optimizer = NesterovConfig{1e6, 0.9, 0.5};
    cfg.regression.train.max_grad_norm = 0.0;
    cfg.regression.train.max_epochs = 200;
    cfg.regression.train.early_stop_patience = 1000;
    const auto res = run_experiment(cfg);
    CHECK(res.failures == 2);
    CHECK(res.divergences == 2);
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].failures == 2);
    CHECK(res.rows[0].mses.empty());
    for (const auto& r : res.records) {
        CHECK_FALSE(r.ok());
        CHECK(std::isnan(r.mse));
    }
}

TEST_CASE("csv writers") {
    ResultRow row;
    row.method = EstimatorKind::kre;
    row.regime = Regime::unbounded;
    row.n_p = 500;
    row.m = 25;
    row.mses = {0.5, 0.25};
    std::tie(row.mse_mean, row.mse_sd) = mean_sd(row.mses);
    std::ostringstream os;
    write_results_csv(os, {row});
    CHECK(os.str().rfind("method,regime,n_p,m,replications,failures,mse_mean,mse_sd,mses,wall_time\n"
                         "kre,unbounded,500,25,2,0,0.375,",
                         0) == 0);
    CHECK(os.str().find("0.5;0.25") != std::string::npos);
    CHECK(std::isnan(mean_sd({}).first));
}

TEST_CASE("approximation benchmark") {
    const BenchFunction flat{"flat", SineRidge{{1.0}, 0.0, 0.5, 1.0}};
    for (const auto& r : approx_benchmark({flat}, {1.0, 2.0}, {1, 4, 16}, 500))
        CHECK(r.sup_error <= 1e-14);

    const BenchFunction wave{"wave", SineRidge{{1.0}, 2.0 * std::numbers::pi, 0.0, 1.0}};
    const auto rows = approx_benchmark({wave}, {2.0}, {8, 16}, 10000, 3);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].t == 1);
    const double ratio = rows[0].sup_error / rows[1].sup_error;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.3);
    for (const auto& r : rows) CHECK(r.sup_error <= r.certificate);

    for (const auto& f : default_bench_functions()) {
        for (double zeta : {2.0, 3.0}) {
            const auto group = approx_benchmark({f}, {zeta}, {4, 8, 16, 32}, 2000, 1);
            for (const auto& r : group) CHECK(r.sup_error <= r.certificate);
            if (f.ridge.dim() <= 2) CHECK(std::abs(loglog_slope(group) + zeta) <= 0.25);
        }
    }

    std::ostringstream os;
    write_bench_csv(os, rows);
    CHECK(os.str().rfind("function,d,zeta,t,B,N,sup_error,certificate\nwave,1,2,1,", 0) == 0);
    CHECK_THROWS_AS(approx_benchmark({wave}, {2.0}, {4}, 0), ConfigError);
}
