#include <doctest.h>

#include "repshift/errors.hpp"
#include "repshift/harness.hpp"
#include "repshift/regression.hpp"
#include "repshift/simgen.hpp"

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <set>

using namespace repshift;

namespace {

RepeatedDataset small_panel(std::size_t n, std::size_t m, std::uint64_t seed, Regime regime = Regime::bounded) {
    auto cfg = ScenarioConfig::make(SimCase::case1, regime);
    cfg.seed = seed;
    return gen_responses(gen_covariates(Domain::source, cfg, n, m, DataRole::source), cfg, DataRole::source);
}

RegressionOptions quick_options(std::size_t epochs) {
    RegressionOptions opt;
    opt.hidden = {16, 16};
    opt.train.max_epochs = epochs;
    opt.train.seed = 7;
    return opt;
}

std::set<std::string> ids(const RepeatedDataset& d) {
    std::set<std::string> out;
    for (const auto& s : d.subjects()) out.insert(s.id);
    return out;
}

}  // namespace

TEST_CASE("estimator names") {
    CHECK(parse_estimator_kind("URE") == EstimatorKind::ure);
    CHECK(parse_estimator_kind("kre") == EstimatorKind::kre);
    CHECK(to_string(EstimatorKind::ne) == "ne");
    CHECK_THROWS_AS(parse_estimator_kind("xyz"), ConfigError);
}

TEST_CASE("subject-level split") {
    const auto data = small_panel(10, 3, 1);
    SplitRecord rec;
    const auto [a, b] = split_source(data, 0.5, 42, &rec);
    CHECK(a.num_subjects() == 5);
    CHECK(b.num_subjects() == 5);
    std::set<std::string> all = ids(a);
    for (const auto& id : ids(b)) CHECK(all.insert(id).second);
    CHECK(all == ids(data));
    CHECK(rec.first.size() == 5);

    SplitRecord again;
    split_source(data, 0.5, 42, &again);
    CHECK(again.first == rec.first);
    CHECK(again.second == rec.second);

    const auto [c, e] = split_source(small_panel(3, 2, 1), 0.5, 1);
    CHECK(c.num_subjects() == 1);
    CHECK(e.num_subjects() == 2);

    CHECK_THROWS_AS(split_source(small_panel(1, 2, 1), 0.5, 1), ContractError);
    CHECK_THROWS_AS(split_source(data, 0.05, 1), ContractError);
    CHECK_THROWS_AS(split_source(data, 1.0, 1), ContractError);
}

TEST_CASE("weighted empirical loss") {
    MlpNetwork lin({1, 1});
    lin.weight(0)(0, 0) = 2.0;  // ratio 2x: 2 at x = 1, 0 at x = 0
    const auto ratio = RatioModel::fitted(lin);
    RepeatedDataset data(1);
    Eigen::MatrixXd x(1, 2);
    x << 1.0, 0.0;
    data.add(Subject{"a", x, Eigen::Vector2d(1.0, 7.0)});
    const BatchFunction zero = [](const Eigen::MatrixXd& p) { return Eigen::VectorXd::Zero(p.cols()); };
    CHECK(weighted_erm_loss(zero, data, ratio) == 1.0);

    const BatchFunction exact = [](const Eigen::MatrixXd& p) {
        Eigen::VectorXd v(p.cols());
        for (Eigen::Index j = 0; j < p.cols(); ++j) v[j] = p(0, j) == 1.0 ? 1.0 : 7.0;
        return v;
    };
    CHECK(weighted_erm_loss(exact, data, RatioModel::constant(3.0)) == 0.0);

    const auto panel = small_panel(5, 4, 2);
    const auto net = MlpNetwork::he_initialized({3, 4, 1}, OutputActivation::identity(), 1);
    const double plain = weighted_erm_loss(net, panel, RatioModel::constant(1.0));
    const Eigen::VectorXd r = panel.responses() - net.forward_batch(panel.covariates());
    CHECK(plain == doctest::Approx(r.squaredNorm() / r.size()).epsilon(1e-14));
    CHECK(weighted_erm_loss(net, panel, RatioModel::constant(2.5)) == doctest::Approx(2.5 * plain).epsilon(1e-14));

    RepeatedDataset bare(1);
    bare.add(Subject{"b", x, {}});
    CHECK_THROWS_AS(weighted_erm_loss(zero, bare, ratio), ContractError);
}

TEST_CASE("known ratio of one reproduces the naive fit") {
    const auto data = small_panel(20, 5, 3);
    const auto opt = quick_options(8);
    const auto ne = fit_naive(data, opt);
    const auto kre = fit_kre(data, RatioModel::constant(1.0), opt);
    CHECK(kre.net == ne.net);
    CHECK(ne.kind == EstimatorKind::ne);
    CHECK_FALSE(ne.ratio.has_value());
    CHECK(kre.kind == EstimatorKind::kre);
    REQUIRE(kre.ratio.has_value());
    CHECK(kre.ratio->is_exact());
}

TEST_CASE("constant responses are learned") {
    auto data = small_panel(50, 4, 4);
    RepeatedDataset flat(3);
    for (auto s : data.subjects()) {
        s.y.setConstant(0.3);
        flat.add(s);
    }
    const auto fit = fit_naive(flat, quick_options(200));
    const auto grid = gen_covariates(Domain::target, ScenarioConfig::make(SimCase::case1, Regime::bounded), 20, 10,
                                     DataRole::evaluation)
                          .covariates();
    const Eigen::ArrayXd train_err = fit.predict_batch(flat.covariates()).array() - 0.3;
    CHECK(std::sqrt(train_err.square().mean()) < 1e-2);
    CHECK((fit.predict_batch(grid).array() - 0.3).abs().maxCoeff() < 5e-2);
}

TEST_CASE("clipped known ratio bounds every training weight") {
    const auto data = small_panel(20, 5, 5, Regime::unbounded);
    const auto exact = RatioModel::exact_copula(default_copula(Regime::unbounded, 3));
    const double xi = ratio_quantile(exact, data.covariates(), 0.9);
    const auto fit = fit_kre(data, exact.clipped(xi), quick_options(3));
    REQUIRE(fit.ratio.has_value());
    CHECK(fit.ratio->clip_level() == xi);
    CHECK(fit.ratio->evaluate_batch(data.covariates()).maxCoeff() <= xi);
}

TEST_CASE("two-subject source still splits one and one") {
    const auto data = small_panel(2, 6, 6);
    auto cfg = ScenarioConfig::make(SimCase::case1, Regime::bounded);
    const auto tgt = gen_covariates(Domain::target, cfg, 4, 6, DataRole::target);
    RatioFitOptions ropt;
    ropt.hidden = {8};
    ropt.train.max_epochs = 3;
    const auto fit = fit_ure(data, tgt, quick_options(3), ropt, 9);
    REQUIRE(fit.split.has_value());
    CHECK(fit.split->first.size() == 1);
    CHECK(fit.split->second.size() == 1);
    CHECK(fit.ratio_report.has_value());
    REQUIRE(fit.ratio.has_value());
    CHECK(fit.ratio->is_fitted());
}

TEST_CASE("no shift: estimated ratio does not wreck the fit") {
    auto cfg = ScenarioConfig::make(SimCase::case1, Regime::bounded);
    cfg.copula = CopulaParams{0.0, 0.4, 0.0, 0.4, 3};
    cfg.seed = 77;
    const auto src = gen_responses(gen_covariates(Domain::source, cfg, 200, 10, DataRole::source), cfg,
                                   DataRole::source);
    const auto val = gen_responses(gen_covariates(Domain::source, cfg, 40, 10, DataRole::validation), cfg,
                                   DataRole::validation);
    const auto tgt = gen_covariates(Domain::target, cfg, 200, 10, DataRole::target);
    const auto ev = gen_covariates(Domain::target, cfg, 200, 10, DataRole::evaluation);
    RegressionOptions opt;
    opt.hidden = {64, 64};
    opt.train.seed = 1;
    opt.train.max_epochs = 100;
    opt.train.early_stop_patience = 100;
    RatioFitOptions ropt;
    ropt.train.max_epochs = 50;
    const auto f0 = oracle_f0(SimCase::case1);
    const double ne = prediction_mse(fit_naive(src, opt, &val), ev, f0);
    const double ure = prediction_mse(fit_ure(src, tgt, opt, ropt, 3, &val), ev, f0);
    MESSAGE("NE " << ne << "  URE " << ure);
    CHECK(ure <= 2.0 * ne);
}

TEST_CASE("fitted models round-trip through prefix files") {
    const auto dir = std::filesystem::temp_directory_path() / "repshift_regression_test";
    std::filesystem::create_directories(dir);
    const auto data = small_panel(6, 3, 8);
    auto cfg = ScenarioConfig::make(SimCase::case1, Regime::bounded);
    const auto tgt = gen_covariates(Domain::target, cfg, 6, 3, DataRole::target);
    RatioFitOptions ropt;
    ropt.hidden = {4};
    ropt.train.max_epochs = 2;
    const auto fit = fit_ure(data, tgt, quick_options(2), ropt, 11);
    const std::string prefix = (dir / "ure").string();
    fit.save(prefix);
    const auto back = FittedRegression::load(prefix);
    CHECK(back.net == fit.net);
    CHECK(back.kind == EstimatorKind::ure);
    REQUIRE(back.split.has_value());
    CHECK(back.split->seed == 11);
    CHECK(back.split->first == fit.split->first);
    CHECK(back.split->second == fit.split->second);
    CHECK(back.report.epochs_run == fit.report.epochs_run);
    REQUIRE(back.ratio.has_value());
    const auto x = tgt.covariates();
    CHECK(back.ratio->evaluate_batch(x) == fit.ratio->evaluate_batch(x));
    const double p[] = {0.5, 0.5, 0.5};
    CHECK(predict(back, p) == fit.predict(p));
    const double bad[] = {0.5};
    CHECK_THROWS_AS(predict(back, bad), ShapeError);
    std::filesystem::remove_all(dir);
}
