#include "repshift/simgen.hpp"

#include "repshift/errors.hpp"
#include "repshift/normal.hpp"
#include "repshift/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

namespace repshift {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::uint64_t role_label(DataRole r) { return static_cast<std::uint64_t>(r); }

// sqrt(3) (sin(k pi u) + cos(k pi u)) / k summed against one lambda column.
double series(const Eigen::MatrixXd& lambda, Eigen::Index col, double u) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
        const double kk = static_cast<double>(k + 2);
        const double a = kk * std::numbers::pi * u;
        s += lambda(k, col) * (std::sin(a) + std::cos(a)) / kk;
    }
    return std::numbers::sqrt3 * s;
}

}  // namespace

std::string to_string(SimCase c) { return c == SimCase::case1 ? "case1" : "case2"; }
std::string to_string(Regime r) { return r == Regime::bounded ? "bounded" : "unbounded"; }

SimCase parse_sim_case(const std::string& s) {
    const auto l = lower(s);
    if (l == "case1" || l == "1") return SimCase::case1;
    if (l == "case2" || l == "2") return SimCase::case2;
    throw ConfigError("unknown case '" + s + "'");
}

Regime parse_regime(const std::string& s) {
    const auto l = lower(s);
    if (l == "bounded") return Regime::bounded;
    if (l == "unbounded") return Regime::unbounded;
    throw ConfigError("unknown regime '" + s + "'");
}

CopulaParams default_copula(Regime r, int d) {
    if (r == Regime::bounded) return CopulaParams{0.0, 0.4, 0.5, 0.3, d};
    return CopulaParams{0.0, 0.3, 1.0, 0.5, d};
}

int case_dimension(SimCase c) { return c == SimCase::case1 ? 3 : 10; }

ScenarioConfig ScenarioConfig::make(SimCase c, Regime r) {
    ScenarioConfig cfg;
    cfg.sim_case = c;
    cfg.regime = r;
    cfg.copula = default_copula(r, case_dimension(c));
    return cfg;
}

void ScenarioConfig::validate() const {
    if (n_p < 1 || n_q < 1 || m < 1) throw ConfigError("n_p, n_q and m must be positive");
    if (copula.d != dim()) throw ConfigError("copula dimension does not match the case dimension");
    copula.validate();
    if (!(noise_sd >= 0.0) || !(lambda_sd >= 0.0)) throw ConfigError("standard deviations must be nonnegative");
    if (series_terms < 1) throw ConfigError("series_terms must be positive");
}

RepeatedDataset gen_covariates(Domain domain, const ScenarioConfig& cfg, std::size_t n, std::size_t m,
                               DataRole role) {
    cfg.validate();
    if (n < 1 || m < 1) throw ConfigError("n and m must be positive");
    const int d = cfg.dim();
    const double mu = domain == Domain::source ? cfg.copula.mu_p : cfg.copula.mu_q;
    const double sd = std::sqrt(domain == Domain::source ? cfg.copula.var_p : cfg.copula.var_q);
    RepeatedDataset out(d);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(cfg.seed, {role_label(role), stream::covariates, i});
        std::normal_distribution<double> z(mu, sd);
        Subject s;
        s.id = std::to_string(i);
        s.x.resize(d, static_cast<Eigen::Index>(m));
        for (Eigen::Index j = 0; j < s.x.cols(); ++j)
            for (Eigen::Index l = 0; l < d; ++l) s.x(l, j) = normal_cdf(z(rng));
        out.add(std::move(s));
    }
    return out;
}

double f0_case1(std::span<const double> x) {
    if (x.size() != 3) throw ShapeError("case-1 regression function needs d = 3");
    const double d = 3.0;
    double s = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) s += static_cast<double>(l + 1) * x[l];
    return std::sin(12.0 * std::numbers::pi * s / (d * (d + 1.0)));
}

double f0_case2(std::span<const double> x) {
    if (x.size() != 10) throw ShapeError("case-2 regression function needs d = 10");
    double a = 0.0, b = 0.0;
    for (std::size_t l = 0; l < 5; ++l) a += x[l];
    for (std::size_t l = 5; l < 10; ++l) b += x[l];
    return std::sin(2.0 * std::numbers::pi * a / 5.0) * std::cos(2.0 * std::numbers::pi * b / 5.0);
}

PointFunction oracle_f0(SimCase c) {
    if (c == SimCase::case1) return f0_case1;
    return f0_case2;
}

double random_effect(SimCase c, const Eigen::MatrixXd& lambda, std::span<const double> x) {
    if (c == SimCase::case1) {
        if (lambda.cols() != static_cast<Eigen::Index>(x.size())) throw ShapeError("lambda must be K x d");
        double s = 0.0;
        for (std::size_t l = 0; l < x.size(); ++l) s += series(lambda, static_cast<Eigen::Index>(l), x[l]);
        return s / std::sqrt(static_cast<double>(x.size()));
    }
    if (x.size() != 10 || lambda.cols() != 2) throw ShapeError("case 2 needs d = 10 and lambda K x 2");
    double a = 0.0, b = 0.0;
    for (std::size_t l = 0; l < 5; ++l) a += x[l];
    for (std::size_t l = 5; l < 10; ++l) b += x[l];
    return (series(lambda, 0, a / 5.0) + series(lambda, 1, b / 5.0)) / std::numbers::sqrt2;
}

Eigen::MatrixXd draw_lambda(const ScenarioConfig& cfg, DataRole role, std::size_t subject) {
    const Eigen::Index cols = cfg.sim_case == SimCase::case1 ? cfg.dim() : 2;
    Eigen::MatrixXd lambda(cfg.series_terms, cols);
    Rng rng = make_rng(cfg.seed, {role_label(role), stream::random_effect, subject});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index k = 0; k < lambda.rows(); ++k)
        for (Eigen::Index l = 0; l < cols; ++l) lambda(k, l) = cfg.lambda_sd * dist(rng);
    return lambda;
}

RepeatedDataset gen_responses(const RepeatedDataset& cov, const ScenarioConfig& cfg, DataRole role) {
    cfg.validate();
    if (cov.dim() != cfg.dim()) throw ShapeError("covariates do not match the case dimension");
    const auto f0 = oracle_f0(cfg.sim_case);
    RepeatedDataset out(cov.dim());
    for (std::size_t i = 0; i < cov.num_subjects(); ++i) {
        Subject s = cov.subject(i);
        const Eigen::MatrixXd lambda = draw_lambda(cfg, role, i);
        Rng rng = make_rng(cfg.seed, {role_label(role), stream::noise, i});
        std::normal_distribution<double> eps(0.0, 1.0);
        s.y.resize(s.x.cols());
        for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
            const Eigen::VectorXd xj = s.x.col(j);
            const std::span<const double> pt(xj.data(), static_cast<std::size_t>(xj.size()));
            const double fi = cfg.lambda_sd > 0.0 ? random_effect(cfg.sim_case, lambda, pt) : 0.0;
            s.y[j] = f0(pt) + fi + cfg.noise_sd * eps(rng);
        }
        out.add(std::move(s));
    }
    return out;
}

}  // namespace repshift
