#pragma once

#include "repshift/dataset.hpp"
#include "repshift/density_ratio.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace repshift {

enum class SimCase { case1, case2 };
enum class Regime { bounded, unbounded };

std::string to_string(SimCase c);
std::string to_string(Regime r);
SimCase parse_sim_case(const std::string& s);
Regime parse_regime(const std::string& s);

/// Default copula for a regime: bounded (0, 0.4, 0.5, 0.3),
/// unbounded (0, 0.3, 1, 0.5) as (mu_p, var_p, mu_q, var_q).
CopulaParams default_copula(Regime r, int d);

int case_dimension(SimCase c);

struct ScenarioConfig {
    SimCase sim_case = SimCase::case1;
    Regime regime = Regime::bounded;
    std::size_t n_p = 500;
    std::size_t n_q = 2000;
    std::size_t m = 25;
    CopulaParams copula = default_copula(Regime::bounded, 3);
    double noise_sd = 0.01;
    double lambda_sd = 0.1;
    int series_terms = 50;
    std::uint64_t seed = 0;

    /// Scenario with the default copula for (c, r).
    static ScenarioConfig make(SimCase c, Regime r);
    int dim() const { return case_dimension(sim_case); }
    void validate() const;
};

enum class Domain { source, target };

/// Role of a generated dataset; each role draws from its own RNG streams.
enum class DataRole : std::uint64_t {
    source = 1,
    target = 2,
    validation = 3,
    target_validation = 4,
    evaluation = 5,
};

/// X_ij = Phi(Z_ij), Z_ij ~ N(mu 1_d, var I_d) with (mu, var) from the
/// domain's copula parameters. Subject i draws from its own stream.
RepeatedDataset gen_covariates(Domain domain, const ScenarioConfig& cfg, std::size_t n, std::size_t m,
                               DataRole role);

/// sin(12 pi sum_l l x_l / (d (d+1))) with d = 3.
double f0_case1(std::span<const double> x);
/// sin(2 pi (x_1+..+x_5)/5) cos(2 pi (x_6+..+x_10)/5).
double f0_case2(std::span<const double> x);

using PointFunction = std::function<double(std::span<const double>)>;
PointFunction oracle_f0(SimCase c);

/// Subject-level random series truncated at K terms (k = 2..K+1).
/// Case 1 coefficients are K x d, case 2 coefficients K x 2.
double random_effect(SimCase c, const Eigen::MatrixXd& lambda, std::span<const double> x);

/// y_ij = f0(x_ij) + f_i(x_ij) + eps_ij; lambda drawn once per subject,
/// eps per observation, both from streams keyed by (seed, role, subject).
RepeatedDataset gen_responses(const RepeatedDataset& cov, const ScenarioConfig& cfg, DataRole role);

/// The lambda matrix gen_responses uses for subject i of a role.
Eigen::MatrixXd draw_lambda(const ScenarioConfig& cfg, DataRole role, std::size_t subject);

}  // namespace repshift
