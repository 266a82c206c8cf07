#pragma once

#include "repshift/density_ratio.hpp"
#include "repshift/regression.hpp"
#include "repshift/simgen.hpp"
#include "repshift/simplex.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace repshift {

inline constexpr const char* kVersion = "0.1.0";

/// How a ratio is truncated before it weights the regression loss.
/// `automatic` leaves bounded-regime ratios unclipped and applies
/// `unbounded_policy` at `value` to unbounded-regime ratios.
enum class ClipMode { automatic, none, fixed, percentile };

std::string to_string(ClipMode m);
ClipMode parse_clip_mode(const std::string& s);

struct ClipSetting {
    ClipMode mode = ClipMode::automatic;
    double value = 0.95;  // level for fixed, quantile for percentile
    ClipPolicy unbounded_policy = ClipPolicy::percentile;

    /// Percentile 0.95 after the fact: the default for a known ratio.
    static ClipSetting known_ratio() { return {}; }
    /// Fixed level 2 inside ratio training: the default for a fitted ratio,
    /// whose unclipped fit degenerates when the ratio is unbounded.
    static ClipSetting fitted_ratio() { return {ClipMode::automatic, 2.0, ClipPolicy::fixed}; }

    /// Resolved (policy, value) for a regime; policy none means no clip.
    std::pair<ClipPolicy, double> resolve(Regime r) const;
    std::string describe(Regime r) const;
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    std::vector<EstimatorKind> methods = {EstimatorKind::ne, EstimatorKind::kre, EstimatorKind::ure};
    std::size_t replications = 10;
    std::size_t eval_n_q = 2000;
    std::string output_dir;  // empty: nothing is written
    std::size_t parallelism = 1;
    RegressionOptions regression;
    RatioFitOptions ratio;
    ClipSetting kre_clip = ClipSetting::known_ratio();
    ClipSetting ure_clip = ClipSetting::fitted_ratio();

    void validate() const;
};

/// Everything one replication needs, generated from its own seed.
struct ReplicationData {
    std::uint64_t seed = 0;
    ScenarioConfig scenario;
    RepeatedDataset source;             // n_p subjects with responses
    RepeatedDataset validation;         // ceil(0.2 n_p) source subjects
    RepeatedDataset target;             // n_q target covariates
    RepeatedDataset target_validation;  // ceil(0.2 n_q) target covariates
    RepeatedDataset evaluation;         // eval_n_q target covariates
};

std::uint64_t replication_seed(std::uint64_t master, std::size_t r);
ReplicationData make_replication(const ExperimentConfig& cfg, std::size_t r);

struct ReplicationRecord {
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    EstimatorKind method = EstimatorKind::ne;
    double mse = 0.0;  // NaN when the fit failed
    std::optional<double> clip_level;
    std::size_t epochs = 0;
    std::string error;
    double wall_time = 0.0;

    bool ok() const { return error.empty(); }
};

struct ResultRow {
    EstimatorKind method = EstimatorKind::ne;
    Regime regime = Regime::bounded;
    std::size_t n_p = 0;
    std::size_t m = 0;
    double mse_mean = 0.0;
    double mse_sd = 0.0;
    std::vector<double> mses;  // successful replications, in replication order
    std::size_t failures = 0;
    double wall_time = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<ReplicationRecord> records;
    std::size_t failures = 0;
    std::size_t divergences = 0;
};

/// sum (f_hat(x) - f0(x))^2 over all target observations / their count.
double prediction_mse(const BatchFunction& model, const RepeatedDataset& target_cov, const PointFunction& f0);
double prediction_mse(const FittedRegression& model, const RepeatedDataset& target_cov, const PointFunction& f0);

/// Fits one method on one replication and scores it on the evaluation set.
ReplicationRecord run_replication(const ExperimentConfig& cfg, const ReplicationData& data, EstimatorKind method);

/// Arithmetic mean and sample standard deviation (0 for fewer than two).
std::pair<double, double> mean_sd(const std::vector<double>& v);

/// Runs every replication (in parallel up to cfg.parallelism), aggregates
/// per method and, when output_dir is set, writes results.csv,
/// replications.csv and manifest.json there. Failed fits are recorded and
/// excluded from the aggregates.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_replications_csv(std::ostream& os, const std::vector<ReplicationRecord>& records);
/// JSON manifest with the full configuration, seeds, series length, clip
/// policies and library version.
std::string experiment_manifest(const ExperimentConfig& cfg);
/// Short key=value summary of a scenario, used as a dataset CSV manifest line.
std::string scenario_manifest(const ScenarioConfig& cfg);

struct BenchFunction {
    std::string name;
    SineRidge ridge;
};

struct BenchRow {
    std::string function;
    int d = 0;
    double zeta = 0.0;
    int t = 0;
    double B = 0.0;
    int N = 0;
    double sup_error = 0.0;
    double certificate = 0.0;
};

/// Sup error of the simplicial approximant over `points` uniform random
/// points against its certificate, for every function, smoothness and
/// resolution given. Holder constants come from SineRidge::holder_constant.
std::vector<BenchRow> approx_benchmark(const std::vector<BenchFunction>& functions, const std::vector<double>& zetas,
                                       const std::vector<int>& resolutions, std::size_t points = 10000,
                                       std::uint64_t seed = 0);

/// Least-squares slope of log(sup_error) against log(N) for one
/// (function, zeta) group.
double loglog_slope(const std::vector<BenchRow>& rows);

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

/// Default benchmark family: sine ridges in d = 1, 2, 3.
std::vector<BenchFunction> default_bench_functions();

}  // namespace repshift
