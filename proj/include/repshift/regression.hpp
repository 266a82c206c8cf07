#pragma once

#include "repshift/dataset.hpp"
#include "repshift/density_ratio.hpp"
#include "repshift/mlp.hpp"
#include "repshift/train.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace repshift {

enum class EstimatorKind { ure, kre, ne };

std::string to_string(EstimatorKind k);
/// Accepts "ure", "kre", "ne" in any case.
EstimatorKind parse_estimator_kind(const std::string& s);

/// Which subjects went where when the source data was split.
struct SplitRecord {
    std::uint64_t seed = 0;
    std::vector<std::size_t> first;   // regression half
    std::vector<std::size_t> second;  // ratio half
};

/// Random subject-level split. The first part has floor(fraction * n)
/// subjects; throws ContractError when either part would be empty.
std::pair<RepeatedDataset, RepeatedDataset> split_source(const RepeatedDataset& data, double fraction,
                                                         std::uint64_t seed, SplitRecord* record = nullptr);

/// (1/N) sum_{ij} r(x_ij) (y_ij - f(x_ij))^2 over all observations.
double weighted_erm_loss(const BatchFunction& f, const RepeatedDataset& data, const RatioModel& ratio);
double weighted_erm_loss(const MlpNetwork& f, const RepeatedDataset& data, const RatioModel& ratio);

struct RegressionOptions {
    std::vector<int> hidden = {128, 128, 128};
    TrainConfig train = regression_train_config();
    OutputActivation output = OutputActivation::identity();
    /// Divide training (and validation) weights by their training mean.
    /// The minimizer is unchanged; the optimizer sees NE-sized gradients.
    bool normalize_weights = true;
};

struct FittedRegression {
    MlpNetwork net;
    EstimatorKind kind = EstimatorKind::ne;
    std::optional<RatioModel> ratio;
    std::optional<SplitRecord> split;
    TrainReport report;
    std::optional<TrainReport> ratio_report;

    double predict(std::span<const double> x) const { return net.forward(x); }
    Eigen::VectorXd predict_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const { return net.forward_batch(x); }

    /// Writes <prefix>.net, <prefix>.meta and, when a ratio was used,
    /// <prefix>.ratio.
    void save(const std::string& prefix) const;
    static FittedRegression load(const std::string& prefix);
};

double predict(const FittedRegression& model, std::span<const double> x);

/// Estimated-ratio estimator: split the source subjects in half, fit the
/// ratio on the second half against the target covariates, then minimize the
/// ratio-weighted squared loss on the first half.
/// `validation` (source law, with responses) drives regression model
/// selection with ratio-weighted loss; `ratio_validation` drives the ratio
/// stage.
FittedRegression fit_ure(const RepeatedDataset& source, const RepeatedDataset& target_cov,
                         const RegressionOptions& options, const RatioFitOptions& ratio_options,
                         std::uint64_t split_seed, const RepeatedDataset* validation = nullptr,
                         const LsifLossData* ratio_validation = nullptr, double split_fraction = 0.5);

/// Known-ratio estimator on all source data.
FittedRegression fit_kre(const RepeatedDataset& source, const RatioModel& ratio, const RegressionOptions& options,
                         const RepeatedDataset* validation = nullptr);

/// Unweighted estimator on all source data, ignoring the shift.
FittedRegression fit_naive(const RepeatedDataset& source, const RegressionOptions& options,
                           const RepeatedDataset* validation = nullptr);

}  // namespace repshift
