#pragma once

#include "repshift/dataset.hpp"
#include "repshift/mlp.hpp"
#include "repshift/train.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace repshift {

enum class RatioRegime {
    bounded,               // var_p >= var_q
    finite_second_moment,  // var_q / 2 <= var_p < var_q
    heavy_tailed,          // var_p < var_q / 2
};

/// Gaussian copula on [0,1]^d: X = Phi(Z) with Z ~ N(mu 1_d, var I_d),
/// for source (p) and target (q).
struct CopulaParams {
    double mu_p = 0.0;
    double var_p = 1.0;
    double mu_q = 0.0;
    double var_q = 1.0;
    int d = 1;

    void validate() const;
    RatioRegime regime() const;
    /// sup_x r(x); infinite outside the bounded regime.
    double sup_ratio() const;

    bool operator==(const CopulaParams&) const = default;
};

/// Coordinates are clamped into [kBoundaryClamp, 1 - kBoundaryClamp]
/// before the normal quantile is taken.
inline constexpr double kBoundaryClamp = 1e-12;

/// q_X(x) / p_X(x) for the copula construction, evaluated in log space.
double exact_copula_ratio(const CopulaParams& p, std::span<const double> x);

struct ConstantRatio {
    double value = 1.0;
};

/// Nonnegative density-ratio function, optionally clipped at xi.
class RatioModel {
public:
    using Kind = std::variant<MlpNetwork, CopulaParams, ConstantRatio>;

    static RatioModel fitted(MlpNetwork net, std::optional<double> clip = std::nullopt);
    static RatioModel exact_copula(CopulaParams p, std::optional<double> clip = std::nullopt);
    static RatioModel constant(double c);

    const Kind& kind() const noexcept { return kind_; }
    std::optional<double> clip_level() const noexcept { return clip_; }
    bool is_fitted() const { return std::holds_alternative<MlpNetwork>(kind_); }
    bool is_exact() const { return !is_fitted(); }
    int dim() const;

    /// Same underlying function with clip level xi (replaces any existing clip).
    RatioModel clipped(double xi) const;
    RatioModel unclipped() const;

    double evaluate(std::span<const double> x) const;
    /// Columns of x are points.
    Eigen::VectorXd evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

    void save(std::ostream& os) const;
    static RatioModel load(std::istream& is);
    void save(const std::string& path) const;
    static RatioModel load(const std::string& path);

private:
    explicit RatioModel(Kind k, std::optional<double> clip);

    Kind kind_;
    std::optional<double> clip_;
};

/// (1/(2 n_s)) sum v_s^2 - (1/n_t) sum v_t from precomputed values.
double lsif_empirical_loss(const Eigen::VectorXd& v_source, const Eigen::VectorXd& v_target);

using BatchFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// LSIF risk of a function on two covariate batches (columns are points).
double lsif_empirical_loss(const BatchFunction& v, const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);

enum class ClipPolicy { none, fixed, percentile };

struct RatioFitOptions {
    std::vector<int> hidden = {64, 64};
    TrainConfig train = ratio_train_config();
    ClipPolicy clip_policy = ClipPolicy::none;
    /// Level for ClipPolicy::fixed; quantile in (0,1) for ClipPolicy::percentile.
    double clip_value = 0.95;
};

struct RatioFitResult {
    RatioModel model;
    TrainReport report;
    std::optional<double> clip_level;
};

/// Trains a softplus-output ReLU network by minimizing the LSIF risk over
/// the flattened observations of both datasets. With ClipPolicy::fixed the
/// clip layer min(., xi) is part of the trained network. With
/// ClipPolicy::percentile the unclipped fit is clipped afterwards at the
/// given quantile of its values on the source covariates.
RatioFitResult fit_ratio(const RepeatedDataset& source_cov, const RepeatedDataset& target_cov,
                         const RatioFitOptions& options, const LsifLossData* validation = nullptr);

/// Empirical mean of r(x)^(delta + 2) over the points (columns).
double moment_diagnostic(const RatioModel& model, const Eigen::MatrixXd& source_cov, double delta);
double moment_diagnostic(const RatioModel& model, const RepeatedDataset& source_cov, double delta);

/// Quantile q of the model values over the points (linear interpolation).
double ratio_quantile(const RatioModel& model, const Eigen::MatrixXd& points, double q);

}  // namespace repshift
