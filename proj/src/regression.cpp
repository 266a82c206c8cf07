#include "repshift/regression.hpp"

#include "repshift/errors.hpp"
#include "repshift/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace repshift {

std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::ure: return "ure";
        case EstimatorKind::kre: return "kre";
        case EstimatorKind::ne: return "ne";
    }
    return "?";
}

EstimatorKind parse_estimator_kind(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "URE") return EstimatorKind::ure;
    if (u == "KRE") return EstimatorKind::kre;
    if (u == "NE") return EstimatorKind::ne;
    throw ConfigError("unknown estimator '" + s + "' (expected ne, kre or ure)");
}

std::pair<RepeatedDataset, RepeatedDataset> split_source(const RepeatedDataset& data, double fraction,
                                                         std::uint64_t seed, SplitRecord* record) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split fraction must lie in (0, 1)");
    const std::size_t n = data.num_subjects();
    const auto n1 = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (n1 == 0 || n1 == n)
        throw ContractError("split of " + std::to_string(n) + " subjects at fraction " + std::to_string(fraction) +
                            " leaves an empty part");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, {stream::split});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n1));
    std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(n1), order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    auto out = std::make_pair(data.subset(first), data.subset(second));
    if (record) *record = SplitRecord{seed, std::move(first), std::move(second)};
    return out;
}

double weighted_erm_loss(const BatchFunction& f, const RepeatedDataset& data, const RatioModel& ratio) {
    if (!data.has_responses()) throw ContractError("weighted loss needs responses");
    const Eigen::MatrixXd x = data.covariates();
    const Eigen::VectorXd y = data.responses();
    const Eigen::VectorXd w = ratio.evaluate_batch(x);
    const Eigen::VectorXd fx = f(x);
    return (w.array() * (y - fx).array().square()).sum() / static_cast<double>(x.cols());
}

double weighted_erm_loss(const MlpNetwork& f, const RepeatedDataset& data, const RatioModel& ratio) {
    return weighted_erm_loss([&](const Eigen::MatrixXd& x) { return f.forward_batch(x); }, data, ratio);
}

double predict(const FittedRegression& model, std::span<const double> x) { return model.predict(x); }

namespace {

void require_responses(const RepeatedDataset& d, const char* what) {
    if (!d.has_responses()) throw ContractError(std::string(what) + " has no responses");
    d.check_unit_cube();
}

MlpNetwork init_regression_net(int d, const RegressionOptions& options) {
    std::vector<int> dims{d};
    dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
    dims.push_back(1);
    return MlpNetwork::he_initialized(dims, options.output, derive_seed(options.train.seed, {stream::init}));
}

WeightedSquaredLossData weighted_data(const RepeatedDataset& d, const RatioModel& ratio) {
    Eigen::MatrixXd x = d.covariates();
    Eigen::VectorXd w = ratio.evaluate_batch(x);
    return WeightedSquaredLossData{std::move(x), d.responses(), std::move(w)};
}

FittedRegression fit_weighted(const RepeatedDataset& source, const RatioModel& ratio,
                              const RegressionOptions& options, const RepeatedDataset* validation,
                              EstimatorKind kind) {
    WeightedSquaredLossData train_data = weighted_data(source, ratio);
    std::optional<WeightedSquaredLossData> val_data;
    if (validation) {
        require_responses(*validation, "validation set");
        val_data = weighted_data(*validation, ratio);
    }
    const double mean_w = train_data.w.size() > 0 ? train_data.w.mean() : 0.0;
    if (options.normalize_weights && mean_w > 0.0) {
        train_data.w /= mean_w;
        if (val_data) val_data->w /= mean_w;
    }
    const LossData data = std::move(train_data);
    std::optional<LossData> val;
    if (val_data) val = std::move(*val_data);
    FittedRegression out;
    out.kind = kind;
    out.ratio = ratio;
    out.net = train(init_regression_net(source.dim(), options), data, options.train, val ? &*val : nullptr,
                    &out.report);
    return out;
}

}  // namespace

FittedRegression fit_naive(const RepeatedDataset& source, const RegressionOptions& options,
                           const RepeatedDataset* validation) {
    require_responses(source, "source data");
    const LossData data = SquaredLossData{source.covariates(), source.responses()};
    std::optional<LossData> val;
    if (validation) {
        require_responses(*validation, "validation set");
        val = SquaredLossData{validation->covariates(), validation->responses()};
    }
    FittedRegression out;
    out.kind = EstimatorKind::ne;
    out.net = train(init_regression_net(source.dim(), options), data, options.train, val ? &*val : nullptr,
                    &out.report);
    return out;
}

FittedRegression fit_kre(const RepeatedDataset& source, const RatioModel& ratio, const RegressionOptions& options,
                         const RepeatedDataset* validation) {
    require_responses(source, "source data");
    return fit_weighted(source, ratio, options, validation, EstimatorKind::kre);
}

FittedRegression fit_ure(const RepeatedDataset& source, const RepeatedDataset& target_cov,
                         const RegressionOptions& options, const RatioFitOptions& ratio_options,
                         std::uint64_t split_seed, const RepeatedDataset* validation,
                         const LsifLossData* ratio_validation, double split_fraction) {
    require_responses(source, "source data");
    SplitRecord split;
    auto [regression_half, ratio_half] = split_source(source, split_fraction, split_seed, &split);
    RatioFitResult ratio = fit_ratio(ratio_half, target_cov, ratio_options, ratio_validation);
    FittedRegression out = fit_weighted(regression_half, ratio.model, options, validation, EstimatorKind::ure);
    out.split = std::move(split);
    out.ratio_report = ratio.report;
    return out;
}

void FittedRegression::save(const std::string& prefix) const {
    net.save(prefix + ".net");
    std::ofstream meta(prefix + ".meta");
    if (!meta) throw std::runtime_error("cannot open " + prefix + ".meta for writing");
    meta << "estimator: " << to_string(kind) << '\n';
    meta << "network: " << std::filesystem::path(prefix + ".net").filename().string() << '\n';
    if (ratio) {
        ratio->save(prefix + ".ratio");
        meta << "ratio: " << std::filesystem::path(prefix + ".ratio").filename().string() << '\n';
    } else {
        meta << "ratio: none\n";
    }
    if (split) {
        meta << "split_seed: " << split->seed << '\n';
        meta << "split_first:";
        for (auto i : split->first) meta << ' ' << i;
        meta << "\nsplit_second:";
        for (auto i : split->second) meta << ' ' << i;
        meta << '\n';
    } else {
        meta << "split_seed: none\n";
    }
    meta << "epochs_run: " << report.epochs_run << '\n';
    meta << "best_epoch: " << report.best_epoch << '\n';
}

FittedRegression FittedRegression::load(const std::string& prefix) {
    FittedRegression out;
    out.net = MlpNetwork::load(prefix + ".net");
    std::ifstream meta(prefix + ".meta");
    if (!meta) throw std::runtime_error("cannot open " + prefix + ".meta");
    std::string line;
    while (std::getline(meta, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        std::string value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(' '));
        std::istringstream vs(value);
        if (key == "estimator") {
            out.kind = parse_estimator_kind(value);
        } else if (key == "ratio" && value != "none") {
            out.ratio = RatioModel::load(prefix + ".ratio");
        } else if (key == "split_seed" && value != "none") {
            out.split.emplace();
            out.split->seed = std::stoull(value);
        } else if (key == "split_first" && out.split) {
            std::size_t i;
            while (vs >> i) out.split->first.push_back(i);
        } else if (key == "split_second" && out.split) {
            std::size_t i;
            while (vs >> i) out.split->second.push_back(i);
        } else if (key == "epochs_run") {
            vs >> out.report.epochs_run;
        } else if (key == "best_epoch") {
            vs >> out.report.best_epoch;
        }
    }
    return out;
}

}  // namespace repshift
