#pragma once

#include "repshift/mlp.hpp"

#include <Eigen/Dense>

#include <variant>
#include <vector>

namespace repshift {

/// Mean squared error (1/n) sum (y - f(x))^2. Columns of x are samples.
struct SquaredLossData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

/// Ratio-weighted squared error (1/n) sum w (y - f(x))^2.
struct WeightedSquaredLossData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
};

/// Least-squares importance fitting risk
/// (1/(2 n_s)) sum v(x_s)^2 - (1/n_t) sum v(x_t).
struct LsifLossData {
    Eigen::MatrixXd source;
    Eigen::MatrixXd target;
};

using LossData = std::variant<SquaredLossData, WeightedSquaredLossData, LsifLossData>;

/// Number of samples that drive the epoch length (source side for LSIF).
Eigen::Index primary_count(const LossData& data);

void validate(const LossData& data, int input_dim);

double evaluate_loss(const MlpNetwork& net, const LossData& data);

/// Exact reverse-mode gradient of evaluate_loss w.r.t. net.parameters().
/// Returns the loss value; grad is resized to num_parameters().
double loss_gradient(const MlpNetwork& net, const LossData& data, Eigen::VectorXd& grad);

/// Restricts data to the given sample columns. For LSIF the two index
/// lists select source and target columns respectively.
LossData select(const LossData& data, const std::vector<Eigen::Index>& rows,
                const std::vector<Eigen::Index>& target_rows = {});

}  // namespace repshift
