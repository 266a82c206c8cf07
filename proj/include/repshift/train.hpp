#pragma once

#include "repshift/loss.hpp"
#include "repshift/mlp.hpp"

#include <cstdint>
#include <variant>

namespace repshift {

struct AdamConfig {
    double learning_rate = 1e-3;
    double decay_factor = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct NesterovConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double decay_factor = 0.5;
};

using OptimizerConfig = std::variant<AdamConfig, NesterovConfig>;

struct TrainConfig {
    OptimizerConfig optimizer = NesterovConfig{};
    std::size_t max_epochs = 200;
    std::size_t batch_size = 128;
    std::size_t early_stop_patience = 20;
    /// Rescale minibatch gradients whose Euclidean norm exceeds this; 0 disables.
    double max_grad_norm = 0.0;
    /// Weighted squared loss only: draw each minibatch with replacement,
    /// row i with probability w_i / sum w, and give every drawn row the mean
    /// weight. Same expected gradient as uniform batches, lower variance
    /// when the weights are heavy-tailed.
    bool weighted_sampling = false;
    std::uint64_t seed = 0;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Adam at lr 1e-3, batch 128, the ratio-network recipe.
TrainConfig ratio_train_config(std::uint64_t seed = 0);
/// Nesterov SGD at lr 0.01, momentum 0.9, batch 32, patience 50, gradient
/// norm capped at 10, the regression recipe.
TrainConfig regression_train_config(std::uint64_t seed = 0);

struct TrainReport {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;     // 0 means the initial parameters were kept
    double best_loss = 0.0;         // validation loss if given, else training loss
    double initial_loss = 0.0;
    double final_learning_rate = 0.0;
};

/// Minibatch training. Returns the parameters with the lowest monitored
/// loss (validation when given, full training loss otherwise). The learning
/// rate is multiplied by decay_factor after every patience/2 epochs without
/// improvement; training stops after `early_stop_patience` such epochs.
/// Throws DivergedTraining on a non-finite loss.
MlpNetwork train(MlpNetwork net, const LossData& data, const TrainConfig& cfg,
                 const LossData* validation = nullptr, TrainReport* report = nullptr);

}  // namespace repshift
