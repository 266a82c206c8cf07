#include "repshift/train.hpp"

#include "repshift/errors.hpp"
#include "repshift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace repshift {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double initial_rate(const OptimizerConfig& opt) {
    return std::visit([](const auto& o) { return o.learning_rate; }, opt);
}

double decay_of(const OptimizerConfig& opt) {
    return std::visit([](const auto& o) { return o.decay_factor; }, opt);
}

class Optimizer {
public:
    Optimizer(const OptimizerConfig& cfg, Eigen::Index n) : cfg_(cfg) {
        first_ = Eigen::VectorXd::Zero(n);
        if (std::holds_alternative<AdamConfig>(cfg_)) second_ = Eigen::VectorXd::Zero(n);
    }

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
        std::visit(overloaded{[&](const AdamConfig& a) {
                                  ++t_;
                                  first_ = a.beta1 * first_ + (1.0 - a.beta1) * grad;
                                  second_ = a.beta2 * second_ + (1.0 - a.beta2) * grad.cwiseAbs2();
                                  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
                                  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
                                  params.array() -= lr * (first_.array() / c1) /
                                                    ((second_.array() / c2).sqrt() + a.epsilon);
                              },
                              [&](const NesterovConfig& s) {
                                  first_ = s.momentum * first_ + grad;
                                  params -= lr * (grad + s.momentum * first_);
                              }},
                   cfg_);
    }

private:
    OptimizerConfig cfg_;
    Eigen::VectorXd first_;
    Eigen::VectorXd second_;
    std::size_t t_ = 0;
};

Eigen::Index secondary_count(const LossData& data) {
    if (const auto* l = std::get_if<LsifLossData>(&data)) return l->target.cols();
    return 0;
}

// Splits a shuffled index list into `parts` contiguous chunks whose sizes
// differ by at most one.
std::vector<std::vector<Eigen::Index>> chunk(const std::vector<Eigen::Index>& idx, std::size_t parts) {
    std::vector<std::vector<Eigen::Index>> out(parts);
    const std::size_t n = idx.size();
    std::size_t pos = 0;
    for (std::size_t p = 0; p < parts; ++p) {
        const std::size_t len = n / parts + (p < n % parts ? 1 : 0);
        out[p].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                      idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    std::visit(overloaded{[](const AdamConfig& a) {
                              if (!(a.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
                              if (!(a.decay_factor > 0.0 && a.decay_factor <= 1.0))
                                  throw ConfigError("decay factor must lie in (0, 1]");
                          },
                          [](const NesterovConfig& s) {
                              if (!(s.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
                              if (!(s.momentum >= 0.0 && s.momentum < 1.0))
                                  throw ConfigError("momentum must lie in [0, 1)");
                              if (!(s.decay_factor > 0.0 && s.decay_factor <= 1.0))
                                  throw ConfigError("decay factor must lie in (0, 1]");
                          }},
               optimizer);
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
    if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be nonnegative");
}

TrainConfig ratio_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.optimizer = AdamConfig{};
    cfg.seed = seed;
    return cfg;
}

TrainConfig regression_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.optimizer = NesterovConfig{};
    cfg.batch_size = 32;
    cfg.early_stop_patience = 50;
    cfg.max_grad_norm = 10.0;
    cfg.seed = seed;
    return cfg;
}

MlpNetwork train(MlpNetwork net, const LossData& data, const TrainConfig& cfg, const LossData* validation,
                 TrainReport* report) {
    cfg.validate();
    validate(data, net.input_dim());
    if (validation) validate(*validation, net.input_dim());
    if (const auto* w = std::get_if<WeightedSquaredLossData>(&data); w && (w->w.array() < 0.0).any())
        throw ContractError("sample weights must be nonnegative");

    const auto monitored = [&](const MlpNetwork& n) {
        return validation ? evaluate_loss(n, *validation) : evaluate_loss(n, data);
    };

    Rng rng = make_rng(cfg.seed, {stream::shuffle});
    Optimizer opt(cfg.optimizer, static_cast<Eigen::Index>(net.num_parameters()));
    double lr = initial_rate(cfg.optimizer);
    const double decay = decay_of(cfg.optimizer);
    const std::size_t plateau = std::max<std::size_t>(1, cfg.early_stop_patience / 2);

    const Eigen::Index n_primary = primary_count(data);
    const Eigen::Index n_secondary = secondary_count(data);
    const std::size_t steps = static_cast<std::size_t>((n_primary + static_cast<Eigen::Index>(cfg.batch_size) - 1) /
                                                       static_cast<Eigen::Index>(cfg.batch_size));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_primary));
    std::vector<Eigen::Index> target_order(static_cast<std::size_t>(n_secondary));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::iota(target_order.begin(), target_order.end(), Eigen::Index{0});

    const auto* weighted = std::get_if<WeightedSquaredLossData>(&data);
    const bool resample = cfg.weighted_sampling && weighted && weighted->w.sum() > 0.0;
    std::discrete_distribution<Eigen::Index> draw;
    double mean_weight = 0.0;
    if (resample) {
        draw = std::discrete_distribution<Eigen::Index>(weighted->w.data(), weighted->w.data() + weighted->w.size());
        mean_weight = weighted->w.mean();
    }

    MlpNetwork best = net;
    double best_loss = monitored(net);
    if (!std::isfinite(best_loss)) throw DivergedTraining(0, "initial loss is not finite");
    TrainReport rep;
    rep.initial_loss = best_loss;

    Eigen::VectorXd grad;
    std::size_t since_improvement = 0;
    std::size_t epoch = 0;
    while (epoch < cfg.max_epochs) {
        ++epoch;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::vector<Eigen::Index>> target_chunks;
        if (n_secondary > 0) {
            std::shuffle(target_order.begin(), target_order.end(), rng);
            target_chunks = chunk(target_order, std::min<std::size_t>(steps, target_order.size()));
        }
        for (std::size_t s = 0; s < steps; ++s) {
            const auto begin = order.begin() + static_cast<std::ptrdiff_t>(s * cfg.batch_size);
            const auto end = order.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min<std::size_t>((s + 1) * cfg.batch_size, order.size()));
            std::vector<Eigen::Index> rows(begin, end);
            if (resample)
                for (auto& r : rows) r = draw(rng);
            LossData batch = n_secondary > 0 ? select(data, rows, target_chunks[s % target_chunks.size()])
                                             : select(data, rows);
            if (resample) std::get<WeightedSquaredLossData>(batch).w.setConstant(mean_weight);
            const double batch_loss = loss_gradient(net, batch, grad);
            if (!std::isfinite(batch_loss) || !grad.allFinite())
                throw DivergedTraining(epoch, "non-finite loss at epoch " + std::to_string(epoch));
            if (cfg.max_grad_norm > 0.0) {
                const double norm = grad.norm();
                if (norm > cfg.max_grad_norm) grad *= cfg.max_grad_norm / norm;
            }
            opt.step(net.parameters(), grad, lr);
        }

        const double loss = monitored(net);
        if (!std::isfinite(loss) || !net.parameters().allFinite())
            throw DivergedTraining(epoch, "non-finite loss at epoch " + std::to_string(epoch));
        if (loss < best_loss) {
            best_loss = loss;
            best = net;
            rep.best_epoch = epoch;
            since_improvement = 0;
        } else {
            ++since_improvement;
            if (since_improvement >= cfg.early_stop_patience) break;
            if (since_improvement % plateau == 0) lr *= decay;
        }
    }

    rep.epochs_run = epoch;
    rep.best_loss = best_loss;
    rep.final_learning_rate = lr;
    if (report) *report = rep;
    return best;
}

}  // namespace repshift
