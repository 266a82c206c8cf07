#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repshift {

enum class OutputBase { identity, softplus };

/// Activation applied to the scalar network output. The base map runs
/// first, then the upper clip min(., xi), then the symmetric clip to
/// [-bound, bound].
struct OutputActivation {
    OutputBase base = OutputBase::identity;
    std::optional<double> clip;
    std::optional<double> symmetric_bound;

    static OutputActivation identity() { return {}; }
    static OutputActivation softplus() { return {OutputBase::softplus, std::nullopt, std::nullopt}; }
    static OutputActivation clipped(double xi) { return {OutputBase::identity, xi, std::nullopt}; }
    static OutputActivation clip_symmetric(double bound) { return {OutputBase::identity, std::nullopt, bound}; }

    OutputActivation with_clip(double xi) const {
        auto out = *this;
        out.clip = xi;
        return out;
    }

    double apply(double z) const;
    /// d apply / dz. Zero on the clipped side; at the clip point the
    /// left derivative is used.
    double derivative(double z) const;

    bool operator==(const OutputActivation&) const = default;
};

/// log(1 + exp(z)), overflow-safe for z > 30.
double softplus(double z);
/// Logistic sigmoid, the derivative of softplus.
double sigmoid(double z);

struct NetworkStats {
    std::size_t width = 0;         // max hidden dimension
    std::size_t depth = 0;         // number of hidden layers
    std::size_t size = 0;          // nonzero weights and biases
    double weight_bound = 0.0;     // max absolute parameter

    bool operator==(const NetworkStats&) const = default;
};

/// Dense ReLU feedforward network f(x) = A_D relu(... relu(A_0 x + b_0) ...) + b_D
/// followed by an output activation. All parameters live in one flat vector,
/// layer by layer, each weight matrix column-major and then its bias.
class MlpNetwork {
public:
    using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
    using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
    using VectorMap = Eigen::Map<Eigen::VectorXd>;

    MlpNetwork() = default;
    /// Zero-initialized network. dims = {input, hidden..., 1}.
    MlpNetwork(std::vector<int> dims, OutputActivation output = {});

    /// He-normal weights (std sqrt(2 / fan_in)), zero biases.
    static MlpNetwork he_initialized(std::vector<int> dims, OutputActivation output, std::uint64_t seed);

    const std::vector<int>& dims() const noexcept { return dims_; }
    int input_dim() const { return dims_.front(); }
    std::size_t num_layers() const noexcept { return dims_.size() - 1; }
    const OutputActivation& output_activation() const noexcept { return output_; }
    void set_output_activation(OutputActivation a) { output_ = a; }

    ConstMatrixMap weight(std::size_t layer) const;
    MatrixMap weight(std::size_t layer);
    ConstVectorMap bias(std::size_t layer) const;
    VectorMap bias(std::size_t layer);

    const Eigen::VectorXd& parameters() const noexcept { return params_; }
    Eigen::VectorXd& parameters() noexcept { return params_; }
    std::size_t num_parameters() const noexcept { return static_cast<std::size_t>(params_.size()); }
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + static_cast<std::size_t>(dims_[layer + 1]) * dims_[layer];
    }

    double forward(std::span<const double> x) const;
    /// Columns of x are samples; returns one output per column.
    Eigen::VectorXd forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
    /// Pre-activation output (before the output activation).
    Eigen::VectorXd raw_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

    NetworkStats stats() const;

    void save(std::ostream& os) const;
    static MlpNetwork load(std::istream& is);
    void save(const std::string& path) const;
    static MlpNetwork load(const std::string& path);

    bool operator==(const MlpNetwork& other) const {
        return dims_ == other.dims_ && output_ == other.output_ && params_ == other.params_;
    }

private:
    std::vector<int> dims_;
    std::vector<std::size_t> offsets_;
    Eigen::VectorXd params_;
    OutputActivation output_;
};

NetworkStats network_stats(const MlpNetwork& net);

/// Theory-side sizing for the regression class at sample size n.
/// Advisory only; training never enforces it.
struct ClassSizing {
    std::size_t depth;
    double size;
    double weight_bound;
};
ClassSizing recommended_class_sizing(std::size_t n, int d, double zeta);

}  // namespace repshift
