#include "repshift/mlp.hpp"

#include "repshift/errors.hpp"
#include "repshift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace repshift {

double softplus(double z) {
    if (z > 30.0) return z;
    return std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double OutputActivation::apply(double z) const {
    double v = base == OutputBase::softplus ? repshift::softplus(z) : z;
    if (clip) v = std::min(v, *clip);
    if (symmetric_bound) v = std::clamp(v, -*symmetric_bound, *symmetric_bound);
    return v;
}

double OutputActivation::derivative(double z) const {
    double v = z;
    double g = 1.0;
    if (base == OutputBase::softplus) {
        v = repshift::softplus(z);
        g = sigmoid(z);
    }
    if (clip && v > *clip) return 0.0;
    if (symmetric_bound && std::abs(v) > *symmetric_bound) return 0.0;
    return g;
}

MlpNetwork::MlpNetwork(std::vector<int> dims, OutputActivation output)
    : dims_(std::move(dims)), output_(output) {
    if (dims_.size() < 2) throw ShapeError("network needs at least input and output dims");
    if (dims_.back() != 1) throw ShapeError("network output dimension must be 1");
    for (int n : dims_)
        if (n <= 0) throw ShapeError("layer dimensions must be positive");
    std::size_t total = 0;
    offsets_.reserve(dims_.size() - 1);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        offsets_.push_back(total);
        total += static_cast<std::size_t>(dims_[l + 1]) * dims_[l] + dims_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

MlpNetwork MlpNetwork::he_initialized(std::vector<int> dims, OutputActivation output, std::uint64_t seed) {
    MlpNetwork net(std::move(dims), output);
    Rng rng(seed);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / net.dims_[l]));
        auto w = net.weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
    return net;
}

MlpNetwork::ConstMatrixMap MlpNetwork::weight(std::size_t layer) const {
    return ConstMatrixMap(params_.data() + offsets_.at(layer), dims_[layer + 1], dims_[layer]);
}

MlpNetwork::MatrixMap MlpNetwork::weight(std::size_t layer) {
    return MatrixMap(params_.data() + offsets_.at(layer), dims_[layer + 1], dims_[layer]);
}

MlpNetwork::ConstVectorMap MlpNetwork::bias(std::size_t layer) const {
    return ConstVectorMap(params_.data() + bias_offset(layer), dims_[layer + 1]);
}

MlpNetwork::VectorMap MlpNetwork::bias(std::size_t layer) {
    return VectorMap(params_.data() + bias_offset(layer), dims_[layer + 1]);
}

Eigen::VectorXd MlpNetwork::raw_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (x.rows() != input_dim())
        throw ShapeError("input has dimension " + std::to_string(x.rows()) + ", network expects " +
                         std::to_string(input_dim()));
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * h;
        z.colwise() += bias(l);
        if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h.row(0).transpose();
}

Eigen::VectorXd MlpNetwork::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    Eigen::VectorXd out = raw_batch(x);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = output_.apply(out[i]);
    return out;
}

double MlpNetwork::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(input_dim()));
    Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
    return forward_batch(col)[0];
}

NetworkStats MlpNetwork::stats() const {
    NetworkStats s;
    s.depth = num_layers() - 1;
    for (std::size_t l = 1; l + 1 < dims_.size(); ++l) s.width = std::max<std::size_t>(s.width, dims_[l]);
    for (Eigen::Index i = 0; i < params_.size(); ++i) {
        if (params_[i] != 0.0) ++s.size;
        s.weight_bound = std::max(s.weight_bound, std::abs(params_[i]));
    }
    return s;
}

NetworkStats network_stats(const MlpNetwork& net) { return net.stats(); }

namespace {

std::string format_optional(const std::optional<double>& v) {
    if (!v) return "none";
    std::ostringstream os;
    os << std::setprecision(17) << *v;
    return os.str();
}

std::optional<double> parse_optional(const std::string& s) {
    if (s == "none") return std::nullopt;
    return std::stod(s);
}

std::string expect_key(std::istream& is, const std::string& key, std::size_t& line_no) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(line_no + 1, "missing '" + key + ":' line");
    ++line_no;
    const std::string prefix = key + ":";
    if (line.rfind(prefix, 0) != 0) throw ParseError(line_no, "expected '" + prefix + "'");
    return line.substr(prefix.size());
}

}  // namespace

void MlpNetwork::save(std::ostream& os) const {
    os << "dims:";
    for (int n : dims_) os << ' ' << n;
    os << '\n';
    os << "output: " << (output_.base == OutputBase::softplus ? "softplus" : "identity") << ' '
       << format_optional(output_.clip) << ' ' << format_optional(output_.symmetric_bound) << '\n';
    os << std::setprecision(17);
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const auto w = weight(l);
        os << 'A' << l << ':';
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) os << ' ' << w(i, j);
        os << '\n';
        const auto b = bias(l);
        os << 'b' << l << ':';
        for (Eigen::Index i = 0; i < b.size(); ++i) os << ' ' << b[i];
        os << '\n';
    }
}

MlpNetwork MlpNetwork::load(std::istream& is) {
    std::size_t line_no = 0;
    std::vector<int> dims;
    {
        std::istringstream ds(expect_key(is, "dims", line_no));
        int n;
        while (ds >> n) dims.push_back(n);
    }
    OutputActivation act;
    {
        std::istringstream os(expect_key(is, "output", line_no));
        std::string base, clip, bound;
        if (!(os >> base >> clip >> bound)) throw ParseError(line_no, "malformed output line");
        if (base == "softplus") act.base = OutputBase::softplus;
        else if (base != "identity") throw ParseError(line_no, "unknown output base '" + base + "'");
        act.clip = parse_optional(clip);
        act.symmetric_bound = parse_optional(bound);
    }
    MlpNetwork net(dims, act);
    auto read_values = [&](const std::string& key, Eigen::Index count) {
        std::istringstream vs(expect_key(is, key, line_no));
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(count));
        std::string tok;
        while (vs >> tok) out.push_back(std::stod(tok));
        if (static_cast<Eigen::Index>(out.size()) != count)
            throw ParseError(line_no, key + " has " + std::to_string(out.size()) + " values, expected " +
                                          std::to_string(count));
        return out;
    };
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        auto w = net.weight(l);
        const auto wv = read_values("A" + std::to_string(l), w.size());
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = wv[static_cast<std::size_t>(i * w.cols() + j)];
        auto b = net.bias(l);
        const auto bv = read_values("b" + std::to_string(l), b.size());
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bv[static_cast<std::size_t>(i)];
    }
    return net;
}

void MlpNetwork::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    save(os);
}

MlpNetwork MlpNetwork::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return load(is);
}

ClassSizing recommended_class_sizing(std::size_t n, int d, double zeta) {
    if (n < 2 || d < 1 || zeta <= 0.0) throw DomainError("sizing needs n >= 2, d >= 1, zeta > 0");
    const double log_n = std::log(static_cast<double>(n));
    const double expo = d / (d + 2.0 * zeta);
    ClassSizing s;
    s.depth = static_cast<std::size_t>(std::ceil(log_n));
    s.weight_bound = std::pow(static_cast<double>(n), expo);
    s.size = s.weight_bound * std::pow(log_n, -5.0 * expo);
    return s;
}

}  // namespace repshift
