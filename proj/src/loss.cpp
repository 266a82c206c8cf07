#include "repshift/loss.hpp"

#include "repshift/errors.hpp"

#include <string>

namespace repshift {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Per-sample loss and derivative w.r.t. the (activated) network output.
struct LossTerms {
    double loss;
    Eigen::VectorXd d_out;
};

LossTerms squared_terms(const Eigen::VectorXd& out, const Eigen::VectorXd& y, const Eigen::VectorXd* w) {
    const double n = static_cast<double>(out.size());
    Eigen::VectorXd resid = out - y;
    LossTerms t;
    if (w) {
        t.loss = (w->array() * resid.array().square()).sum() / n;
        t.d_out = (2.0 / n) * (w->array() * resid.array()).matrix();
    } else {
        t.loss = resid.array().square().sum() / n;
        t.d_out = (2.0 / n) * resid;
    }
    return t;
}

LossTerms lsif_terms(const Eigen::VectorXd& out, Eigen::Index n_source) {
    const Eigen::Index n_target = out.size() - n_source;
    const double ns = static_cast<double>(n_source);
    const double nt = static_cast<double>(n_target);
    const auto src = out.head(n_source);
    const auto tgt = out.tail(n_target);
    LossTerms t;
    t.loss = src.squaredNorm() / (2.0 * ns) - tgt.sum() / nt;
    t.d_out.resize(out.size());
    t.d_out.head(n_source) = src / ns;
    t.d_out.tail(n_target).setConstant(-1.0 / nt);
    return t;
}

template <class TermsFn>
double backprop(const MlpNetwork& net, const Eigen::MatrixXd& x, TermsFn&& terms_fn, Eigen::VectorXd& grad) {
    const std::size_t layers = net.num_layers();
    std::vector<Eigen::MatrixXd> pre(layers);      // Z_l
    std::vector<Eigen::MatrixXd> post(layers);     // relu(Z_l) for hidden layers
    const Eigen::MatrixXd* h = &x;
    for (std::size_t l = 0; l < layers; ++l) {
        pre[l].noalias() = net.weight(l) * (*h);
        pre[l].colwise() += net.bias(l);
        if (l + 1 < layers) {
            post[l] = pre[l].cwiseMax(0.0);
            h = &post[l];
        }
    }
    const Eigen::Index batch = x.cols();
    const auto& act = net.output_activation();
    Eigen::VectorXd raw = pre.back().row(0).transpose();
    Eigen::VectorXd out(batch);
    for (Eigen::Index i = 0; i < batch; ++i) out[i] = act.apply(raw[i]);

    LossTerms terms = terms_fn(out);

    grad.setZero(static_cast<Eigen::Index>(net.num_parameters()));
    Eigen::MatrixXd delta(1, batch);
    for (Eigen::Index i = 0; i < batch; ++i) delta(0, i) = terms.d_out[i] * act.derivative(raw[i]);

    for (std::size_t l = layers; l-- > 0;) {
        const Eigen::MatrixXd& input = l == 0 ? x : post[l - 1];
        const auto rows = net.dims()[l + 1];
        const auto cols = net.dims()[l];
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + net.weight_offset(l), rows, cols);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.bias_offset(l), rows);
        gw.noalias() = delta * input.transpose();
        gb = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd next = net.weight(l).transpose() * delta;
            delta = (pre[l - 1].array() > 0.0).select(next, 0.0);
        }
    }
    return terms.loss;
}

void require_cols(Eigen::Index cols, const char* what) {
    if (cols == 0) throw EmptyInputError(std::string(what) + " is empty");
}

}  // namespace

Eigen::Index primary_count(const LossData& data) {
    return std::visit(overloaded{[](const LsifLossData& d) { return d.source.cols(); },
                                 [](const auto& d) { return d.x.cols(); }},
                      data);
}

void validate(const LossData& data, int input_dim) {
    auto check_rows = [&](const Eigen::MatrixXd& m) {
        if (m.rows() != input_dim)
            throw ShapeError("samples have dimension " + std::to_string(m.rows()) + ", network expects " +
                             std::to_string(input_dim));
    };
    std::visit(overloaded{
                   [&](const SquaredLossData& d) {
                       require_cols(d.x.cols(), "batch");
                       check_rows(d.x);
                       if (d.y.size() != d.x.cols()) throw ShapeError("responses do not match samples");
                   },
                   [&](const WeightedSquaredLossData& d) {
                       require_cols(d.x.cols(), "batch");
                       check_rows(d.x);
                       if (d.y.size() != d.x.cols() || d.w.size() != d.x.cols())
                           throw ShapeError("responses or weights do not match samples");
                   },
                   [&](const LsifLossData& d) {
                       require_cols(d.source.cols(), "source batch");
                       require_cols(d.target.cols(), "target batch");
                       check_rows(d.source);
                       check_rows(d.target);
                   }},
               data);
}

double evaluate_loss(const MlpNetwork& net, const LossData& data) {
    validate(data, net.input_dim());
    return std::visit(overloaded{
                          [&](const SquaredLossData& d) {
                              return squared_terms(net.forward_batch(d.x), d.y, nullptr).loss;
                          },
                          [&](const WeightedSquaredLossData& d) {
                              return squared_terms(net.forward_batch(d.x), d.y, &d.w).loss;
                          },
                          [&](const LsifLossData& d) {
                              const Eigen::VectorXd vs = net.forward_batch(d.source);
                              const Eigen::VectorXd vt = net.forward_batch(d.target);
                              return vs.squaredNorm() / (2.0 * static_cast<double>(vs.size())) -
                                     vt.sum() / static_cast<double>(vt.size());
                          }},
                      data);
}

double loss_gradient(const MlpNetwork& net, const LossData& data, Eigen::VectorXd& grad) {
    validate(data, net.input_dim());
    return std::visit(
        overloaded{
            [&](const SquaredLossData& d) {
                return backprop(net, d.x, [&](const Eigen::VectorXd& out) { return squared_terms(out, d.y, nullptr); },
                                grad);
            },
            [&](const WeightedSquaredLossData& d) {
                return backprop(net, d.x, [&](const Eigen::VectorXd& out) { return squared_terms(out, d.y, &d.w); },
                                grad);
            },
            [&](const LsifLossData& d) {
                Eigen::MatrixXd both(d.source.rows(), d.source.cols() + d.target.cols());
                both << d.source, d.target;
                const Eigen::Index ns = d.source.cols();
                return backprop(net, both, [&](const Eigen::VectorXd& out) { return lsif_terms(out, ns); }, grad);
            }},
        data);
}

LossData select(const LossData& data, const std::vector<Eigen::Index>& rows,
                const std::vector<Eigen::Index>& target_rows) {
    return std::visit(overloaded{
                          [&](const SquaredLossData& d) -> LossData {
                              return SquaredLossData{d.x(Eigen::all, rows), d.y(rows)};
                          },
                          [&](const WeightedSquaredLossData& d) -> LossData {
                              return WeightedSquaredLossData{d.x(Eigen::all, rows), d.y(rows), d.w(rows)};
                          },
                          [&](const LsifLossData& d) -> LossData {
                              return LsifLossData{d.source(Eigen::all, rows), d.target(Eigen::all, target_rows)};
                          }},
                      data);
}

}  // namespace repshift
