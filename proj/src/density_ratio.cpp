#include "repshift/density_ratio.hpp"

#include "repshift/errors.hpp"
#include "repshift/normal.hpp"
#include "repshift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace repshift {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Per-coordinate log ratio at latent z.
double log_ratio_1d(const CopulaParams& p, double z) {
    const double dq = z - p.mu_q;
    const double dp = z - p.mu_p;
    return 0.5 * std::log(p.var_p / p.var_q) - dq * dq / (2.0 * p.var_q) + dp * dp / (2.0 * p.var_p);
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string read_value(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(0, "missing '" + key + ":' line");
    const std::string prefix = key + ":";
    if (line.rfind(prefix, 0) != 0) throw ParseError(0, "expected '" + prefix + "', got '" + line + "'");
    auto v = line.substr(prefix.size());
    v.erase(0, v.find_first_not_of(' '));
    return v;
}

}  // namespace

void CopulaParams::validate() const {
    if (!(var_p > 0.0) || !(var_q > 0.0)) throw ConfigError("copula variances must be positive");
    if (d < 1) throw ConfigError("copula dimension must be positive");
}

RatioRegime CopulaParams::regime() const {
    if (var_p >= var_q) return RatioRegime::bounded;
    if (var_p >= var_q / 2.0) return RatioRegime::finite_second_moment;
    return RatioRegime::heavy_tailed;
}

double CopulaParams::sup_ratio() const {
    if (regime() != RatioRegime::bounded) return std::numeric_limits<double>::infinity();
    const double scale = std::sqrt(var_p / var_q);
    if (var_p == var_q) {
        return mu_p == mu_q ? std::pow(scale, d) : std::numeric_limits<double>::infinity();
    }
    const double gap = mu_q - mu_p;
    return std::pow(scale, d) * std::exp(d * gap * gap / (2.0 * (var_p - var_q)));
}

double exact_copula_ratio(const CopulaParams& p, std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.d)
        throw ShapeError("point has dimension " + std::to_string(x.size()) + ", copula has " + std::to_string(p.d));
    double log_r = 0.0;
    for (double xi : x) {
        const double u = std::clamp(xi, kBoundaryClamp, 1.0 - kBoundaryClamp);
        log_r += log_ratio_1d(p, normal_quantile(u));
    }
    return std::exp(log_r);
}

RatioModel::RatioModel(Kind k, std::optional<double> clip) : kind_(std::move(k)), clip_(clip) {
    if (clip_ && !(*clip_ > 0.0)) throw DomainError("clip level must be positive");
}

RatioModel RatioModel::fitted(MlpNetwork net, std::optional<double> clip) {
    return RatioModel(std::move(net), clip);
}

RatioModel RatioModel::exact_copula(CopulaParams p, std::optional<double> clip) {
    p.validate();
    return RatioModel(p, clip);
}

RatioModel RatioModel::constant(double c) {
    if (!(c >= 0.0)) throw DomainError("constant ratio must be nonnegative");
    return RatioModel(ConstantRatio{c}, std::nullopt);
}

int RatioModel::dim() const {
    return std::visit(overloaded{[](const MlpNetwork& n) { return n.input_dim(); },
                                 [](const CopulaParams& p) { return p.d; },
                                 [](const ConstantRatio&) { return 0; }},
                      kind_);
}

RatioModel RatioModel::clipped(double xi) const {
    RatioModel out = *this;
    if (!(xi > 0.0)) throw DomainError("clip level must be positive");
    out.clip_ = xi;
    return out;
}

RatioModel RatioModel::unclipped() const {
    RatioModel out = *this;
    out.clip_.reset();
    if (auto* net = std::get_if<MlpNetwork>(&out.kind_)) {
        auto act = net->output_activation();
        act.clip.reset();
        net->set_output_activation(act);
    }
    return out;
}

double RatioModel::evaluate(std::span<const double> x) const {
    double v = std::visit(overloaded{[&](const MlpNetwork& n) { return n.forward(x); },
                                     [&](const CopulaParams& p) { return exact_copula_ratio(p, x); },
                                     [](const ConstantRatio& c) { return c.value; }},
                          kind_);
    v = std::max(v, 0.0);
    return clip_ ? std::min(v, *clip_) : v;
}

Eigen::VectorXd RatioModel::evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    Eigen::VectorXd out = std::visit(
        overloaded{[&](const MlpNetwork& n) -> Eigen::VectorXd { return n.forward_batch(x); },
                   [&](const CopulaParams& p) -> Eigen::VectorXd {
                       if (x.rows() != p.d) throw ShapeError("points do not match copula dimension");
                       Eigen::VectorXd v(x.cols());
                       for (Eigen::Index j = 0; j < x.cols(); ++j) {
                           const Eigen::VectorXd col = x.col(j);
                           v[j] = exact_copula_ratio(p, std::span<const double>(col.data(), col.size()));
                       }
                       return v;
                   },
                   [&](const ConstantRatio& c) -> Eigen::VectorXd {
                       return Eigen::VectorXd::Constant(x.cols(), c.value);
                   }},
        kind_);
    out = out.cwiseMax(0.0);
    if (clip_) out = out.cwiseMin(*clip_);
    return out;
}

void RatioModel::save(std::ostream& os) const {
    std::visit(overloaded{[&](const MlpNetwork& n) {
                              os << "kind: fitted\n";
                              n.save(os);
                          },
                          [&](const CopulaParams& p) {
                              os << "kind: exact_copula\n";
                              os << "copula: " << format_double(p.mu_p) << ' ' << format_double(p.var_p) << ' '
                                 << format_double(p.mu_q) << ' ' << format_double(p.var_q) << ' ' << p.d << '\n';
                          },
                          [&](const ConstantRatio& c) {
                              os << "kind: constant\n";
                              os << "value: " << format_double(c.value) << '\n';
                          }},
               kind_);
    os << "clip: " << (clip_ ? format_double(*clip_) : std::string("none")) << '\n';
}

RatioModel RatioModel::load(std::istream& is) {
    const std::string kind = read_value(is, "kind");
    Kind k;
    if (kind == "fitted") {
        k = MlpNetwork::load(is);
    } else if (kind == "exact_copula") {
        std::istringstream ps(read_value(is, "copula"));
        CopulaParams p;
        if (!(ps >> p.mu_p >> p.var_p >> p.mu_q >> p.var_q >> p.d)) throw ParseError(0, "malformed copula line");
        p.validate();
        k = p;
    } else if (kind == "constant") {
        k = ConstantRatio{std::stod(read_value(is, "value"))};
    } else {
        throw ParseError(0, "unknown ratio kind '" + kind + "'");
    }
    const std::string clip = read_value(is, "clip");
    std::optional<double> c;
    if (clip != "none") c = std::stod(clip);
    return RatioModel(std::move(k), c);
}

void RatioModel::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    save(os);
}

RatioModel RatioModel::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return load(is);
}

double lsif_empirical_loss(const Eigen::VectorXd& v_source, const Eigen::VectorXd& v_target) {
    if (v_source.size() == 0 || v_target.size() == 0) throw EmptyInputError("LSIF loss needs nonempty batches");
    return v_source.squaredNorm() / (2.0 * static_cast<double>(v_source.size())) -
           v_target.sum() / static_cast<double>(v_target.size());
}

double lsif_empirical_loss(const BatchFunction& v, const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
    if (source.cols() == 0 || target.cols() == 0) throw EmptyInputError("LSIF loss needs nonempty batches");
    return lsif_empirical_loss(v(source), v(target));
}

RatioFitResult fit_ratio(const RepeatedDataset& source_cov, const RepeatedDataset& target_cov,
                         const RatioFitOptions& options, const LsifLossData* validation) {
    if (source_cov.dim() != target_cov.dim()) throw ShapeError("source and target dimensions differ");
    if (source_cov.num_observations() == 0 || target_cov.num_observations() == 0)
        throw EmptyInputError("ratio fitting needs nonempty source and target covariates");
    source_cov.check_unit_cube();
    target_cov.check_unit_cube();

    OutputActivation act = OutputActivation::softplus();
    std::optional<double> clip;
    if (options.clip_policy == ClipPolicy::fixed) {
        if (!(options.clip_value > 0.0)) throw ConfigError("fixed clip level must be positive");
        clip = options.clip_value;
        act = act.with_clip(*clip);
    } else if (options.clip_policy == ClipPolicy::percentile) {
        if (!(options.clip_value > 0.0 && options.clip_value < 1.0))
            throw ConfigError("clip percentile must lie in (0, 1)");
    }

    std::vector<int> dims{source_cov.dim()};
    dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
    dims.push_back(1);
    auto net = MlpNetwork::he_initialized(dims, act, derive_seed(options.train.seed, {stream::init}));

    const Eigen::MatrixXd xs = source_cov.covariates();
    const LossData data = LsifLossData{xs, target_cov.covariates()};
    const LossData* val = nullptr;
    LossData val_data;
    if (validation) {
        val_data = *validation;
        val = &val_data;
    }
    RatioFitResult result{RatioModel::constant(1.0), {}, clip};
    net = train(std::move(net), data, options.train, val, &result.report);
    result.model = RatioModel::fitted(std::move(net), clip);

    if (options.clip_policy == ClipPolicy::percentile) {
        const double xi = ratio_quantile(result.model, xs, options.clip_value);
        if (xi > 0.0) {
            result.clip_level = xi;
            result.model = result.model.clipped(xi);
        }
    }
    return result;
}

double moment_diagnostic(const RatioModel& model, const Eigen::MatrixXd& source_cov, double delta) {
    if (!(delta >= 0.0)) throw DomainError("delta must be nonnegative");
    if (source_cov.cols() == 0) throw EmptyInputError("no source covariates");
    const Eigen::VectorXd r = model.evaluate_batch(source_cov);
    return r.array().pow(delta + 2.0).mean();
}

double moment_diagnostic(const RatioModel& model, const RepeatedDataset& source_cov, double delta) {
    return moment_diagnostic(model, source_cov.covariates(), delta);
}

double ratio_quantile(const RatioModel& model, const Eigen::MatrixXd& points, double q) {
    if (points.cols() == 0) throw EmptyInputError("no points");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile must lie in [0, 1]");
    Eigen::VectorXd v = model.evaluate_batch(points);
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace repshift
