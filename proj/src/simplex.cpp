#include "repshift/simplex.hpp"

#include "repshift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace repshift {

namespace {

void check_point(std::span<const double> x) {
    for (double v : x)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("point outside [0,1]^d");
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// Ceiling that ignores relative round-off below 1e-12.
int tolerant_ceil(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-12 * std::max(1.0, std::abs(v))) return static_cast<int>(r);
    return static_cast<int>(std::ceil(v));
}

std::string format_vertex(std::span<const int> v) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ')';
    return os.str();
}

// Sorted offsets s_1 <= ... <= s_d of y = N (x - v) along the permutation.
std::vector<double> ordered_offsets(std::span<const double> x, const SimplexId& s, int N) {
    const int d = s.dim();
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        const int l = s.perm[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(k)] = N * x[static_cast<std::size_t>(l)] - s.base[static_cast<std::size_t>(l)];
    }
    return out;
}

}  // namespace

HolderSpec HolderSpec::from_smoothness(double zeta, double B) {
    HolderSpec s{zeta, static_cast<int>(std::ceil(zeta)) - 1, B};
    s.validate();
    return s;
}

void HolderSpec::validate() const {
    if (!(zeta > 0.0)) throw DomainError("smoothness must be positive");
    if (!(B > 0.0)) throw DomainError("Hoelder constant must be positive");
    const double sigma = zeta - t;
    if (t < 0 || !(sigma > 0.0 && sigma <= 1.0)) throw DomainError("Taylor order must satisfy zeta - t in (0, 1]");
}

std::vector<std::vector<int>> SimplexId::vertices() const {
    const int d = dim();
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<std::size_t>(d) + 1);
    out.push_back(base);
    for (int k = 1; k <= d; ++k) {
        auto v = out.back();
        ++v[static_cast<std::size_t>(perm[static_cast<std::size_t>(d - k)])];
        out.push_back(std::move(v));
    }
    return out;
}

SimplexId locate_simplex(std::span<const double> x, int N) {
    if (N < 1) throw DomainError("mesh resolution must be at least 1");
    check_point(x);
    const int d = static_cast<int>(x.size());
    SimplexId s;
    s.base.resize(static_cast<std::size_t>(d));
    std::vector<double> offset(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) {
        const double scaled = N * x[static_cast<std::size_t>(l)];
        const int cell = std::min(static_cast<int>(std::floor(scaled)), N - 1);
        s.base[static_cast<std::size_t>(l)] = cell;
        offset[static_cast<std::size_t>(l)] = scaled - cell;
    }
    s.perm.resize(static_cast<std::size_t>(d));
    std::iota(s.perm.begin(), s.perm.end(), 0);
    std::stable_sort(s.perm.begin(), s.perm.end(), [&](int a, int b) {
        return offset[static_cast<std::size_t>(a)] < offset[static_cast<std::size_t>(b)];
    });
    return s;
}

bool simplex_contains(const SimplexId& s, std::span<const double> x, int N, double tol) {
    if (static_cast<int>(x.size()) != s.dim()) return false;
    const auto y = ordered_offsets(x, s, N);
    double prev = 0.0;
    for (double v : y) {
        if (v < prev - tol) return false;
        prev = v;
    }
    return prev <= 1.0 + tol;
}

std::vector<double> barycentric(std::span<const double> x, const SimplexId& s, int N) {
    if (static_cast<int>(x.size()) != s.dim()) throw ShapeError("point and simplex dimensions differ");
    const int d = s.dim();
    const auto y = ordered_offsets(x, s, N);
    std::vector<double> lambda(static_cast<std::size_t>(d) + 1);
    // lambda_0 = 1 - s_d, lambda_k = s_{d-k+1} - s_{d-k} with s_0 = 0.
    lambda[0] = 1.0 - (d > 0 ? y.back() : 0.0);
    for (int k = 1; k <= d; ++k) {
        const double hi = y[static_cast<std::size_t>(d - k)];
        const double lo = d - k - 1 >= 0 ? y[static_cast<std::size_t>(d - k - 1)] : 0.0;
        lambda[static_cast<std::size_t>(k)] = hi - lo;
    }
    for (double& l : lambda) {
        if (l < -1e-9 || l > 1.0 + 1e-9) throw DomainError("point is not in the given simplex");
        l = std::clamp(l, 0.0, 1.0);
    }
    return lambda;
}

double pou_weight(std::span<const int> vertex, std::span<const double> x, int N) {
    if (vertex.size() != x.size()) throw ShapeError("vertex and point dimensions differ");
    const SimplexId s = locate_simplex(x, N);
    const auto verts = s.vertices();
    for (std::size_t k = 0; k < verts.size(); ++k) {
        if (std::equal(verts[k].begin(), verts[k].end(), vertex.begin())) return barycentric(x, s, N)[k];
    }
    return 0.0;
}

std::vector<std::vector<int>> multi_indices(int d, int t) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(d), 0);
    // Lexicographically descending compositions of `deg` into d parts.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == d - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(cur);
            return;
        }
        for (int a = remaining; a >= 0; --a) {
            cur[static_cast<std::size_t>(pos)] = a;
            self(self, pos + 1, remaining - a);
        }
    };
    for (int deg = 0; deg <= t; ++deg) {
        if (d == 0) break;
        rec(rec, 0, deg);
    }
    return out;
}

double default_fd_step(int N) { return std::max(1e-5, 1e-7 * N); }

DerivativeOracle finite_difference_oracle(std::function<double(std::span<const double>)> f, double h) {
    return [f = std::move(f), h](std::span<const double> x, std::span<const int> alpha) {
        const std::size_t d = x.size();
        // Tensor product of 1-d central stencils of order alpha_l.
        std::vector<int> j(d, 0);
        std::vector<double> point(x.begin(), x.end());
        double total = 0.0;
        while (true) {
            double coef = 1.0;
            for (std::size_t l = 0; l < d; ++l) {
                const int k = alpha[l];
                coef *= ((j[l] % 2) ? -1.0 : 1.0) * binomial(k, j[l]) / std::pow(h, k);
                point[l] = x[l] + (0.5 * k - j[l]) * h;
            }
            total += coef * f(point);
            std::size_t l = 0;
            while (l < d && ++j[l] > alpha[l]) {
                j[l] = 0;
                ++l;
            }
            if (l == d) break;
        }
        return total;
    };
}

SimplicialApproximant::SimplicialApproximant(int d, int N, HolderSpec spec, std::vector<std::vector<int>> alphas,
                                             Eigen::MatrixXd coefficients)
    : d_(d), N_(N), spec_(spec), alphas_(std::move(alphas)), coeffs_(std::move(coefficients)) {
    if (static_cast<std::size_t>(coeffs_.rows()) != alphas_.size())
        throw ShapeError("coefficient rows do not match multi-indices");
    if (coeffs_.cols() != static_cast<Eigen::Index>(std::pow(N_ + 1, d_)))
        throw ShapeError("coefficient columns do not match the vertex count");
}

std::size_t SimplicialApproximant::vertex_index(std::span<const int> vertex) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int l = 0; l < d_; ++l) {
        idx += static_cast<std::size_t>(vertex[static_cast<std::size_t>(l)]) * stride;
        stride *= static_cast<std::size_t>(N_ + 1);
    }
    return idx;
}

std::vector<int> SimplicialApproximant::vertex_at(std::size_t index) const {
    std::vector<int> v(static_cast<std::size_t>(d_));
    for (int l = 0; l < d_; ++l) {
        v[static_cast<std::size_t>(l)] = static_cast<int>(index % static_cast<std::size_t>(N_ + 1));
        index /= static_cast<std::size_t>(N_ + 1);
    }
    return v;
}

double SimplicialApproximant::coefficient(std::span<const int> vertex, std::size_t alpha_index) const {
    return coeffs_(static_cast<Eigen::Index>(alpha_index), static_cast<Eigen::Index>(vertex_index(vertex)));
}

double SimplicialApproximant::taylor(std::size_t vertex, std::span<const int> lattice,
                                     std::span<const double> x) const {
    double sum = 0.0;
    for (std::size_t a = 0; a < alphas_.size(); ++a) {
        double mono = 1.0;
        for (int l = 0; l < d_; ++l) {
            const int p = alphas_[a][static_cast<std::size_t>(l)];
            if (p == 0) continue;
            const double h = x[static_cast<std::size_t>(l)] - static_cast<double>(lattice[static_cast<std::size_t>(l)]) / N_;
            for (int k = 0; k < p; ++k) mono *= h;
        }
        sum += coeffs_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(vertex)) * mono;
    }
    return sum;
}

double SimplicialApproximant::evaluate_in(std::span<const double> x, const SimplexId& s) const {
    if (static_cast<int>(x.size()) != d_) throw ShapeError("point dimension does not match approximant");
    check_point(x);
    const auto lambda = barycentric(x, s, N_);
    const auto verts = s.vertices();
    double p = 0.0;
    for (std::size_t k = 0; k < verts.size(); ++k) {
        if (lambda[k] == 0.0) continue;
        p += lambda[k] * taylor(vertex_index(verts[k]), verts[k], x);
    }
    return p;
}

double SimplicialApproximant::evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d_) throw ShapeError("point dimension does not match approximant");
    return evaluate_in(x, locate_simplex(x, N_));
}

void SimplicialApproximant::save(std::ostream& os) const {
    os << std::setprecision(17);
    os << "d N zeta t B\n" << d_ << ' ' << N_ << ' ' << spec_.zeta << ' ' << spec_.t << ' ' << spec_.B << '\n';
    for (Eigen::Index v = 0; v < coeffs_.cols(); ++v) {
        const auto lattice = vertex_at(static_cast<std::size_t>(v));
        for (int l = 0; l < d_; ++l) os << (l ? " " : "") << lattice[static_cast<std::size_t>(l)];
        for (Eigen::Index a = 0; a < coeffs_.rows(); ++a) os << ' ' << coeffs_(a, v);
        os << '\n';
    }
}

SimplicialApproximant build_approximant(const DerivativeOracle& f, int d, const HolderSpec& spec, int N) {
    spec.validate();
    if (d < 1) throw DomainError("dimension must be at least 1");
    if (N < 1) throw DomainError("mesh resolution must be at least 1");
    auto alphas = multi_indices(d, spec.t);
    std::vector<double> alpha_factorial;
    for (const auto& a : alphas) {
        double af = 1.0;
        for (int p : a) af *= factorial(p);
        alpha_factorial.push_back(af);
    }
    const auto n_vertices = static_cast<std::size_t>(std::pow(N + 1, d));
    Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(alphas.size()), static_cast<Eigen::Index>(n_vertices));
    std::vector<int> lattice(static_cast<std::size_t>(d), 0);
    std::vector<double> point(static_cast<std::size_t>(d));
    for (std::size_t v = 0; v < n_vertices; ++v) {
        std::size_t rem = v;
        for (int l = 0; l < d; ++l) {
            lattice[static_cast<std::size_t>(l)] = static_cast<int>(rem % static_cast<std::size_t>(N + 1));
            rem /= static_cast<std::size_t>(N + 1);
            point[static_cast<std::size_t>(l)] = static_cast<double>(lattice[static_cast<std::size_t>(l)]) / N;
        }
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            double value;
            try {
                value = f(point, alphas[a]);
            } catch (const std::exception& e) {
                throw ConstructionError("derivative oracle failed at vertex " + format_vertex(lattice) + ": " +
                                        e.what());
            }
            if (!std::isfinite(value))
                throw ConstructionError("derivative oracle returned a non-finite value at vertex " +
                                        format_vertex(lattice));
            coeffs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(v)) = value / alpha_factorial[a];
        }
    }
    return SimplicialApproximant(d, N, spec, std::move(alphas), std::move(coeffs));
}

double error_certificate(const HolderSpec& spec, int d, int N) {
    if (N < 1) throw DomainError("mesh resolution must be at least 1");
    return (d + 1) * spec.B * std::pow(d, spec.t) * std::pow(N, -spec.zeta);
}

double tensor_product_certificate(const HolderSpec& spec, int d, int N) {
    if (N < 1) throw DomainError("mesh resolution must be at least 1");
    return std::pow(2.0, d) * spec.B * std::pow(d, spec.t) * std::pow(N, -spec.zeta);
}

SizeRecommendation network_size_recommendation(double epsilon, const HolderSpec& spec, int d) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    spec.validate();
    const double dt = std::pow(d, spec.t);
    const double inv_zeta = 1.0 / spec.zeta;
    SizeRecommendation r;
    r.N = tolerant_ceil(std::pow(epsilon, -inv_zeta) * std::pow(2.0 * (d + 1) * spec.B * dt, inv_zeta));
    r.legacy_N = tolerant_ceil(std::pow(epsilon, -inv_zeta) * std::pow(2.0 * std::pow(2.0, d) * spec.B * dt, inv_zeta));
    r.delta = epsilon / (2.0 * (spec.t + 1) * (d + 1) * (d + spec.t) * spec.B * dt);
    r.depth = static_cast<std::size_t>(std::ceil(std::log(1.0 / r.delta))) + 1;
    r.size = dt * std::pow(r.N + 1.0, d) * static_cast<double>(r.depth);
    r.weight_bound = std::pow(epsilon, -d / spec.zeta);
    return r;
}

double SineRidge::value(std::span<const double> x) const {
    double arg = phase;
    for (std::size_t l = 0; l < c.size(); ++l) arg += omega * c[l] * x[l];
    return amplitude * std::sin(arg);
}

double SineRidge::derivative(std::span<const double> x, std::span<const int> alpha) const {
    if (x.size() != c.size() || alpha.size() != c.size()) throw ShapeError("dimension mismatch");
    double arg = phase;
    double scale = amplitude;
    int order = 0;
    for (std::size_t l = 0; l < c.size(); ++l) {
        arg += omega * c[l] * x[l];
        scale *= std::pow(omega * c[l], alpha[l]);
        order += alpha[l];
    }
    // d^k sin(u) = sin(u + k pi/2)
    return scale * std::sin(arg + order * 1.5707963267948966);
}

DerivativeOracle SineRidge::oracle() const {
    return [self = *this](std::span<const double> x, std::span<const int> alpha) { return self.derivative(x, alpha); };
}

double SineRidge::holder_constant(int t) const {
    const int d = dim();
    double l1 = 0.0;
    for (double v : c) l1 += std::abs(v);
    double B = 0.0;
    for (const auto& a : multi_indices(d, t)) {
        double s = amplitude;
        int order = 0;
        for (std::size_t l = 0; l < c.size(); ++l) {
            s *= std::pow(omega * std::abs(c[l]), a[l]);
            order += a[l];
        }
        B = std::max(B, s);
        if (order == t) B = std::max(B, s * omega * l1);
    }
    return B;
}

}  // namespace repshift
