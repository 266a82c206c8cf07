#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace repshift {

/// Hoelder smoothness zeta = t + sigma with sigma in (0, 1] and constant B.
struct HolderSpec {
    double zeta = 1.0;
    int t = 0;
    double B = 1.0;

    /// t = ceil(zeta) - 1, so sigma = zeta - t lies in (0, 1].
    static HolderSpec from_smoothness(double zeta, double B);
    void validate() const;
};

/// Freudenthal simplex S_{v,pi}: lattice cell with lower corner base/N and
/// coordinates ordered by pi (perm[0] has the smallest fractional offset).
struct SimplexId {
    std::vector<int> base;
    std::vector<int> perm;

    int dim() const { return static_cast<int>(base.size()); }
    /// The d+1 lattice vertices (integer coordinates, divide by N for points).
    /// vertex 0 = base, vertex k adds e_{perm[d-k]} to vertex k-1.
    std::vector<std::vector<int>> vertices() const;

    bool operator==(const SimplexId&) const = default;
};

/// Simplex containing x. Cell index is floor(N x_l), clamped to N-1 at the
/// upper face; ties between equal offsets keep coordinate order.
SimplexId locate_simplex(std::span<const double> x, int N);

/// True when x satisfies 0 <= y_{pi(1)} <= ... <= y_{pi(d)} <= 1 with
/// y = N (x - v), up to tol.
bool simplex_contains(const SimplexId& s, std::span<const double> x, int N, double tol = 1e-12);

/// Barycentric coordinates of x with respect to s.vertices(). Throws
/// DomainError when x lies outside s by more than 1e-9.
std::vector<double> barycentric(std::span<const double> x, const SimplexId& s, int N);

/// psi_v(x): barycentric weight of lattice vertex v at x (0 when v is not a
/// vertex of the simplex containing x).
double pou_weight(std::span<const int> vertex, std::span<const double> x, int N);

/// Multi-indices with |alpha| <= t, by total degree then lexicographically
/// descending ((2,0), (1,1), (0,2) for d = 2, t = 2).
std::vector<std::vector<int>> multi_indices(int d, int t);

/// Returns d^alpha f(x) for a multi-index alpha.
using DerivativeOracle = std::function<double(std::span<const double> x, std::span<const int> alpha)>;

/// Central finite-difference oracle for f with step h.
DerivativeOracle finite_difference_oracle(std::function<double(std::span<const double>)> f, double h);
/// Step used when no analytic derivatives are supplied: max(1e-5, 1e-7 N).
double default_fd_step(int N);

/// p(x) = sum_v psi_v(x) T_v(x), T_v the order-t Taylor polynomial of f at v.
class SimplicialApproximant {
public:
    SimplicialApproximant(int d, int N, HolderSpec spec, std::vector<std::vector<int>> alphas,
                          Eigen::MatrixXd coefficients);

    int dim() const noexcept { return d_; }
    int resolution() const noexcept { return N_; }
    const HolderSpec& spec() const noexcept { return spec_; }
    const std::vector<std::vector<int>>& alphas() const noexcept { return alphas_; }
    std::size_t num_vertices() const noexcept { return static_cast<std::size_t>(coeffs_.cols()); }
    /// Rows follow alphas(), columns are vertices in lexicographic order
    /// with the first coordinate varying fastest.
    const Eigen::MatrixXd& coefficients() const noexcept { return coeffs_; }
    double coefficient(std::span<const int> vertex, std::size_t alpha_index) const;

    std::size_t vertex_index(std::span<const int> vertex) const;
    std::vector<int> vertex_at(std::size_t index) const;

    double evaluate(std::span<const double> x) const;
    /// Evaluates through a caller-chosen simplex containing x.
    double evaluate_in(std::span<const double> x, const SimplexId& s) const;

    /// Header "d N zeta t B" then one line per vertex: lattice indices
    /// followed by coefficients in multi-index order.
    void save(std::ostream& os) const;

private:
    double taylor(std::size_t vertex, std::span<const int> lattice, std::span<const double> x) const;

    int d_;
    int N_;
    HolderSpec spec_;
    std::vector<std::vector<int>> alphas_;
    Eigen::MatrixXd coeffs_;
};

/// Stores tau_{v,alpha} = d^alpha f(v) / alpha! at all (N+1)^d vertices.
/// Throws ConstructionError naming the vertex when the oracle throws or
/// returns a non-finite value.
SimplicialApproximant build_approximant(const DerivativeOracle& f, int d, const HolderSpec& spec, int N);

/// (d+1) B d^t N^(-zeta).
double error_certificate(const HolderSpec& spec, int d, int N);
/// 2^d B d^t N^(-zeta), the tensor-product partition constant.
double tensor_product_certificate(const HolderSpec& spec, int d, int N);

struct SizeRecommendation {
    int N = 0;                  // mesh resolution for accuracy epsilon
    int legacy_N = 0;           // same with the 2^d tensor-product constant
    double delta = 0.0;         // product-gadget accuracy
    std::size_t depth = 0;      // ~ ln(1/delta) + 1
    double size = 0.0;          // ~ d^t (N+1)^d depth
    double weight_bound = 0.0;  // ~ epsilon^(-d/zeta)
};

/// Orders of depth/size/weight bound for a ReLU network reaching accuracy
/// epsilon, with all unspecified constants set to one. Advisory only.
SizeRecommendation network_size_recommendation(double epsilon, const HolderSpec& spec, int d);

/// f(x) = amplitude * sin(omega * c.x + phase). A family with closed-form
/// derivatives of every order and an exact Hoelder constant.
struct SineRidge {
    std::vector<double> c;
    double omega = 1.0;
    double phase = 0.0;
    double amplitude = 1.0;

    int dim() const { return static_cast<int>(c.size()); }
    double value(std::span<const double> x) const;
    double derivative(std::span<const double> x, std::span<const int> alpha) const;
    DerivativeOracle oracle() const;
    /// B with f in H^{t+1}([0,1]^d, B) under the sup-norm, taking
    /// |sin|, |cos| <= 1: bounds every derivative up to order t and the
    /// Lipschitz constant of the order-t derivatives.
    double holder_constant(int t) const;
};

}  // namespace repshift
