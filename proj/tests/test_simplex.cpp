#include <doctest.h>

#include "repshift/errors.hpp"
#include "repshift/rng.hpp"
#include "repshift/simplex.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

using namespace repshift;

namespace {

// Sum of coef * x^exponents with exact partial derivatives.
struct Polynomial {
    struct Term {
        double coef;
        std::vector<int> exps;
    };
    std::vector<Term> terms;

    double derivative(std::span<const double> x, std::span<const int> alpha) const {
        double total = 0.0;
        for (const auto& term : terms) {
            double v = term.coef;
            for (std::size_t l = 0; l < x.size() && v != 0.0; ++l) {
                const int e = term.exps[l];
                const int a = alpha[l];
                if (a > e) {
                    v = 0.0;
                    break;
                }
                for (int k = 0; k < a; ++k) v *= e - k;
                v *= std::pow(x[l], e - a);
            }
            total += v;
        }
        return total;
    }
    double value(std::span<const double> x) const {
        const std::vector<int> zero(x.size(), 0);
        return derivative(x, zero);
    }
    DerivativeOracle oracle() const {
        return [self = *this](std::span<const double> x, std::span<const int> a) { return self.derivative(x, a); };
    }
};

std::vector<double> random_point(Rng& rng, int d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& v : x) v = u(rng);
    return x;
}

// All lattice points of {0..N}^d.
std::vector<std::vector<int>> lattice(int d, int N) {
    std::vector<std::vector<int>> out{{}};
    for (int l = 0; l < d; ++l) {
        std::vector<std::vector<int>> next;
        for (const auto& p : out)
            for (int k = 0; k <= N; ++k) {
                auto q = p;
                q.push_back(k);
                next.push_back(q);
            }
        out = std::move(next);
    }
    return out;
}

}  // namespace

TEST_CASE("holder spec picks t with zeta - t in (0, 1]") {
    CHECK(HolderSpec::from_smoothness(1.0, 1.0).t == 0);
    CHECK(HolderSpec::from_smoothness(2.0, 1.0).t == 1);
    CHECK(HolderSpec::from_smoothness(2.5, 1.0).t == 2);
    CHECK(HolderSpec::from_smoothness(0.5, 1.0).t == 0);
    CHECK_THROWS_AS(HolderSpec::from_smoothness(0.0, 1.0), DomainError);
    CHECK_THROWS_AS((HolderSpec{2.0, 0, 1.0}.validate()), DomainError);
}

TEST_CASE("locating simplices") {
    const double x[] = {0.1, 0.4};
    const auto s = locate_simplex(x, 2);
    CHECK(s.base == std::vector<int>{0, 0});
    CHECK(s.perm == std::vector<int>{0, 1});
    CHECK(simplex_contains(s, x, 2));
    const auto v = s.vertices();
    CHECK(v[1] == std::vector<int>{0, 1});
    CHECK(v[2] == std::vector<int>{1, 1});

    const double corner[] = {0.5, 1.0};
    const auto c = locate_simplex(corner, 2);
    CHECK(c.base == std::vector<int>{1, 1});
    CHECK(simplex_contains(c, corner, 2));

    const double outside[] = {1.2, 0.0};
    CHECK_THROWS_AS(locate_simplex(outside, 2), DomainError);

    Rng rng(3);
    for (int d = 1; d <= 3; ++d)
        for (int N : {1, 4, 16})
            for (int i = 0; i < 10000; ++i) {
                const auto p = random_point(rng, d);
                const auto sp = locate_simplex(p, N);
                // Re-check the ordered chain 0 <= y_pi(1) <= ... <= y_pi(d) <= 1 directly.
                double prev = 0.0;
                bool ok = true;
                for (int k = 0; k < d; ++k) {
                    const int l = sp.perm[static_cast<std::size_t>(k)];
                    const double y = N * p[static_cast<std::size_t>(l)] - sp.base[static_cast<std::size_t>(l)];
                    ok = ok && y >= prev - 1e-12;
                    prev = y;
                }
                ok = ok && prev <= 1.0 + 1e-12;
                if (!ok) FAIL_CHECK("point outside located simplex");
            }
}

TEST_CASE("barycentric coordinates") {
    SimplexId s{{0, 0, 0}, {2, 0, 1}};
    const int N = 1;
    const auto verts = s.vertices();
    for (std::size_t k = 0; k < verts.size(); ++k) {
        std::vector<double> x(verts[k].begin(), verts[k].end());
        const auto lambda = barycentric(x, s, N);
        for (std::size_t i = 0; i < lambda.size(); ++i) CHECK(lambda[i] == (i == k ? 1.0 : 0.0));
    }
    std::vector<double> centroid(3, 0.0);
    for (const auto& v : verts)
        for (int l = 0; l < 3; ++l) centroid[static_cast<std::size_t>(l)] += v[static_cast<std::size_t>(l)] / 4.0;
    for (double l : barycentric(centroid, s, N)) CHECK(l == doctest::Approx(0.25));

    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const auto x = random_point(rng, 3);
        const auto sp = locate_simplex(x, 4);
        const auto lambda = barycentric(x, sp, 4);
        const auto vs = sp.vertices();
        double sum = 0.0;
        std::vector<double> rebuilt(3, 0.0);
        for (std::size_t k = 0; k < 4; ++k) {
            sum += lambda[k];
            for (int l = 0; l < 3; ++l)
                rebuilt[static_cast<std::size_t>(l)] += lambda[k] * vs[k][static_cast<std::size_t>(l)] / 4.0;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
        for (int l = 0; l < 3; ++l)
            CHECK(std::abs(rebuilt[static_cast<std::size_t>(l)] - x[static_cast<std::size_t>(l)]) < 1e-12);
    }

    const double far[] = {0.9, 0.1, 0.1};
    CHECK_THROWS_AS(barycentric(far, SimplexId{{0, 0, 0}, {0, 1, 2}}, 1), DomainError);
}

TEST_CASE("partition of unity and face consistency") {
    Rng rng(9);
    for (int d = 1; d <= 3; ++d) {
        const int N = 2;
        const auto pts = lattice(d, N);
        for (int i = 0; i < 1000; ++i) {
            const auto x = random_point(rng, d);
            double sum = 0.0;
            int nonzero = 0;
            for (const auto& v : pts) {
                const double w = pou_weight(v, x, N);
                sum += w;
                nonzero += w != 0.0;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
            CHECK(nonzero <= d + 1);
        }
    }

    const double deep[] = {0.1, 0.05};
    const int far[] = {2, 2};
    CHECK(pou_weight(far, deep, 2) == 0.0);

    // (0.3, 0.3) lies on the diagonal face shared by both simplices of cell (0, 0).
    const double face[] = {0.3, 0.3};
    const SimplexId a{{0, 0}, {0, 1}};
    const SimplexId b{{0, 0}, {1, 0}};
    const auto la = barycentric(face, a, 1);
    const auto lb = barycentric(face, b, 1);
    const auto va = a.vertices();
    const auto vb = b.vertices();
    for (std::size_t i = 0; i < va.size(); ++i)
        for (std::size_t j = 0; j < vb.size(); ++j)
            if (va[i] == vb[j]) CHECK(std::abs(la[i] - lb[j]) < 1e-12);
}

TEST_CASE("multi-index order") {
    const auto a = multi_indices(2, 2);
    const std::vector<std::vector<int>> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    CHECK(a == expected);
    CHECK(multi_indices(3, 0).size() == 1);
    CHECK(multi_indices(3, 2).size() == 10);
}

TEST_CASE("building approximants") {
    const auto spec = HolderSpec::from_smoothness(3.0, 1.0);
    const DerivativeOracle constant = [](std::span<const double>, std::span<const int> a) {
        for (int v : a)
            if (v) return 0.0;
        return 2.5;
    };
    const auto c = build_approximant(constant, 2, spec, 3);
    CHECK(c.num_vertices() == 16);
    CHECK((c.coefficients().row(0).array() == 2.5).all());
    CHECK((c.coefficients().bottomRows(5).array() == 0.0).all());

    const Polynomial sum{{{1.0, {1, 0, 0}}, {1.0, {0, 1, 0}}, {1.0, {0, 0, 1}}}};
    const auto s = build_approximant(sum.oracle(), 3, HolderSpec::from_smoothness(2.0, 1.0), 2);
    for (std::size_t v = 0; v < s.num_vertices(); ++v)
        for (std::size_t k = 1; k <= 3; ++k) CHECK(s.coefficients()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) == 1.0);

    const SineRidge wave{{1.0}, 2.0 * std::numbers::pi, 0.0, 1.0};
    const auto w = build_approximant(wave.oracle(), 1, HolderSpec::from_smoothness(2.0, 1.0), 8);
    CHECK(w.num_vertices() == 9);
    for (int k = 0; k <= 8; ++k) {
        const int v[] = {k};
        const double angle = 2.0 * std::numbers::pi * k / 8.0;
        CHECK(std::abs(w.coefficient(v, 0) - std::sin(angle)) < 1e-14);
        CHECK(std::abs(w.coefficient(v, 1) - 2.0 * std::numbers::pi * std::cos(angle)) < 1e-12);
    }

    const DerivativeOracle broken = [](std::span<const double> x, std::span<const int>) {
        if (x[0] > 0.6) throw std::runtime_error("no data");
        return 0.0;
    };
    try {
        build_approximant(broken, 1, HolderSpec::from_smoothness(1.0, 1.0), 4);
        FAIL("expected construction error");
    } catch (const ConstructionError& e) {
        CHECK(std::string(e.what()).find("(3)") != std::string::npos);
    }
    const DerivativeOracle nan = [](std::span<const double>, std::span<const int>) { return std::nan(""); };
    CHECK_THROWS_AS(build_approximant(nan, 1, HolderSpec::from_smoothness(1.0, 1.0), 2), ConstructionError);
}

TEST_CASE("polynomials up to the Taylor order are reproduced") {
    const Polynomial quad{{{1.0, {0, 0, 0}}, {2.0, {1, 0, 0}}, {-1.0, {0, 1, 0}}, {0.5, {1, 1, 0}}, {1.5, {0, 0, 2}}}};
    const auto spec = HolderSpec::from_smoothness(3.0, 1.0);
    Rng rng(17);
    for (int N : {1, 2, 8}) {
        const auto p = build_approximant(quad.oracle(), 3, spec, N);
        for (int i = 0; i < 1000; ++i) {
            const auto x = random_point(rng, 3);
            CHECK(std::abs(p.evaluate(x) - quad.value(x)) <= 1e-10);
        }
    }
}

TEST_CASE("approximants are continuous across faces") {
    const SineRidge f{{0.7, 0.4}, 2.0, 0.1, 1.0};
    const auto p = build_approximant(f.oracle(), 2, HolderSpec::from_smoothness(2.0, f.holder_constant(1)), 4);
    const double face[] = {0.3, 0.3};
    CHECK(std::abs(p.evaluate_in(face, {{1, 1}, {0, 1}}) - p.evaluate_in(face, {{1, 1}, {1, 0}})) < 1e-12);
    const double edge[] = {0.5, 0.1};
    CHECK(std::abs(p.evaluate_in(edge, {{1, 0}, {1, 0}}) - p.evaluate_in(edge, {{2, 0}, {0, 1}})) < 1e-12);
}

TEST_CASE("sup error stays under the certificate and decays at the smoothness rate") {
    const SineRidge f{{0.5, 0.5}, 2.0 * std::numbers::pi, 0.0, 1.0};
    const auto spec = HolderSpec::from_smoothness(2.0, f.holder_constant(1));
    std::vector<double> sup;
    for (int N : {8, 16}) {
        const auto p = build_approximant(f.oracle(), 2, spec, N);
        Rng rng(23);
        double s = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const auto x = random_point(rng, 2);
            s = std::max(s, std::abs(p.evaluate(x) - f.value(x)));
        }
        CHECK(s <= error_certificate(spec, 2, N));
        sup.push_back(s);
    }
    const double ratio = sup[0] / sup[1];
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.3);
}

TEST_CASE("finite-difference oracle") {
    const SineRidge f{{1.0, 0.5}, 1.3, 0.2, 1.0};
    const auto fd = finite_difference_oracle([&](std::span<const double> x) { return f.value(x); }, default_fd_step(8));
    const double x[] = {0.4, 0.7};
    for (const auto& a : multi_indices(2, 2)) CHECK(std::abs(fd(x, a) - f.derivative(x, a)) < 1e-5);
    CHECK(default_fd_step(8) == 1e-5);
    CHECK(default_fd_step(1000) == doctest::Approx(1e-4));
}

TEST_CASE("certificates") {
    const HolderSpec lip{1.0, 0, 1.0};
    CHECK(error_certificate(lip, 3, 10) == doctest::Approx(0.4));
    CHECK(error_certificate(lip, 3, 20) == doctest::Approx(0.2));
    CHECK(error_certificate(lip, 1, 7) == tensor_product_certificate(lip, 1, 7));
    CHECK(tensor_product_certificate(lip, 3, 10) == doctest::Approx(0.8));
    CHECK_THROWS_AS(error_certificate(lip, 1, 0), DomainError);
}

TEST_CASE("network size recommendation") {
    const HolderSpec lip{1.0, 0, 1.0};
    const auto r = network_size_recommendation(0.1, lip, 1);
    CHECK(r.N == 40);
    CHECK(network_size_recommendation(0.05, lip, 1).N == 80);
    const auto r3 = network_size_recommendation(0.1, lip, 3);
    CHECK(r3.legacy_N == 2 * r3.N);
    CHECK(r.delta == doctest::Approx(0.1 / (2.0 * 1 * 2 * 1)));
    CHECK_THROWS_AS(network_size_recommendation(1.5, lip, 1), DomainError);
}

TEST_CASE("approximant text export") {
    const SineRidge f{{1.0}, 1.0, 0.0, 1.0};
    const auto p = build_approximant(f.oracle(), 1, HolderSpec::from_smoothness(2.0, 1.0), 2);
    std::ostringstream os;
    p.save(os);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "d N zeta t B");
    int d, N, t;
    double zeta, B;
    is >> d >> N >> zeta >> t >> B;
    CHECK(d == 1);
    CHECK(N == 2);
    CHECK(zeta == 2.0);
    CHECK(t == 1);
    int lines = 0;
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) lines += !line.empty();
    CHECK(lines == 3);
}
