#include "doctest.h"

#include "gq/error.hpp"
#include "gq/invariants.hpp"

#include <cmath>
#include <numbers>

using namespace gq;

namespace {

AlmostKahlerStructure toric(const std::string& preset) {
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::preset(preset);
    return build_structure(d);
}

Eigen::VectorXd dir(std::initializer_list<double> v) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) d(i++) = x;
    return d;
}

std::vector<long> levels(long lo, long hi) {
    std::vector<long> ks;
    for (long k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
}

Rational R(long p, long q = 1) { return Rational(p) / Rational(q); }

}  // namespace

TEST_CASE("weight matrices") {
    const auto cp1 = toric("cp1");
    for (int k : {1, 5, 50}) {
        const auto A = weight_matrix(cp1, dir({1}), k);
        REQUIRE(A.size() == k + 1);
        for (int j = 0; j <= k; ++j) CHECK(A.weights[static_cast<std::size_t>(j)] == -j);
        CHECK(A.trace() == R(-k * (k + 1), 2));
        CHECK(A.trace_free_square() == R(k * (k + 1) * (k + 2), 12));
        Rational sum = 0;
        for (const auto& w : A.trace_free()) sum += w;
        CHECK(sum == 0);
    }
    const auto zero = weight_matrix(cp1, dir({0}), 7);
    CHECK(zero.trace() == 0);
    CHECK(zero.trace_free_square() == 0);

    const auto sq = weight_matrix(toric("square"), dir({1, 0}), 2);
    // lattice order is lexicographic, so the first coordinate is constant in blocks of three
    CHECK(sq.weights == std::vector<long>{0, 0, 0, -1, -1, -1, -2, -2, -2});
    CHECK(sq.trace() == -9);

    CHECK_THROWS_AS(weight_matrix(cp1, dir({0.5}), 3), LiftObstruction);
    ManifoldDescriptor flat;
    flat.kind = ManifoldKind::FlatTorus;
    CHECK_THROWS_AS(weight_matrix(build_structure(flat), dir({1, 0}), 3), InvalidStructure);
}

TEST_CASE("trace coefficients and chi on the interval") {
    const auto cp1 = toric("cp1");
    std::vector<long> ks = levels(1, 50);
    std::vector<Rational> traces;
    std::vector<WeightMatrix> weights;
    for (long k : ks) {
        weights.push_back(weight_matrix(cp1, dir({1}), static_cast<int>(k)));
        traces.push_back(weights.back().trace());
    }
    const auto t = trace_coefficients(ks, traces, 1);
    CHECK(t.b0 == R(-1, 2));
    CHECK(t.b1 == R(-1, 2));
    const auto c = chi_norm(weights, 1);
    CHECK(c.squared == R(1, 12));
    CHECK(c.trace_square_polynomial[3] == R(1, 3));

    const auto trivial = trace_coefficients({1, 2, 3, 4}, {0, 0, 0, 0}, 1);
    CHECK(trivial.b0 == 0);
    CHECK(trivial.b1 == 0);

    traces[7] += 1;
    CHECK_THROWS_AS(trace_coefficients(ks, traces, 1), TraceAnomaly);
    CHECK_THROWS_AS(trace_coefficients({1, 2, 3}, {R(-1), R(-3), R(-6)}, 1), FitError);
}

TEST_CASE("b0 is minus the integral of h") {
    // [0,2] is asymmetric about the origin: the sign of b0 fixes the weight convention
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::interval(0, 2);
    const auto s = build_structure(d);
    for (double sign : {1.0, -1.0}) {
        std::vector<Rational> traces;
        for (long k = 1; k <= 6; ++k) traces.push_back(weight_matrix(s, dir({sign}), static_cast<int>(k)).trace());
        const auto t = trace_coefficients(levels(1, 6), traces, 1);
        CHECK(t.b0 == Rational(static_cast<long>(-2 * sign)));
        const auto h = hamiltonian(s, dir({sign}));
        CHECK(to_double(t.b0) == doctest::Approx(-h.weights.dot(h.values)).epsilon(1e-13));
    }
}

TEST_CASE("Futaki invariant vanishes on symmetric polytopes") {
    for (const std::string name : {"cp1", "square", "triangle"}) {
        const auto s = toric(name);
        std::vector<Eigen::VectorXd> dirs;
        if (s.dimension() == 1) dirs = {dir({1}), dir({-3})};
        else dirs = {dir({1, 0}), dir({0, 1}), dir({1, 1}), dir({2, -1})};
        for (const auto& d : dirs) {
            const auto r = invariant_report(s, d, levels(1, 8));
            CHECK(r.futaki == 0);
            CHECK(!r.informative);
            CHECK(std::abs(r.oracle_futaki) < 1e-13);
            CHECK(std::abs(r.oracle_curvature) < 1e-12);
        }
    }
    const auto sq = invariant_report(toric("square"), dir({1, 1}), levels(1, 8));
    CHECK(sq.chi_squared == R(1, 6));
}

TEST_CASE("Hirzebruch surface: exact invariants and oracles") {
    const auto s = toric("hirzebruch");
    const auto r01 = invariant_report(s, dir({0, 1}), levels(1, 8));
    CHECK(r01.a0 == R(3, 2));
    CHECK(r01.a1 == R(5, 2));
    CHECK(r01.b0 == R(-2, 3));
    CHECK(r01.b1 == R(-1));
    CHECK(r01.futaki == R(-1, 9));
    CHECK(r01.chi_squared == R(13, 108));
    CHECK(r01.deviation_boundary < 1e-10);
    CHECK(r01.deviation_curvature < 1e-10);
    CHECK(r01.informative);
    CHECK(r01.lower_bound == doctest::Approx(4.0 * std::numbers::pi / 9.0 / std::sqrt(13.0 / 108.0)));

    const auto r10 = invariant_report(s, dir({1, 0}), levels(1, 8));
    const auto r21 = invariant_report(s, dir({2, 1}), levels(1, 8));
    CHECK(r10.futaki == R(1, 18));
    // linearity in the direction
    CHECK(r21.futaki == 2 * r10.futaki + r01.futaki);
    CHECK(r21.futaki == 0);

    // inverse action: F flips sign, ||chi|| does not
    const auto neg = invariant_report(s, dir({0, -1}), levels(1, 8));
    CHECK(neg.futaki == -r01.futaki);
    CHECK(neg.chi_squared == r01.chi_squared);

    // m-fold cover
    const auto triple = invariant_report(s, dir({0, 3}), levels(1, 8));
    CHECK(triple.b0 == 3 * r01.b0);
    CHECK(triple.b1 == 3 * r01.b1);
    CHECK(triple.futaki == 3 * r01.futaki);
    CHECK(triple.chi_squared == 9 * r01.chi_squared);
    CHECK(triple.lower_bound == doctest::Approx(r01.lower_bound).epsilon(1e-14));

    const auto j = to_json(r01);
    CHECK(j.at("futaki") == "-1/9");
    CHECK(j.at("chi_norm_squared") == "13/108");
    CHECK(j.contains("deviations"));
}

TEST_CASE("lift invariance") {
    const auto s = toric("hirzebruch");
    std::vector<long> ks = levels(1, 8);
    std::vector<WeightMatrix> plain, shifted;
    std::vector<Rational> t_plain, t_shifted, t_flat;
    for (long k : ks) {
        plain.push_back(weight_matrix(s, dir({1, 0}), static_cast<int>(k)));
        shifted.push_back(weight_matrix(s, dir({1, 0}), static_cast<int>(k), 5));
        CHECK(shifted.back().trace() == plain.back().trace() + 5 * k * plain.back().size());
        CHECK(shifted.back().trace_free() == plain.back().trace_free());
        t_plain.push_back(plain.back().trace());
        t_shifted.push_back(shifted.back().trace());
        t_flat.push_back(plain.back().trace() + 5 * plain.back().size());
    }
    const auto e = ehrhart_coefficients(s.polytope(), ks);
    const auto F = [&](const TraceCoefficients& t) { return e.a1 / e.a0 * t.b0 - t.b1; };
    const auto a = trace_coefficients(ks, t_plain, 2);
    const auto b = trace_coefficients(ks, t_shifted, 2);
    CHECK(F(a) == F(b));
    CHECK(chi_norm(plain, 2).squared == chi_norm(shifted, 2).squared);
    // a shift that ignores the level is not a change of lift and moves F by -c a0
    CHECK(F(trace_coefficients(ks, t_flat, 2)) == F(a) - 5 * e.a0);
}

TEST_CASE("Tr of the trace-free square approaches ||chi||^2 at rate 1/k") {
    const auto s = toric("hirzebruch");
    const Rational chi2 = R(13, 108);
    double prev = 0.0;
    for (int k : {10, 20, 40, 80}) {
        const auto A = weight_matrix(s, dir({0, 1}), k);
        const double gap = std::abs(to_double(A.trace_free_square() / Rational(k * k * k * k) - chi2));
        if (prev > 0) CHECK(prev / gap == doctest::Approx(2.0).epsilon(0.1));
        prev = gap;
    }
}

TEST_CASE("futaki preconditions") {
    CHECK_THROWS_AS(futaki(R(1), R(1), R(1), R(0), R(0)), InconsistentAction);
    const auto r = futaki(R(1), R(1), R(0), R(0), R(0));
    CHECK(r.lower_bound == 0.0);
    CHECK(!r.informative);
}

TEST_CASE("curvature deviation bounds the Futaki quotient for random potentials") {
    std::mt19937_64 rng(20240601);
    struct Case {
        std::string name;
        std::vector<Eigen::VectorXd> dirs;
    };
    const std::vector<Case> cases = {
        {"cp1", {dir({1})}},
        {"square", {dir({1, 0}), dir({1, 1})}},
        {"triangle", {dir({1, 0}), dir({1, -1})}},
        {"hirzebruch", {dir({1, 0}), dir({0, 1}), dir({1, 1})}},
    };
    for (const auto& c : cases) {
        const auto base = toric(c.name);
        std::vector<double> bounds;
        for (const auto& d : c.dirs) bounds.push_back(invariant_report(base, d, levels(1, 8)).lower_bound);
        for (int sample = 0; sample < 20; ++sample) {
            const auto s = random_admissible_structure(base.polytope(), rng);
            CHECK(s.potential().epsilon() > 0.0);
            const double dev = curvature_deviation(s);
            for (double b : bounds) CHECK(dev >= b - 1e-8);
        }
    }
}

TEST_CASE("oracle is independent of the compatible potential") {
    const auto s = toric("hirzebruch");
    ManifoldDescriptor d;
    d.polytope = s.polytope();
    d.epsilon = 0.05;
    d.perturbation_shape = Polynomial::affine(1.0, dir({0.3, -0.2}));
    const auto p = build_structure(d);
    const auto a = futaki_oracle(s, dir({0, 1}));
    const auto b = futaki_oracle(p, dir({0, 1}));
    CHECK(std::abs(a.curvature - b.curvature) < 1e-8);
    CHECK(std::abs(a.boundary - b.boundary) < 1e-14);
    CHECK(a.chi_squared == doctest::Approx(13.0 / 108.0).epsilon(1e-12));
}
