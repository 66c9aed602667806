#include "doctest.h"

#include "gq/degeneration.hpp"
#include "gq/error.hpp"

#include <cmath>
#include <numbers>

using namespace gq;

namespace {

AlmostKahlerStructure toric(const DelzantPolytope& P, double eps = 0.0) {
    ManifoldDescriptor d;
    d.polytope = P;
    if (eps != 0.0) {
        d.epsilon = eps;
        d.perturbation_shape = Polynomial::constant(P.dimension(), 1.0);
    }
    return build_structure(d);
}

Embedding embed(const AlmostKahlerStructure& s, int k) { return kodaira_embed(toric_basis(s, k), s); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Independent oracle for the flow value of a torus action:
// int_{kP} <d, y> dy - Vol(kP) * mean_lambda <d, lambda>, with the first term
// from a product Gauss rule over the bounding box and the lattice mean by direct summation.
double flow_oracle(const DelzantPolytope& P, const Eigen::VectorXd& d, int k) {
    const auto [x, w] = gauss_legendre(40);
    const int n = P.dimension();
    double box_hi = 0.0;
    for (const auto& v : P.vertices_double()) box_hi = std::max(box_hi, v.maxCoeff());
    double integral = 0.0, volume = 0.0;
    // the test polytopes are cut from [0, box_hi]^n by their facets; integrate piecewise in y
    // on a fine split so that the slanted facets are resolved
    const int pieces = 64;
    auto inside_length = [&](double y) {
        // x-extent of P at height y (n = 2)
        double lo = -1e300, hi = 1e300;
        for (const auto& f : P.facets()) {
            const double a = f.normal(0), b = f.normal(1), c = to_double(f.offset);
            if (a > 0) lo = std::max(lo, (c - b * y) / a);
            else if (a < 0) hi = std::min(hi, (c - b * y) / a);
            else if (b * y < c - 1e-14) return std::pair<double, double>{0.0, 0.0};
        }
        return std::pair<double, double>{lo, std::max(lo, hi)};
    };
    if (n == 1) {
        const auto vs = P.vertices_double();
        const double a = vs.front()(0), b = vs.back()(0);
        integral = d(0) * (b * b - a * a) / 2.0;
        volume = b - a;
    } else {
        for (int piece = 0; piece < pieces; ++piece) {
            const double y0 = box_hi * piece / pieces, y1 = box_hi * (piece + 1) / pieces;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * x(i);
                const double wy = 0.5 * (y1 - y0) * w(i);
                const auto [lo, hi] = inside_length(y);
                const double len = hi - lo;
                volume += wy * len;
                integral += wy * (d(0) * 0.5 * (hi * hi - lo * lo) + d(1) * y * len);
            }
        }
    }
    const auto pts = P.lattice_points(k);
    double mean = 0.0;
    for (const auto& p : pts) mean += d.dot(p.cast<double>());
    mean /= static_cast<double>(pts.size());
    return std::pow(k, n + 1) * integral - std::pow(k, n) * volume * mean;
}

}  // namespace

TEST_CASE("round sphere: f vanishes at t = 1 and does not exceed f(1) at t = 0.5") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    const auto e = embed(s, 10);
    const auto W = weight_matrix(s, vec({1}), 10);
    const FlowState one = flow_f(e, s, W, 1.0);
    CHECK(std::abs(one.f_trace) < 1e-8);
    CHECK(std::abs(one.f_integral) < 1e-8);
    const FlowState half = flow_f(e, s, W, 0.5);
    CHECK(half.f_trace <= one.f_trace + 1e-9);
}

TEST_CASE("trivial action gives f = 0 for every t") {
    const auto s = toric(DelzantPolytope::hirzebruch(), 0.05);
    const auto e = embed(s, 4);
    const auto W = weight_matrix(s, vec({0, 0}), 4, 2);
    for (double t : {1.0, 0.3, 1e-3}) {
        const FlowState st = flow_f(e, s, W, t);
        CHECK(st.f_trace == 0.0);
        CHECK(std::abs(st.f_integral) < 1e-10);
    }
}

TEST_CASE("endpoint agrees with the moment matrix of the embedding") {
    for (const auto& [s, d, k] : {std::tuple{toric(DelzantPolytope::interval(0, 1), 0.1), vec({1}), 12},
                                  std::tuple{toric(DelzantPolytope::hirzebruch(), 0.05), vec({0, 1}), 6},
                                  std::tuple{toric(DelzantPolytope::standard_triangle()), vec({1, 0}), 5}}) {
        const auto e = embed(s, k);
        const auto W = weight_matrix(s, d, k);
        const FlowState st = flow_f(e, s, W, 1.0);
        const MomentMatrix M = moment_matrix(e);
        const double embed_f = -W.trace_free_diagonal().dot(M.matrix.diagonal().real());
        CHECK(std::abs(st.chart_f - embed_f) < 1e-12 * std::max(1.0, std::abs(embed_f)));
        CHECK(std::abs(st.f_trace - embed_f) < 1e-8 * std::max(1.0, std::abs(embed_f)));
        CHECK(std::abs(st.f_trace - st.f_integral) < 1e-8);
    }
}

TEST_CASE("flow value against an independent quadrature of kP") {
    const auto s = toric(DelzantPolytope::hirzebruch(), 0.05);
    for (int k : {3, 6}) {
        const auto e = embed(s, k);
        for (const Eigen::VectorXd& d : {vec({0, 1}), vec({1, 0}), vec({1, 1})}) {
            const auto W = weight_matrix(s, d, k);
            const double oracle = flow_oracle(s.polytope(), d, k);
            CHECK(to_double(toric_flow_value(s.polytope(), W)) == doctest::Approx(oracle).epsilon(1e-12));
            for (double t : {1.0, 0.1, 1e-3})
                CHECK(flow_f(e, s, W, t).f_trace == doctest::Approx(oracle).epsilon(1e-9));
        }
    }
}

TEST_CASE("geometric grid") {
    const auto ts = geometric_grid();
    CHECK(ts.front() == 1.0);
    CHECK(ts.back() == 1e-3);
    CHECK(ts.size() == 32);
    CHECK_THROWS_AS(geometric_grid(0.0), InvalidStructure);
}

TEST_CASE("monotonicity on the round sphere, volume conservation and formula agreement") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    const auto e = embed(s, 8);
    const auto W = weight_matrix(s, vec({1}), 8);
    const auto r = monotonicity_check(e, s, W, geometric_grid());
    CHECK(r.monotone);
    CHECK(r.ts.front() == doctest::Approx(1e-3));
    CHECK(r.volume_spread < 1e-8);
    CHECK(r.formula_gap < 1e-8);
    for (double f : r.f) CHECK(std::abs(f) < 1e-9);
    CHECK_THROWS_AS(monotonicity_check(e, s, W, {1.0, 0.5, 0.1}), InvalidStructure);
}

TEST_CASE("Hirzebruch destabilizing flow: monotone, constant in t, equal to the closed form") {
    const auto s = toric(DelzantPolytope::hirzebruch());
    const auto e = embed(s, 8);
    const auto W = weight_matrix(s, vec({0, 1}), 8);
    const auto r = monotonicity_check(e, s, W, geometric_grid());
    CHECK(r.monotone);
    // a torus action on a toric manifold only re-parametrizes the moment polytope,
    // so f is constant along the flow rather than strictly increasing
    CHECK_FALSE(r.strictly_increasing);
    const double exact = to_double(toric_flow_value(s.polytope(), W));
    CHECK(exact == doctest::Approx(256.0 / 39.0).epsilon(1e-15));
    for (double f : r.f) CHECK(f == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("original-chart quadrature degrades while the image chart stays exact") {
    const auto s = toric(DelzantPolytope::interval(0, 1), 0.1);
    const auto e = embed(s, 10);
    const auto W = weight_matrix(s, vec({1}), 10);
    const FlowState one = flow_f(e, s, W, 1.0);
    const FlowState small = flow_f(e, s, W, 1e-3);
    CHECK(one.mass_concentration < 1e6);
    CHECK(small.mass_concentration > 1e6);
    CHECK(std::abs(small.chart_volume - 10.0) > 0.1);
    CHECK(small.volume == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::abs(small.f_trace - one.f_trace) < 1e-9);
}

TEST_CASE("f is unchanged by the lift shift") {
    const auto s = toric(DelzantPolytope::hirzebruch(), 0.05);
    const auto e = embed(s, 5);
    const auto W0 = weight_matrix(s, vec({1, 1}), 5, 0);
    const auto W3 = weight_matrix(s, vec({1, 1}), 5, 3);
    for (double t : {1.0, 0.2}) CHECK(flow_f(e, s, W3, t).f_trace == doctest::Approx(flow_f(e, s, W0, t).f_trace).epsilon(1e-12));
    CHECK(toric_flow_value(s.polytope(), W3) == toric_flow_value(s.polytope(), W0));
}

TEST_CASE("limit tracks k^n (b1 - (a1/a0) b0) with an O(k^{n-1}) gap") {
    const auto s = toric(DelzantPolytope::hirzebruch());
    const auto inv = invariant_report(s, vec({0, 1}), {1, 2, 3, 4, 5, 6});
    const double leading_coefficient = to_double(inv.b1 - inv.a1 / inv.a0 * inv.b0);
    CHECK(leading_coefficient == doctest::Approx(1.0 / 9.0));
    std::vector<double> scaled_gap;
    for (int k : {6, 8, 10}) {
        const auto e = embed(s, k);
        const auto W = weight_matrix(s, vec({0, 1}), k);
        const LimitEstimate L = limit_f(e, s, W);
        CHECK_FALSE(L.oscillating);
        CHECK(L.f_min_t == doctest::Approx(to_double(L.exact)).epsilon(1e-10));
        CHECK(L.extrapolation_gap < 1e-8);
        CHECK(L.mass_concentration > 1e6);
        scaled_gap.push_back((L.f_min_t - k * k * leading_coefficient) / k);
    }
    // the O(k) remainder settles
    CHECK(std::abs(scaled_gap[2] - scaled_gap[1]) < std::abs(scaled_gap[1] - scaled_gap[0]));
    CHECK(std::abs(scaled_gap[2]) < 1.0);
}

TEST_CASE("Cauchy-Schwarz chain") {
    SUBCASE("round sphere is tight at zero") {
        const auto s = toric(DelzantPolytope::interval(0, 1));
        const auto e = embed(s, 10);
        const auto W = weight_matrix(s, vec({1}), 10);
        const ChainLink c = chain_link(e, s, W, limit_f(e, s, W));
        CHECK(c.norm_m < 1e-8);
        CHECK(std::abs(c.f_one) < 1e-8);
        CHECK(std::abs(c.f_min_t) < 1e-8);
    }
    SUBCASE("perturbed sphere has a positive left side") {
        const auto s = toric(DelzantPolytope::interval(0, 1), 0.1);
        const auto e = embed(s, 10);
        const auto W = weight_matrix(s, vec({1}), 10);
        const ChainLink c = chain_link(e, s, W, limit_f(e, s, W));
        CHECK(c.norm_a * c.norm_m > 1e-3);
        CHECK(c.slack >= -1e-8);
    }
    SUBCASE("a broken link is reported") {
        const auto s = toric(DelzantPolytope::interval(0, 1), 0.1);
        const auto e = embed(s, 10);
        const auto W = weight_matrix(s, vec({1}), 10);
        LimitEstimate fake;
        fake.f_min_t = 1.0;
        CHECK_THROWS_AS(chain_link(e, s, W, fake), NumericalFault);
        CHECK_THROWS_AS(flow_f(e, s, W, 0.0), InvalidStructure);
        CHECK_THROWS_AS(flow_f(e, s, weight_matrix(s, vec({1}), 9), 0.5), InvalidStructure);
    }
}

TEST_CASE("Richardson extrapolation is exact on a + b/k + c/k^2") {
    std::vector<double> ks{10, 15, 20}, v;
    for (double k : ks) v.push_back(2.5 - 3.0 / k + 7.0 / (k * k));
    CHECK(richardson(ks, v) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("Hirzebruch: extrapolated bound matches the Futaki bound") {
    const auto s = toric(DelzantPolytope::hirzebruch());
    const auto inv = invariant_report(s, vec({0, 1}), {1, 2, 3, 4, 5, 6});
    std::vector<ChainLink> links;
    for (int k : {10, 15, 20}) {
        const auto e = embed(s, k);
        const auto W = weight_matrix(s, vec({0, 1}), k);
        LimitEstimate L;
        L.f_min_t = flow_f(e, s, W, 1e-3).f_trace;
        links.push_back(chain_link(e, s, W, L));
    }
    const InequalityReport r = assemble_bound(links, inv, curvature_deviation(s));
    CHECK(r.futaki_bound == doctest::Approx(4.0 * std::numbers::pi / 9.0 / std::sqrt(13.0 / 108.0)));
    CHECK(r.relative_gap < 0.05);
    for (const auto& c : r.links) CHECK(c.normalized_lhs >= c.normalized_rhs);
    CHECK(r.curvature_deviation >= r.extrapolated_rhs);
    const auto j = to_json(r);
    CHECK(j["links"].size() == 3);
}
