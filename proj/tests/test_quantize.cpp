#include "doctest.h"

#include "gq/error.hpp"
#include "gq/quantize.hpp"

#include <cmath>
#include <sstream>

using namespace gq;

namespace {

AlmostKahlerStructure toric(const DelzantPolytope& P, double eps = 0.0, int order = 64) {
    ManifoldDescriptor d;
    d.polytope = P;
    d.quadrature_order = order;
    if (eps != 0.0) {
        d.epsilon = eps;
        d.perturbation_shape = Polynomial::constant(P.dimension(), 1.0);
    }
    return build_structure(d);
}

Facet facet(int a, int b, const char* offset) {
    Facet f;
    f.normal = Eigen::Vector2i(a, b);
    f.offset = parse_rational(offset);
    return f;
}

}  // namespace

TEST_CASE("dimension examples") {
    BasisOptions enumerate;
    enumerate.evaluate = false;
    const auto cp1 = toric(DelzantPolytope::interval(0, 1));
    CHECK(toric_basis(cp1, 5, enumerate).dimension() == 6);
    for (int k = 1; k <= 50; ++k) {
        const auto space = toric_basis(cp1, k, enumerate);
        const auto r = dim_count(space, cp1);
        CHECK(r.dimension == k + 1);
        CHECK(r.match);
    }
    const auto sq = toric(DelzantPolytope::unit_square(), 0.0, 16);
    CHECK(toric_basis(sq, 3, enumerate).dimension() == 16);
    const auto tri = toric(DelzantPolytope::standard_triangle(), 0.0, 16);
    const auto r = dim_count(toric_basis(tri, 4, enumerate), tri);
    CHECK(r.dimension == 15);
    CHECK(r.oracle_kind == "pick");
}

TEST_CASE("column-sweep oracle on a non-lattice polytope") {
    // [0, 1/2] x [0, 1/3]
    const DelzantPolytope P({facet(1, 0, "0"), facet(0, 1, "0"), facet(-1, 0, "-1/2"), facet(0, -1, "-1/3")});
    CHECK_FALSE(P.is_lattice_polytope());
    for (long k = 1; k <= 20; ++k) {
        const long expected = (k / 2 + 1) * (k / 3 + 1);
        CHECK(lattice_count_oracle(P, k) == expected);
        CHECK(P.count_lattice_points(k) == expected);
    }
}

TEST_CASE("CP1 section norms match the Beta integral") {
    const auto cp1 = toric(DelzantPolytope::interval(0, 1));
    for (int k : {1, 10, 40, 60}) {
        CAPTURE(k);
        const auto space = toric_basis(cp1, k);
        for (int j = 0; j <= k; ++j) {
            // |s_j|^2 = x^j (1-x)^(k-j) / peak value, so the norm is k B(j+1, k-j+1) / peak
            const double p = static_cast<double>(j) / k;
            const double log_peak = (j > 0 ? j * std::log(p) : 0.0) + (j < k ? (k - j) * std::log1p(-p) : 0.0);
            const double oracle = std::log(k) + std::lgamma(j + 1.0) + std::lgamma(k - j + 1.0) -
                                  std::lgamma(k + 2.0) - log_peak;
            CHECK(space.log_norms(j) == doctest::Approx(oracle).epsilon(1e-10));
        }
        CHECK(orthonormality_defect(space) < 1e-8);
    }
    const auto k1 = toric_basis(cp1, 1);
    CHECK(k1.log_norms(0) == doctest::Approx(k1.log_norms(1)).epsilon(1e-14));
}

TEST_CASE("orthonormality on two-dimensional and perturbed structures") {
    const auto hirz = toric(DelzantPolytope::hirzebruch());
    const auto space = toric_basis(hirz, 10);
    CHECK(space.dimension() == 176);
    CHECK(orthonormality_defect(space) < 1e-8);
    const auto pert = toric(DelzantPolytope::interval(0, 1), 0.1);
    CHECK(orthonormality_defect(toric_basis(pert, 30)) < 1e-8);
    CHECK(toric_basis(pert, 30).log_density.maxCoeff() < 10.0);
}

TEST_CASE("refinement failure raises QuadratureFailure") {
    const auto cp1 = toric(DelzantPolytope::interval(0, 1));
    BasisOptions strict;
    strict.refinement_tolerance = 1e-300;
    CHECK_THROWS_AS(toric_basis(cp1, 7, strict), QuadratureFailure);
    CHECK_THROWS_AS(toric_basis(cp1, 0), InvalidStructure);
}

TEST_CASE("QSPACE round trip and malformed input") {
    const auto sq = toric(DelzantPolytope::unit_square(), 0.0, 12);
    const auto space = toric_basis(sq, 3, {.quadrature_order = 12});
    std::stringstream buf;
    write_qspace(buf, space);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == "QSPACE01");
    std::stringstream in(bytes);
    const auto back = read_qspace(in);
    CHECK(back.level == 3);
    CHECK(back.backend == Backend::ExactToric);
    CHECK(back.manifold == space.manifold);
    CHECK(back.dimension() == 16);
    CHECK(back.lattice_points[5] == space.lattice_points[5]);
    CHECK(back.log_norms == space.log_norms);
    CHECK(back.log_density == space.log_density);
    CHECK(back.values == space.values);
    CHECK(back.nodes.points == space.nodes.points);

    std::stringstream bad("QSPACE02xxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(read_qspace(bad), FormatError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 7));
    CHECK_THROWS_AS(read_qspace(truncated), FormatError);
}
