#include "doctest.h"

#include "gq/embed.hpp"
#include "gq/error.hpp"
#include "gq/spectral.hpp"

#include <cmath>
#include <random>

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

AlmostKahlerStructure flat_torus() {
    ManifoldDescriptor d;
    d.kind = ManifoldKind::FlatTorus;
    return build_structure(d);
}

Eigen::VectorXd one(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("degree-one map of the sphere is an isometry up to scale") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    const auto e = embed(s, 1);
    CHECK(e.dimension() == 2);
    CHECK(fs_pullback_residual(e, s).sup < 1e-12);
    CHECK(e.fs_volume_integral() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conic embedding at k = 2") {
    // orthonormal sections are c_j z^j with |c_j|^2 = 3 binom(2, j); Z0 Z2 - Z1^2 / 2 = 0 on the conic
    const auto s = toric(DelzantPolytope::interval(0, 1));
    const auto e = embed(s, 2);
    REQUIRE(e.dimension() == 3);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < e.nodes.size(); ++i) {
        const auto& Z = e.coordinates;
        const std::complex<double> q = Z(i, 0) * Z(i, 2) - 0.5 * Z(i, 1) * Z(i, 1);
        worst = std::max(worst, std::abs(q) / std::exp(e.log_norm(i)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("analytic pullback matches finite differences of the moment map") {
    const auto s = toric(DelzantPolytope::hirzebruch(), 0.05);
    const auto e = embed(s, 6);
    int checked = 0;
    for (Eigen::Index i = 0; i < e.nodes.size() && checked < 4; i += 97) {
        const Eigen::VectorXd x = e.nodes.point(i);
        double slack = 1.0;
        for (std::size_t f = 0; f < s.polytope().facets().size(); ++f) slack = std::min(slack, s.polytope().slack(f, x));
        if (slack < 0.05) continue;
        ++checked;
        const Eigen::MatrixXd analytic = toric_moment_derivative(e, s, i);
        const Eigen::MatrixXd stencil = toric_moment_derivative_stencil(e, s, x, 1e-3);
        CHECK((analytic - stencil).norm() < 1e-7 * analytic.norm());
        // the stored moment map agrees with the coefficient form used off the nodes
        CHECK((toric_moment(e, s, x) - e.moment.row(i).transpose()).norm() < 1e-10);
    }
    CHECK(checked == 4);
    Eigen::VectorXd corner(2);
    corner << 1e-4, 0.5;
    CHECK_THROWS_AS(toric_moment_derivative_stencil(e, s, corner, 1e-3), StencilError);
}

TEST_CASE("round sphere: pullback residual sits at roundoff for every k") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    std::vector<double> ks, res;
    for (int k = 5; k <= 40; k += 5) {
        const auto e = embed(s, k);
        ks.push_back(k);
        res.push_back(fs_pullback_residual(e, s).sup);
        CHECK(e.fs_volume_integral() == doctest::Approx(k).epsilon(1e-12));
    }
    const auto fit = fit_decay(ks, res);
    CHECK(fit.at_floor);
}

TEST_CASE("perturbed sphere: the pullback residual decays") {
    const auto s = toric(DelzantPolytope::interval(0, 1), 0.1);
    double previous = 1e9;
    for (int k : {10, 20, 40, 80}) {
        const auto e = embed(s, k);
        const double r = fs_pullback_residual(e, s).sup;
        CHECK(r < previous);
        previous = r;
        CHECK(e.fs_volume_integral() == doctest::Approx(k).epsilon(1e-9));
    }
    CHECK(previous < 2e-3);
}

TEST_CASE("moment matrix") {
    const auto round = toric(DelzantPolytope::interval(0, 1));
    for (int k : {3, 10, 30}) {
        const auto M = moment_matrix(embed(round, k));
        CHECK(M.norm < 1e-8);
        CHECK(M.trace == doctest::Approx(k).epsilon(1e-12));
        CHECK(std::abs(M.trace_free.trace()) < 1e-12);
    }
    const auto pert = toric(DelzantPolytope::interval(0, 1), 0.1);
    const double dev = curvature_deviation(pert);
    for (int k : {10, 20, 40}) {
        const auto M = moment_matrix(embed(pert, k));
        CHECK(std::abs(M.trace_free.trace()) < 1e-12);
        CHECK(M.norm > 0.0);
        CHECK(M.norm <= moment_norm_bound(k, 1, dev) * (1.0 + 10.0 / k));
    }
}

TEST_CASE("Hamiltonian pullback") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    std::vector<double> ks, res;
    for (int k = 5; k <= 40; k += 5) {
        const auto e = embed(s, k);
        ks.push_back(k);
        res.push_back(hamiltonian_residual(e, weight_matrix(s, one(1), k)));
        CHECK(hamiltonian_pullback(e, weight_matrix(s, one(0), k)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(fit_decay(ks, res).at_floor);

    const auto sq = toric(DelzantPolytope::unit_square());
    const auto e = embed(sq, 10);
    Eigen::VectorXd d(2);
    d << 1, 0;
    CHECK(hamiltonian_residual(e, weight_matrix(sq, d, 10, 2)) <= 2.0 / 100.0);

    const auto pert = toric(DelzantPolytope::interval(0, 1), 0.1);
    double previous = 1e9;
    for (int k : {10, 20, 40, 80}) {
        const double r = hamiltonian_residual(embed(pert, k), weight_matrix(pert, one(1), k));
        CHECK(r < previous);
        previous = r;
    }
    CHECK_THROWS_AS(hamiltonian_pullback(e, weight_matrix(s, one(1), 3)), InvalidStructure);
}

TEST_CASE("flat torus: theta embedding") {
    const auto t2 = flat_torus();
    auto [space, cluster] = low_cluster(assemble_laplacian(t2, 3, 64), 1.0);
    REQUIRE(space.dimension() == 3);
    const auto e = kodaira_embed(space, t2);
    // base-point free: |Z|^2 = B_3 stays well away from zero
    CHECK(e.log_norm.minCoeff() > std::log(0.5));
    CHECK(e.fs_volume_integral() == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(e.fs_volume.minCoeff() > 0.0);

    // unitary equivariance of M
    const auto M = moment_matrix(e);
    CHECK((M.matrix - M.matrix.adjoint()).norm() < 1e-12);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    Eigen::MatrixXcd A(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(i, j) = {N(rng), N(rng)};
    const Eigen::MatrixXcd U = Eigen::HouseholderQR<Eigen::MatrixXcd>(A).householderQ();
    QuantumSpace rotated = space;
    rotated.values = space.values * U;
    const auto Mr = moment_matrix(kodaira_embed(rotated, t2));
    CHECK((Mr.matrix - U.transpose() * M.matrix * U.conjugate()).norm() < 1e-10);
    CHECK(Mr.norm == doctest::Approx(M.norm).epsilon(1e-10));
}

TEST_CASE("flat torus: pullback residual follows the Bergman ripple, not the grid") {
    const auto t2 = flat_torus();
    std::vector<double> res;
    for (int k : {3, 4, 5}) {
        auto coarse = low_cluster(assemble_laplacian(t2, k, 96), 1.0).first;
        auto fine = low_cluster(assemble_laplacian(t2, k, 128), 1.0).first;
        const double a = fs_pullback_residual(kodaira_embed(coarse, t2), t2).sup;
        const double b = fs_pullback_residual(kodaira_embed(fine, t2), t2).sup;
        CHECK(std::abs(a - b) < 1e-2 * b);
        res.push_back(b);
    }
    CHECK(res[0] / res[1] > 3.0);
    CHECK(res[1] / res[2] > 3.0);
}

TEST_CASE("base points and missing data are rejected") {
    const auto s = toric(DelzantPolytope::interval(0, 1));
    auto space = toric_basis(s, 4);
    space.log_density.row(7).setConstant(-std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(kodaira_embed(space, s), BasePointFailure);

    const auto t2 = flat_torus();
    auto grid = low_cluster(assemble_laplacian(t2, 2, 64), 1.0).first;
    grid.values.row(11).setZero();
    CHECK_THROWS_AS(kodaira_embed(grid, t2), BasePointFailure);

    QuantumSpace empty;
    CHECK_THROWS_AS(kodaira_embed(empty, s), InvalidStructure);
}
