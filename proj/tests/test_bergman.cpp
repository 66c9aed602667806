#include "doctest.h"

#include "gq/bergman.hpp"
#include "gq/error.hpp"
#include "gq/spectral.hpp"

#include <cmath>
#include <random>

using namespace gq;

namespace {

AlmostKahlerStructure interval_structure(double eps = 0.0) {
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::interval(0, 1);
    if (eps != 0.0) {
        d.epsilon = eps;
        d.perturbation_shape = Polynomial::constant(1, 1.0);
    }
    return build_structure(d);
}

std::vector<BergmanField> fields(const AlmostKahlerStructure& s, int lo, int hi) {
    std::vector<BergmanField> out;
    for (int k = lo; k <= hi; ++k) out.push_back(bergman_function(toric_basis(s, k)));
    return out;
}

Eigen::MatrixXcd random_unitary(Eigen::Index n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Eigen::MatrixXcd A(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) = {N(rng), N(rng)};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
    return qr.householderQ();
}

}  // namespace

TEST_CASE("round sphere: B_k = 1 + 1/k exactly") {
    const auto s = interval_structure();
    for (int k = 1; k <= 40; ++k) {
        const auto B = bergman_function(toric_basis(s, k));
        CHECK((B.values.array() - (1.0 + 1.0 / k)).abs().maxCoeff() < 1e-10);
        CHECK(B.integral == doctest::Approx(k + 1.0).epsilon(1e-12));
        CHECK(B.values.minCoeff() > 0);
    }
}

TEST_CASE("completeness failure is detected") {
    auto space = toric_basis(interval_structure(), 6);
    space.log_density.array() += 0.01;
    CHECK_THROWS_AS(bergman_function(space), IncompleteBasis);
    space.log_density.resize(0, 0);
    space.values.resize(0, 0);
    CHECK_THROWS_AS(bergman_function(space), InvalidStructure);
}

TEST_CASE("two-term fit on the round sphere") {
    const auto s = interval_structure();
    const auto fit = fit_bergman_expansion(fields(s, 10, 40), scalar_curvature(s, convention_kappa()));
    CHECK(fit.fit_ks.back() == 37);
    CHECK(fit.c0_sup_error < 1e-4);
    CHECK((fit.c1.array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(std::isnan(fit.c1_correlation));
    CHECK(fit.integral_c1 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit.monotone_improvement);
}

TEST_CASE("fit preconditions") {
    const auto s = interval_structure();
    const auto curv = scalar_curvature(s, 0.25);
    CHECK_THROWS_AS(fit_bergman_expansion(fields(s, 10, 12), curv), FitError);
    CHECK_THROWS_AS(fit_bergman_expansion(fields(s, 5, 15), curv), FitError);
    auto repeated = fields(s, 20, 24);
    repeated.push_back(repeated.front());
    CHECK_THROWS_AS(fit_bergman_expansion(repeated, curv), FitError);
}

TEST_CASE("perturbed sphere: the 1/k coefficient is the curvature") {
    const auto s = interval_structure(0.1);
    const auto curv = scalar_curvature(s, convention_kappa());
    double previous = 0.0;
    for (int k : {80, 160, 320}) {
        const auto B = bergman_function(toric_basis(s, k));
        const double dev = ((B.values.array() - 1.0) * k - 0.25 * curv.abreu.array()).abs().maxCoeff();
        if (previous > 0) CHECK(previous / dev == doctest::Approx(2.0).epsilon(0.15));
        previous = dev;
    }
    const auto fit = fit_bergman_expansion(fields(s, 10, 40), curv);
    // integrating the expansion reproduces a1 = 1 of the dimension polynomial
    CHECK(fit.integral_c1 == doctest::Approx(1.0).epsilon(0.02));
    CHECK(fit.integral_c0 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.c1_correlation > 0.5);
}

TEST_CASE("convention calibration") {
    std::vector<long> ks, line, square, bad;
    for (long k = 1; k <= 8; ++k) {
        ks.push_back(k);
        line.push_back(k + 1);
        square.push_back((k + 1) * (k + 1));
        bad.push_back(k * k + 1);
    }
    const auto cp1 = calibrate_convention(ks, line, 1, 4.0);
    CHECK(cp1.a0 == 1);
    CHECK(cp1.a1 == 1);
    CHECK(cp1.kappa == 0.25);
    CHECK(convention_kappa() == doctest::Approx(0.25).epsilon(1e-14));

    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::unit_square();
    const double integral = scalar_curvature(build_structure(d)).integral_abreu;
    const auto sq = calibrate_convention(ks, square, 2, integral);
    CHECK(sq.a0 == 1);
    CHECK(sq.a1 == 2);
    CHECK(std::abs(convention_kappa() * integral - 2.0) < 1e-10);

    CHECK_THROWS_AS(calibrate_convention(ks, bad, 1, 4.0), DimensionAnomaly);
    CHECK_THROWS_AS(calibrate_convention({1, 2, 3}, {2, 3, 4}, 1, 4.0), FitError);

    const auto labels = convention_labels(4.0, 0.25);
    CHECK(labels.kappa_s == 1.0);
    CHECK(labels.riemannian_over_4pi == doctest::Approx(2.0));
    CHECK(labels.matching == "s/(8pi)");
}

TEST_CASE("Q operator identities on the sphere") {
    const auto s = interval_structure(0.1);
    const auto space = toric_basis(s, 12);
    const QOperator Q(space);
    const auto B = bergman_function(space);
    const Eigen::Index m = space.nodes.size();
    CHECK((q_apply(Q, Eigen::VectorXd::Ones(m)) - B.values).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(q_apply(Q, Eigen::VectorXd::Zero(m)).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::VectorXd x = space.nodes.points.col(0);
    const Eigen::VectorXd f = (6.0 * x.array() * (1.0 - x.array())).exp().matrix();
    const Eigen::VectorXd Qf = q_apply(Q, f);
    CHECK(Qf.minCoeff() >= 0.0);
    const double lhs = space.nodes.integrate(Qf), rhs = space.nodes.integrate(f.cwiseProduct(B.values));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    for (Eigen::Index i = 0; i < m; i += 7)
        for (Eigen::Index j = 0; j < m; j += 5) {
            CHECK(Q.kernel(i, j) >= 0.0);
            CHECK(std::abs(Q.kernel(i, j) - Q.kernel(j, i)) <= 1e-10 * (1.0 + Q.kernel(i, j)));
        }
}

TEST_CASE("Q operator on the round sphere matches the closed form") {
    // Q(x - 1/2) = (k + 1)/(k + 2) (x - 1/2) for the round metric
    const auto s = interval_structure();
    std::vector<double> ks, res;
    for (int k = 10; k <= 40; k += 2) {
        const auto space = toric_basis(s, k);
        const Eigen::VectorXd f = space.nodes.points.col(0).array() - 0.5;
        const Eigen::VectorXd err = q_apply(QOperator(space), f) - f;
        CHECK((err + f / (k + 2.0)).cwiseAbs().maxCoeff() < 1e-12);
        ks.push_back(k);
        res.push_back(err.cwiseAbs().maxCoeff());
    }
    const auto decay = fit_decay(ks, res);
    CHECK(decay.exponent == doctest::Approx(-1.0).epsilon(0.2));
}

TEST_CASE("unitary invariance of B_k and Q on the spectral backend") {
    ManifoldDescriptor d;
    d.kind = ManifoldKind::FlatTorus;
    const auto t2 = build_structure(d);
    auto [space, cluster] = low_cluster(assemble_laplacian(t2, 3, 48), 1.0);
    const auto B = bergman_function(space);
    const Eigen::VectorXd f = space.nodes.points.col(0).array().sin().matrix();
    const Eigen::VectorXd Qf = q_apply(QOperator(space), f);
    CHECK((q_apply(QOperator(space), Eigen::VectorXd::Ones(f.size())) - B.values).cwiseAbs().maxCoeff() < 1e-10);

    QuantumSpace rotated = space;
    rotated.values = space.values * random_unitary(space.dimension(), 3);
    CHECK((bergman_function(rotated).values - B.values).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((q_apply(QOperator(rotated), f) - Qf).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("decay fits") {
    const auto exact = fit_decay({1, 2, 4, 8}, {1, 0.25, 0.0625, 0.015625});
    CHECK(exact.exponent == doctest::Approx(-2.0));
    const auto floor = fit_decay({1, 2, 3}, {1e-15, 1e-16, 0});
    CHECK(floor.at_floor);
    CHECK(std::isinf(floor.exponent));
    CHECK_THROWS_AS(fit_decay({1, 2}, {1e-3, 0}), FitError);
}
