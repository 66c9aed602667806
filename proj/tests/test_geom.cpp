#include "doctest.h"

#include "gq/error.hpp"
#include "gq/geom.hpp"

#include <cmath>

using namespace gq;

namespace {

// Independent oracle: -sum_ij d_i d_j (H^{-1})_ij by central differences of the inverse Hessian.
double abreu_by_differences(const SymplecticPotential& u, const Eigen::VectorXd& x, double h = 1e-3) {
    const int n = u.dimension();
    auto inv = [&](const Eigen::VectorXd& p) { return Eigen::MatrixXd(u.hessian(p).inverse()); };
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Eigen::VectorXd ei = Eigen::VectorXd::Unit(n, i) * h, ej = Eigen::VectorXd::Unit(n, j) * h;
            const double d = (inv(x + ei + ej)(i, j) - inv(x + ei - ej)(i, j) - inv(x - ei + ej)(i, j) +
                              inv(x - ei - ej)(i, j)) /
                             (4 * h * h);
            s -= d;
        }
    return s;
}

}  // namespace

TEST_CASE("preset polytopes: volume, boundary, lattice counts") {
    struct Row {
        const char* name;
        double volume, boundary;
        long (*ehrhart)(long);
    };
    const Row rows[] = {
        {"interval", 1, 2, [](long k) { return k + 1; }},
        {"square", 1, 4, [](long k) { return (k + 1) * (k + 1); }},
        {"triangle", 0.5, 3, [](long k) { return (k + 1) * (k + 2) / 2; }},
        {"hirzebruch", 1.5, 5, [](long k) { return (3 * k * k + 5 * k + 2) / 2; }},
    };
    for (const auto& r : rows) {
        CAPTURE(r.name);
        const auto P = DelzantPolytope::preset(r.name);
        CHECK(to_double(P.volume()) == doctest::Approx(r.volume));
        CHECK(to_double(P.boundary_measure()) == doctest::Approx(r.boundary));
        CHECK(P.is_lattice_polytope());
        for (long k = 0; k <= 12; ++k) CHECK(P.count_lattice_points(k) == r.ehrhart(k));
        const auto q = P.quadrature(24);
        CHECK(q.weights.sum() == doctest::Approx(r.volume).epsilon(1e-12));
        const auto b = P.boundary_quadrature(8);
        CHECK(b.weights.sum() == doctest::Approx(r.boundary).epsilon(1e-12));
    }
}

TEST_CASE("hirzebruch vertices are counter-clockwise") {
    const auto v = DelzantPolytope::hirzebruch().vertices_double();
    REQUIRE(v.size() == 4);
    double area = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        area += a(0) * b(1) - b(0) * a(1);
    }
    CHECK(area / 2 == doctest::Approx(1.5));
}

TEST_CASE("non-Delzant and degenerate polytopes are rejected") {
    auto f = [](int a, int b, long c) {
        Facet x;
        x.normal = Eigen::Vector2i(a, b);
        x.offset = c;
        return x;
    };
    // conv{(0,0),(2,0),(0,1)}: weighted projective corner at (0,1)
    CHECK_THROWS_AS(DelzantPolytope({f(1, 0, 0), f(0, 1, 0), f(-1, -2, -2)}), DelzantViolation);
    // unbounded
    CHECK_THROWS_AS(DelzantPolytope({f(1, 0, 0), f(0, 1, 0)}), DelzantViolation);
    // empty
    CHECK_THROWS_AS(DelzantPolytope({f(1, 0, 1), f(0, 1, 0), f(-1, -1, -1)}), DelzantViolation);
    // non-primitive normal
    CHECK_THROWS_AS(DelzantPolytope({f(2, 0, 0), f(0, 1, 0), f(-1, -1, -1)}), DelzantViolation);
}

TEST_CASE("Guillemin Abreu scalar on products of projective spaces") {
    const auto I = SymplecticPotential::guillemin(DelzantPolytope::interval(0, 1));
    for (double x : {0.01, 0.3, 0.5, 0.97}) CHECK(abreu_scalar(I, Eigen::VectorXd::Constant(1, x)) == doctest::Approx(4));
    const auto I2 = SymplecticPotential::guillemin(DelzantPolytope::interval(0, 2));
    CHECK(abreu_scalar(I2, Eigen::VectorXd::Constant(1, 0.7)) == doctest::Approx(2));
    const auto T = SymplecticPotential::guillemin(DelzantPolytope::standard_triangle());
    CHECK(abreu_scalar(T, Eigen::Vector2d(0.2, 0.3)) == doctest::Approx(12));
    const auto S = SymplecticPotential::guillemin(DelzantPolytope::unit_square());
    CHECK(abreu_scalar(S, Eigen::Vector2d(0.2, 0.9)) == doctest::Approx(8));
}

TEST_CASE("Abreu scalar agrees with a finite-difference oracle") {
    const auto P = DelzantPolytope::hirzebruch();
    Polynomial shape = Polynomial::affine(1.0, Eigen::Vector2d(0.5, -0.25));
    const auto u = SymplecticPotential::perturbed(P, shape, 0.3);
    for (auto x : {Eigen::Vector2d(0.4, 0.3), Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(0.2, 0.8)}) {
        CAPTURE(x.transpose());
        CHECK(abreu_scalar(u, x) == doctest::Approx(abreu_by_differences(u, x)).epsilon(1e-5));
    }
    // the perturbation leaves the potential's boundary behaviour untouched
    const auto g = SymplecticPotential::guillemin(P);
    const Eigen::Vector2d near(1e-7, 0.5);
    CHECK(u.hessian(near)(0, 0) / g.hessian(near)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("potential jets match differences of lower orders") {
    const auto P = DelzantPolytope::standard_triangle();
    Polynomial shape = Polynomial::affine(0.5, Eigen::Vector2d(1.0, 2.0));
    const auto u = SymplecticPotential::perturbed(P, shape, 0.2);
    const Eigen::Vector2d x(0.25, 0.35);
    const auto J = u.jet(x, 4);
    const double h = 1e-5;
    for (int c = 0; c < 2; ++c) {
        const Eigen::Vector2d e = Eigen::Vector2d::Unit(c) * h;
        const Eigen::MatrixXd d3 = (u.hessian(x + e) - u.hessian(x - e)) / (2 * h);
        CHECK((d3 - J.third[c]).norm() < 1e-5 * (1 + d3.norm()));
        const Eigen::VectorXd dg = (u.gradient(x + e) - u.gradient(x - e)) / (2 * h);
        CHECK((dg - J.hessian.col(c)).norm() < 1e-6 * (1 + dg.norm()));
        for (int d = 0; d < 2; ++d) {
            const Eigen::MatrixXd d4 = (u.jet(x + e, 3).third[d] - u.jet(x - e, 3).third[d]) / (2 * h);
            CHECK((d4 - J.fourth[c][d]).norm() < 1e-4 * (1 + d4.norm()));
        }
    }
}

TEST_CASE("build_structure: compatibility, convexity failures, curvature field") {
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::hirzebruch();
    d.quadrature_order = 24;
    const auto s = build_structure(d);
    CHECK(s.compatibility_defect() < 1e-10);
    CHECK(s.volume() == doctest::Approx(1.5));
    const auto field = scalar_curvature(s);
    // the total Abreu curvature is twice the lattice perimeter
    CHECK(field.integral_abreu == doctest::Approx(10.0).epsilon(1e-8));

    d.epsilon = -50.0;
    d.perturbation_shape = Polynomial::constant(2, 1.0);
    CHECK_THROWS_AS(build_structure(d), ConvexityFailure);

    ManifoldDescriptor sphere;
    sphere.kind = ManifoldKind::RoundSphere;
    sphere.area = 2.5;
    CHECK_THROWS_AS(build_structure(sphere), InvalidStructure);
    sphere.area = 1;
    const auto cp1 = build_structure(sphere);
    const auto fs = scalar_curvature(cp1, 0.25);
    CHECK(fs.hermitian_deviation_l2() < 1e-10);
    CHECK(fs.hermitian_mean() == doctest::Approx(4 * M_PI));
    CHECK(fs.riemannian()(0) == doctest::Approx(8 * M_PI));
}

TEST_CASE("flat and deformed tori") {
    ManifoldDescriptor d;
    d.kind = ManifoldKind::FlatTorus;
    d.torus.flux = 3;
    d.torus.basis << 1.0, 0.5, 0.0, 2.0;
    const auto t2 = build_structure(d);
    CHECK(t2.volume() == doctest::Approx(3));
    CHECK(scalar_curvature(t2).abreu.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(hamiltonian(t2, Eigen::VectorXd::Ones(1)), InvalidStructure);

    d.torus = {};
    d.torus.real_dimension = 4;
    d.torus.deformation = 0.2;
    d.quadrature_order = 24;
    const auto t4 = build_structure(d);
    CHECK(t4.compatibility_defect() < 1e-10);
    const Eigen::Matrix4d G = deformed_torus_metric(0.2, 0.13, 0.71);
    CHECK(G.determinant() == doctest::Approx(1.0));
    Eigen::Matrix4d W = Eigen::Matrix4d::Zero();
    W.topRightCorner<2, 2>().setIdentity();
    W.bottomLeftCorner<2, 2>() = -Eigen::Matrix2d::Identity();
    CHECK((G.transpose() * W * G - W).norm() < 1e-12);
    CHECK_THROWS_AS(scalar_curvature(t4), InvalidStructure);
}

TEST_CASE("Hamiltonians require lattice directions") {
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::hirzebruch();
    d.quadrature_order = 16;
    const auto s = build_structure(d);
    CHECK_THROWS_AS(hamiltonian(s, Eigen::Vector2d(0.5, 1.0)), LiftObstruction);
    const auto h = hamiltonian(s, Eigen::Vector2d(2, 1));
    CHECK(h.direction == Eigen::Vector2i(2, 1));
    // centroid of the Hirzebruch polygon is (7/9, 4/9)
    CHECK(h.mean == doctest::Approx(2 * 7.0 / 9 + 4.0 / 9));
    CHECK(h.centered().dot(h.weights) == doctest::Approx(0).scale(1));
}
