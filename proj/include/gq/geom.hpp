#pragma once

// Model almost-Kähler manifolds: toric manifolds given by a Delzant polytope
// and a symplectic potential, flat tori, and the round sphere.
//
// Toric conventions. Points of the manifold are written in action-angle
// coordinates (x, theta) with x in the polytope P and theta in [0,1)^n, so the
// fibres carry total angular measure 1 and
//     omega = sum_a dx_a ^ dtheta_a,   int_M omega^n/n! = Vol(P).
// The compatible metric is g = H/(2 pi) dx^2 + 2 pi H^{-1} dtheta^2 where H is
// the Hessian of the symplectic potential. Torus-invariant functions are
// functions on P and every integral against omega^n/n! is an integral over P
// with Lebesgue measure.

#include "gq/polynomial.hpp"
#include "gq/quadrature.hpp"
#include "gq/rational.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gq {

/// Facet {x : <normal, x> >= offset} with an inward integer normal.
struct Facet {
    Eigen::VectorXi normal;
    Rational offset;
};

class DelzantPolytope {
public:
    /// Validates boundedness, nonempty interior and the Delzant condition at
    /// every vertex (n <= 2). Throws DelzantViolation.
    explicit DelzantPolytope(std::vector<Facet> facets, std::string name = {});

    static DelzantPolytope interval(long a, long b);
    static DelzantPolytope unit_square();
    static DelzantPolytope standard_triangle();
    /// conv{(0,0),(2,0),(1,1),(0,1)}: the first Hirzebruch surface.
    static DelzantPolytope hirzebruch();
    /// "interval", "interval2", "square", "triangle", "hirzebruch".
    static DelzantPolytope preset(const std::string& name);

    int dimension() const { return dimension_; }
    const std::string& name() const { return name_; }
    const std::vector<Facet>& facets() const { return facets_; }
    /// Counter-clockwise for n = 2, increasing for n = 1.
    const std::vector<std::vector<Rational>>& vertices() const { return vertices_; }
    std::vector<Eigen::VectorXd> vertices_double() const;

    Rational volume() const { return volume_; }
    /// Total boundary measure, each facet measured in lattice units.
    Rational boundary_measure() const { return boundary_measure_; }
    bool is_lattice_polytope() const;

    /// Affine distance l_f(x) = <u_f, x> - offset_f.
    double slack(std::size_t facet, const Eigen::VectorXd& x) const;
    bool contains(const std::vector<long>& point, long k) const;

    /// Lattice points of kP in lexicographic order.
    std::vector<Eigen::VectorXi> lattice_points(long k) const;
    long count_lattice_points(long k) const;

    Quadrature quadrature(int order) const;
    /// Rule for the lattice-normalized boundary measure d sigma.
    Quadrature boundary_quadrature(int order) const;

private:
    void validate();

    int dimension_ = 0;
    std::string name_;
    std::vector<Facet> facets_;
    std::vector<std::vector<Rational>> vertices_;
    std::vector<std::pair<int, int>> edges_;  // (vertex, vertex) for each facet, n = 2
    Rational volume_;
    Rational boundary_measure_;
};

/// Guillemin potential 1/2 sum l_f log l_f plus a polynomial perturbation.
class SymplecticPotential {
public:
    /// Derivatives of the potential at a point; third[c] = dH/dx_c, fourth[c][d] = d^2H/dx_c dx_d.
    struct Jet {
        double value = 0.0;
        Eigen::VectorXd gradient;
        Eigen::MatrixXd hessian;
        std::vector<Eigen::MatrixXd> third;
        std::vector<std::vector<Eigen::MatrixXd>> fourth;
    };

    static SymplecticPotential guillemin(const DelzantPolytope& polytope);
    /// Adds epsilon * shape * prod_f l_f^2, which vanishes to second order on the boundary.
    static SymplecticPotential perturbed(const DelzantPolytope& polytope, const Polynomial& shape,
                                         double epsilon);

    int dimension() const { return dimension_; }
    const Polynomial& perturbation() const { return perturbation_; }
    double epsilon() const { return epsilon_; }

    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;
    /// order in {2, 3, 4}: how many derivative tensors to fill.
    Jet jet(const Eigen::VectorXd& x, int order) const;
    /// Derivatives in the chart y with x = C y.
    Jet jet(const Eigen::VectorXd& x, int order, const Eigen::MatrixXd& C) const;
    /// C = B^{-1} where the rows of B are the normals of the nearest independent facets.
    Eigen::MatrixXd adapted_frame(const Eigen::VectorXd& x) const;

private:
    SymplecticPotential() = default;
    void precompute();

    int dimension_ = 1;
    std::vector<Eigen::VectorXd> normals_;
    std::vector<double> offsets_;
    Polynomial perturbation_;
    double epsilon_ = 0.0;
    // partial derivatives of the perturbation indexed by (i, j) = (d/dx)^i (d/dy)^j, i + j <= 4
    std::vector<std::vector<Polynomial>> partials_;
};

/// Abreu's scalar -sum_ij d_i d_j (H^{-1})_ij. Equals the Riemannian scalar
/// curvature of the metric H dx^2 + H^{-1} dtheta_std^2 with 2pi-periodic angles.
double abreu_scalar(const SymplecticPotential& potential, const Eigen::VectorXd& x);

enum class ManifoldKind { Toric, FlatTorus, RoundSphere };

struct FlatTorusSpec {
    int real_dimension = 2;  // 2 or 4
    Eigen::Matrix2d basis = Eigen::Matrix2d::Identity();  // T^2 only
    int flux = 1;
    double deformation = 0.0;  // T^4 only: amplitude of the non-integrable J
};

struct ManifoldDescriptor {
    ManifoldKind kind = ManifoldKind::Toric;
    std::optional<DelzantPolytope> polytope;
    Polynomial perturbation_shape;  // used when epsilon != 0
    double epsilon = 0.0;
    FlatTorusSpec torus;
    double area = 1.0;  // round sphere
    int quadrature_order = 64;
};

class AlmostKahlerStructure {
public:
    ManifoldKind kind() const { return kind_; }
    std::string describe() const;
    /// complex dimension n
    int dimension() const { return dimension_; }
    bool is_toric_chart() const { return kind_ != ManifoldKind::FlatTorus; }

    const DelzantPolytope& polytope() const;
    const SymplecticPotential& potential() const;
    const FlatTorusSpec& torus() const;
    const Quadrature& quadrature() const { return quadrature_; }
    int quadrature_order() const { return quadrature_order_; }

    /// int omega^n / n!
    double volume() const { return volume_; }

    // Evaluators at a chart point. Toric: x in P, matrices in (x, theta).
    // Flat torus: coordinates (x_1..x_n, y_1..y_n) on the unit cube.
    Eigen::MatrixXd symplectic_form(const Eigen::VectorXd& p) const;
    Eigen::MatrixXd metric(const Eigen::VectorXd& p) const;
    Eigen::MatrixXd complex_structure(const Eigen::VectorXd& p) const;
    double volume_density(const Eigen::VectorXd& p) const;

    /// Largest violation of g symmetric, g > 0 and J^2 = -Id over all quadrature nodes.
    double compatibility_defect() const;

private:
    friend AlmostKahlerStructure build_structure(const ManifoldDescriptor&);
    ManifoldKind kind_ = ManifoldKind::Toric;
    int dimension_ = 1;
    std::optional<DelzantPolytope> polytope_;
    std::optional<SymplecticPotential> potential_;
    FlatTorusSpec torus_;
    Quadrature quadrature_;
    int quadrature_order_ = 64;
    double volume_ = 0.0;
};

/// Throws DelzantViolation, ConvexityFailure (with the offending node) or InvalidStructure.
AlmostKahlerStructure build_structure(const ManifoldDescriptor& descriptor);

/// Compatible metric exp(eps Y(x)) of the deformed four-torus, coordinates (x1, x2, y1, y2).
Eigen::Matrix4d deformed_torus_metric(double deformation, double x1, double x2);

struct ScalarCurvatureField {
    Eigen::VectorXd abreu;  // internal Abreu-convention values at the quadrature nodes
    Eigen::VectorXd weights;
    double integral_abreu = 0.0;  // int S_abreu omega^n/n!
    double mean_abreu = 0.0;
    /// Convention constant; NaN until calibrated.
    double kappa = std::numeric_limits<double>::quiet_NaN();

    /// s = 4 pi kappa S_abreu, the normalization in which dim H_k = a0 k^n + (1/4pi) int s k^{n-1} + ...
    Eigen::VectorXd hermitian() const;
    double hermitian_mean() const;
    /// || s - S ||_{L^2(omega^n/n!)}
    double hermitian_deviation_l2() const;
    /// Riemannian scalar curvature of the normalized-area metric.
    Eigen::VectorXd riemannian() const;
};

/// Throws SingularMetric(node) when the Hessian cannot be inverted.
ScalarCurvatureField scalar_curvature(const AlmostKahlerStructure& structure,
                                      double kappa = std::numeric_limits<double>::quiet_NaN());

struct Hamiltonian {
    Eigen::VectorXi direction;
    Eigen::VectorXd values;  // at the structure's quadrature nodes
    Eigen::VectorXd weights;
    double mean = 0.0;  // normalized average

    double operator()(const Eigen::VectorXd& x) const;
    Eigen::VectorXd centered() const;
};

/// h = <direction, x> on the moment polytope. Throws LiftObstruction for non-lattice directions.
Hamiltonian hamiltonian(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction);

}  // namespace gq
