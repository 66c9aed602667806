#pragma once

// Circle-action weight matrices, exact trace asymptotics, the norm of chi,
// and the symplectic Donaldson–Futaki invariant with its quadrature oracle.

#include "gq/geom.hpp"
#include "gq/rational.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <random>
#include <string>
#include <vector>

namespace gq {

/// Diagonal weights of A_k over the monomial basis kP ∩ Z^n (lattice order).
/// Entry lambda is k * lift - <direction, lambda>: `lift` changes the lift of
/// the action to L, which shifts every weight on L^k by k * lift.
struct WeightMatrix {
    int level = 0;
    Eigen::VectorXi direction;
    long lift = 0;
    std::vector<long> weights;

    int size() const { return static_cast<int>(weights.size()); }
    Rational trace() const;
    Rational trace_square() const;
    /// A_k - Tr(A_k)/(N_k+1), exact.
    std::vector<Rational> trace_free() const;
    /// Tr(A̲_k^2), exact.
    Rational trace_free_square() const;
    Eigen::VectorXd diagonal() const;
    Eigen::VectorXd trace_free_diagonal() const;
};

/// Throws LiftObstruction for non-integer directions and InvalidStructure for non-toric structures.
WeightMatrix weight_matrix(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction, int k,
                           long lift = 0);

struct EhrhartCoefficients {
    Rational a0, a1;
    std::vector<Rational> polynomial;  // ascending powers of k
};

/// a0, a1 by exact interpolation of #(kP ∩ Z^n); DimensionAnomaly on non-polynomial counts.
EhrhartCoefficients ehrhart_coefficients(const DelzantPolytope& polytope, const std::vector<long>& ks);

struct TraceCoefficients {
    Rational b0, b1;
    std::vector<Rational> polynomial;
};

/// Tr(A_k) = b0 k^{n+1} + b1 k^n + ... by exact interpolation. Needs max(4, n+3)
/// levels; non-polynomial data throw TraceAnomaly.
TraceCoefficients trace_coefficients(const std::vector<long>& ks, const std::vector<Rational>& traces, int n);

struct ChiNorm {
    Rational squared;  // lim Tr(A̲_k^2) / k^{n+2}
    double value = 0.0;
    std::vector<Rational> trace_square_polynomial;  // Tr(A_k^2), ascending
};

/// Leading coefficient of Tr(A̲_k^2) = Tr(A_k^2) - Tr(A_k)^2/(N_k+1), taken from
/// the exact polynomials for Tr(A_k^2), Tr(A_k) and N_k + 1.
ChiNorm chi_norm(const std::vector<WeightMatrix>& weights, int n);

/// Geometric Futaki integral in two forms that must agree:
///   curvature  = kappa int (S_abreu - mean)(h - mean) omega^n/n!
///   boundary   = 2 kappa [int_dP h dsigma - (|dP| / Vol) int_P h]
struct FutakiOracle {
    double curvature = 0.0;
    double boundary = 0.0;
    double chi_squared = 0.0;  // int (h - mean)^2 omega^n/n!
    int quadrature_order = 0;
};

/// Throws BoundaryQuadratureFailure when the curvature quadrature does not
/// settle after one refinement.
FutakiOracle futaki_oracle(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction);

struct InvariantReport {
    std::string polytope;
    Eigen::VectorXi direction;
    Rational a0, a1, b0, b1;
    Rational chi_squared;
    double chi_norm = 0.0;
    Rational futaki;
    double lower_bound = 0.0;   // -4 pi F / ||chi||, 0 for the trivial action
    bool informative = false;   // lower bound strictly positive
    double oracle_futaki = 0.0; // boundary form of the oracle
    double oracle_curvature = 0.0;
    double deviation_boundary = 0.0;   // |F - oracle| / |F|, absolute when F = 0
    double deviation_curvature = 0.0;
};

/// F = (a1/a0) b0 - b1. Throws InconsistentAction when ||chi|| = 0 but F != 0.
InvariantReport futaki(const Rational& a0, const Rational& a1, const Rational& b0, const Rational& b1,
                       const Rational& chi_squared);

/// Exact pipeline over the levels ks plus the quadrature oracle.
InvariantReport invariant_report(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction,
                                 const std::vector<long>& ks);

nlohmann::json to_json(const InvariantReport& report);

/// A perturbed potential u + eps * q * prod l_f^2 with random quadratic q,
/// shrinking eps until the Hessian is positive definite at every node.
AlmostKahlerStructure random_admissible_structure(const DelzantPolytope& polytope, std::mt19937_64& rng,
                                                  int quadrature_order = 48);

/// || s - S ||_{L^2} for the structure's potential, kappa from the frozen convention.
double curvature_deviation(const AlmostKahlerStructure& structure);

}  // namespace gq
