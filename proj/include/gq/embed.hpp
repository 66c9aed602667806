#pragma once

// Kodaira maps into projective space, pullbacks of the Fubini–Study form and
// of linear Hamiltonians, and the moment matrix M(Phi_k).

#include "gq/fit.hpp"
#include "gq/geom.hpp"
#include "gq/invariants.hpp"
#include "gq/quantize.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gq {

/// Coordinates Z_i(x) = s_i(x) of Phi_k with the pulled-back Fubini–Study data.
///
/// The Fubini–Study form is normalized to represent the hyperplane class, so
/// (1/k) Phi_k^* omega_FS is comparable with omega. Forms and metrics are
/// 2n x 2n matrices in chart coordinates: (x, theta) for toric spaces and
/// (x, y) on the flat torus.
struct Embedding {
    int level = 0;
    Backend backend = Backend::ExactToric;
    int complex_dimension = 1;
    std::string manifold;
    Quadrature nodes;  // weights omega^n/n!

    Eigen::MatrixXcd coordinates;  // nodes x N (theta = 0 slice for toric spaces)
    Eigen::VectorXd log_norm;      // log |Z(x)|^2

    // toric: p_lambda(x) = |Z_lambda|^2 / |Z|^2 is proportional to c_lambda exp(<lambda, 2 grad u(x)>)
    std::vector<Eigen::VectorXi> lattice_points;
    Eigen::MatrixXd log_probability;  // nodes x N, log p_lambda
    Eigen::VectorXd log_coefficients; // log c_lambda
    Eigen::MatrixXd moment;           // nodes x n, mu = sum_lambda p_lambda lambda

    std::vector<Eigen::MatrixXd> fs_form;    // Phi_k^* omega_FS
    std::vector<Eigen::MatrixXd> fs_metric;  // Phi_k^* g_FS
    Eigen::VectorXd fs_volume;               // (Phi_k^* omega_FS)^n/n! per unit omega^n/n!

    int dimension() const { return static_cast<int>(coordinates.cols()); }
    /// int (Phi_k^* omega_FS)^n/n!
    double fs_volume_integral() const { return nodes.integrate(fs_volume); }
};

/// Evaluates Phi_k on the space's nodes. Throws BasePointFailure when every
/// coordinate vanishes at a node and InvalidStructure for unevaluated spaces.
Embedding kodaira_embed(const QuantumSpace& space, const AlmostKahlerStructure& structure);

/// Toric pullback d mu ^ d theta with d mu = 2 Cov_p(lambda) Hess(u).
Eigen::MatrixXd toric_moment_derivative(const Embedding& embedding, const AlmostKahlerStructure& structure,
                                        Eigen::Index node);

/// d mu at an arbitrary interior point from 5-point centred differences of
/// mu, Richardson-extrapolated between steps h and 2h. Throws StencilError if
/// the stencil leaves the polytope.
Eigen::MatrixXd toric_moment_derivative_stencil(const Embedding& embedding, const AlmostKahlerStructure& structure,
                                                const Eigen::VectorXd& x, double h);

/// mu(x) = sum_lambda p_lambda(x) lambda at an arbitrary interior point.
Eigen::VectorXd toric_moment(const Embedding& embedding, const AlmostKahlerStructure& structure,
                             const Eigen::VectorXd& x);

struct FsResidual {
    int level = 0;
    double sup = 0.0;          // sup over nodes of |(1/k) Phi^* omega_FS - omega|_g
    Eigen::Index worst_node = 0;
};

/// The pointwise norm is the operator norm in a g-orthonormal frame.
FsResidual fs_pullback_residual(const Embedding& embedding, const AlmostKahlerStructure& structure);

struct MomentMatrix {
    Eigen::MatrixXcd matrix;      // M(Phi_k)_{ij} = int Z^i conj(Z^j)/|Z|^2 (Phi^* omega_FS)^n/n!
    Eigen::MatrixXcd trace_free;  // M - Tr(M)/(N+1)
    double norm = 0.0;            // Frobenius norm of the trace-free part
    double trace = 0.0;
};

MomentMatrix moment_matrix(const Embedding& embedding);

/// (k^{n/2-1} / 4 pi) || s - S ||_{L^2}
double moment_norm_bound(int level, int complex_dimension, double curvature_deviation);

/// Phi_k^*(h_A) = -sum_ij A_ij Z^i conj(Z^j) / |Z|^2 for diagonal A.
Eigen::VectorXd hamiltonian_pullback(const Embedding& embedding, const WeightMatrix& weights);

/// sup |(1/k) Phi_k^*(h_A) - h| with h = <direction, x> - lift.
double hamiltonian_residual(const Embedding& embedding, const WeightMatrix& weights);

}  // namespace gq
