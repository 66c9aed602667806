#pragma once

// Quantum spaces H_k. Two backends produce them: an exact toric backend
// (monomial sections with quadrature norms) and a spectral backend that
// discretizes the renormalized Bochner Laplacian on flat and deformed tori.

#include "gq/geom.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gq {

enum class Backend : std::uint32_t { ExactToric = 1, Spectral = 2 };

const char* backend_name(Backend b);

/// An orthonormal basis of H_k evaluated at a node set.
///
/// Toric spaces are indexed by the lattice points of kP. Section values are
/// stored on the theta = 0 slice of each torus fibre, where they are real and
/// non-negative; pointwise norms |s(x)|^2 do not depend on theta.
struct QuantumSpace {
    int level = 0;
    Backend backend = Backend::ExactToric;
    int complex_dimension = 1;
    std::string manifold;

    Quadrature nodes;  // evaluation nodes; weights are the measure omega^n/n!

    // exact toric backend
    std::vector<Eigen::VectorXi> lattice_points;
    Eigen::VectorXd log_norms;     // log ||s_lambda||^2 of the raw monomial sections
    Eigen::MatrixXd log_density;   // nodes x N: log |s_i(x)|^2 of the orthonormal sections
    int norm_quadrature_order = 0; // order at which the norms converged

    // spectral backend
    Eigen::MatrixXcd gram;         // Gram matrix of the raw eigenvectors
    Eigen::VectorXd eigenvalues;   // renormalized eigenvalues of the retained cluster

    Eigen::MatrixXcd values;       // nodes x N orthonormal section values (empty if not evaluated)
    double gram_condition = 1.0;

    int dimension() const;
    bool evaluated() const { return values.size() > 0; }
    /// Measure (k omega)^n / n! at the nodes.
    Eigen::VectorXd level_weights() const;
    /// |s_i(x)|^2 for all nodes and sections.
    Eigen::MatrixXd density() const;
};

struct BasisOptions {
    int quadrature_order = 64;    // evaluation nodes and initial norm rule
    bool evaluate = true;         // false: enumerate the basis only
    double refinement_tolerance = 1e-8;
};

/// Monomial basis indexed by kP ∩ Z^n. Throws QuadratureFailure when the
/// norms do not converge under refinement.
QuantumSpace toric_basis(const AlmostKahlerStructure& structure, int k, const BasisOptions& options = {});

/// max |<s_i, s_j> - delta_ij| over the evaluation quadrature.
double orthonormality_defect(const QuantumSpace& space);

struct DimensionReport {
    long dimension = 0;
    long oracle = 0;
    std::string oracle_kind;
    bool match = false;
};

/// Compares dim H_k with an independent count. A mismatch throws
/// DimensionAnomaly for the exact backend; the spectral backend only flags it.
DimensionReport dim_count(const QuantumSpace& space, const AlmostKahlerStructure& structure);

/// #(kP ∩ Z^n) by Pick's theorem for lattice polygons and by column sweeps otherwise.
long lattice_count_oracle(const DelzantPolytope& polytope, long k);

// Binary container "QSPACE01": little-endian, versioned, tagged sections.
void write_qspace(std::ostream& out, const QuantumSpace& space);
QuantumSpace read_qspace(std::istream& in);
void save_qspace(const std::string& path, const QuantumSpace& space);
QuantumSpace load_qspace(const std::string& path);

}  // namespace gq
