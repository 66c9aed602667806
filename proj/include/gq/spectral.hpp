#pragma once

// Spectral backend of the quantization: the Bochner Laplacian of L^k on a
// flat two-torus (Peierls lattice) and on a four-torus with a compatible,
// possibly non-integrable J (exact Fourier reduction in the fibre directions).

#include "gq/geom.hpp"
#include "gq/quantize.hpp"

#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <vector>

namespace gq {

using SparseMatrixC = Eigen::SparseMatrix<std::complex<double>>;

struct SpectralProblem {
    int level = 0;
    int real_dimension = 2;
    int grid = 0;         // T^2: nodes per period; T^4: nodes per side of a sector box
    double spacing = 0.0;
    double shift = 0.0;   // 2 pi n k
    /// One Hermitian block per Fourier sector (a single block on T^2).
    std::vector<SparseMatrixC> blocks;
    std::vector<Eigen::Vector2d> sector_centres;  // T^4 only
    // T^2 Peierls data: link phases on x- and y-links, flux per plaquette in units of 2 pi
    Eigen::MatrixXd phase_x, phase_y;
    double plaquette_flux = 0.0;
    double metric_xx = 1.0, metric_yy = 1.0;
    double structure_flux = 1.0;

    std::size_t unknowns() const;
    /// max over blocks of ||H - H^*||_max / ||H||_max
    double hermiticity_defect() const;
    /// max over plaquettes of |prod of link phases - exp(-2 pi i plaquette_flux)| (T^2)
    double cocycle_defect() const;
};

/// Throws ResolutionError when the grid is too coarse, InvalidStructure for
/// unsupported tori. `grid` is the number of nodes per period on T^2 and is
/// ignored on T^4, where the sector boxes use spacing 1/(16k).
SpectralProblem assemble_laplacian(const AlmostKahlerStructure& structure, int k, int grid);

/// Applies the gauge transformation psi -> e^{i phi} psi to a T^2 problem.
SpectralProblem regauge(const SpectralProblem& problem, const Eigen::VectorXd& phases);

struct SpectralCluster {
    Eigen::VectorXd window_eigenvalues;
    Eigen::VectorXd computed_eigenvalues;  // all converged renormalized eigenvalues, ascending
    double first_above = 0.0;              // first eigenvalue above the window
    double gap_ratio = 0.0;                // first_above / k
    double c1 = 0.0;
    double c2_estimate = 0.0;
};

struct EigenOptions {
    int extra = 4;                // block size = wanted + extra
    double tolerance = 1e-10;     // relative residual
    int max_iterations = 500;
    std::uint64_t seed = 0x5eed;
};

struct EigenPairs {
    Eigen::VectorXd values;       // ascending
    Eigen::MatrixXcd vectors;
    int iterations = 0;
};

/// Lowest `count` eigenpairs of a Hermitian positive definite sparse matrix:
/// block inverse iteration with Rayleigh-Ritz, using a sparse LDL^T factor.
EigenPairs lowest_eigenpairs(const SparseMatrixC& matrix, int count, const EigenOptions& options = {});

/// Window bound min(1, gap/4) from a loose-tolerance solve. low_cluster derives
/// the same bound from its own spectrum when no window is given.
double default_window(const SpectralProblem& problem);

/// Eigenpairs of the renormalized operator in (-C1, C1). A non-positive c1
/// selects default_window. Throws AmbiguousWindow when an eigenvalue lies
/// within 10% of the window edge.
std::pair<QuantumSpace, SpectralCluster> low_cluster(const SpectralProblem& problem, double c1 = 0.0,
                                                     const EigenOptions& options = {});

/// Nijenhuis tensor norm of the deformed four-torus structure at a point (finite differences).
double nijenhuis_norm(double deformation, double x1, double x2);

}  // namespace gq
