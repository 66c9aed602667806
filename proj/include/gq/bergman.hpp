#pragma once

// Generalized Bergman functions, their large-k expansion, the curvature
// convention constant, and the Berezin-type operator Q_k.

#include "gq/fit.hpp"
#include "gq/geom.hpp"
#include "gq/quantize.hpp"
#include "gq/rational.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gq {

struct BergmanField {
    int level = 0;
    Backend backend = Backend::ExactToric;
    int dimension = 0;
    Eigen::VectorXd values;   // B_k at the space's nodes
    Eigen::VectorXd weights;  // omega^n/n! at the nodes
    double integral = 0.0;    // int B_k (k omega)^n/n!
    double completeness_residual = 0.0;  // |integral - dimension| / dimension
};

/// Throws IncompleteBasis when the completeness residual exceeds 1e-4.
BergmanField bergman_function(const QuantumSpace& space);

struct AsymptoticFit {
    std::vector<int> ks;
    std::vector<int> fit_ks;      // ks without the three largest
    Eigen::VectorXd c0, c1;       // pointwise coefficients of B_k ~ c0 + c1/k
    Eigen::VectorXd curvature;    // kappa S_abreu at the nodes
    double c0_sup_error = 0.0;    // sup |c0 - 1|
    double c1_correlation = 0.0;  // correlation(c1, S_abreu); NaN for constant curvature
    double c1_sup_deviation = 0.0;  // sup |c1 - kappa S_abreu|
    double integral_c0 = 0.0;     // against omega^n/n!
    double integral_c1 = 0.0;
    std::vector<double> remainder;  // per k: sup |B_k - 1 - kappa S_abreu / k|
    DecayFit remainder_decay;
    std::vector<double> holdout_error;       // per held-out k: sup |B_k - c0 - c1/k|
    std::vector<double> extension_c0_error;  // sup|c0 - 1| as the held-out ks are added back
    bool monotone_improvement = false;
    double design_condition = 0.0;
};

/// Two-term least-squares fit in 1/k, holding out the three largest k.
/// Throws FitError on too few levels or an ill-conditioned design.
AsymptoticFit fit_bergman_expansion(const std::vector<BergmanField>& fields, const ScalarCurvatureField& curvature);

struct Calibration {
    Rational a0, a1;
    double integral_abreu = 0.0;
    double kappa = 0.0;
};

/// Fits a0, a1 exactly from dimension counts (degree-n polynomial through the
/// data) and returns kappa = a1 / int S_abreu. Non-polynomial counts throw
/// DimensionAnomaly; fewer than five levels throw FitError.
Calibration calibrate_convention(const std::vector<long>& ks, const std::vector<long>& dims, int n,
                                 double integral_abreu);

/// The repository-wide convention constant, calibrated once on the round
/// two-sphere (unit interval polytope) and frozen.
double convention_kappa();

/// kappa * S_abreu next to the two candidate labels s_R/(4 pi) and s_R/(8 pi)
/// of the Riemannian scalar curvature s_R = 2 pi S_abreu.
struct ConventionLabels {
    double kappa_s = 0.0;
    double riemannian_over_4pi = 0.0;
    double riemannian_over_8pi = 0.0;
    std::string matching;  // "s/(4pi)", "s/(8pi)" or "neither"
};
ConventionLabels convention_labels(double abreu_value, double kappa);

/// Q_k f(x) = int K_k(x, y) f(y) (k omega)^n/n! with K_k = |P_k(x, y)|^2,
/// applied in factored form. Toric spaces act on torus-invariant functions.
class QOperator {
public:
    explicit QOperator(const QuantumSpace& space);

    int level() const { return level_; }
    Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
    /// K_k between two nodes (theta = 0 slice for toric spaces).
    double kernel(Eigen::Index x, Eigen::Index y) const;

private:
    int level_ = 0;
    Backend backend_ = Backend::ExactToric;
    Eigen::MatrixXd density_;  // toric: |s_i(x)|^2
    Eigen::MatrixXcd values_;  // spectral
    Eigen::VectorXd weights_;  // (k omega)^n/n!
};

Eigen::VectorXd q_apply(const QOperator& q, const Eigen::VectorXd& f);

}  // namespace gq
