#pragma once

// The one-parameter flow Phi_k^t = chi(t) o Phi_k, the functional
// f(t) = -Tr(A̲_k M(Phi_k^t)), its monotonicity, and the chain of
// inequalities that bounds ||s - S|| from below.

#include "gq/embed.hpp"
#include "gq/invariants.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <vector>

namespace gq {

struct FlowOptions {
    int image_order = 0;  // quadrature order on kP; 0 picks max(48, 3k + 24)
    double newton_tolerance = 1e-12;  // |mu^t(xi) - y| relative to k
    int threads = 1;                  // flow states at distinct t run concurrently
};

/// Flow quantities at one t.
///
/// The rescaled map has coordinates t^{w_i} Z_i; it is again a torus-equivariant
/// map whose moment map mu^t sends P onto the interior of kP. Integrals against
/// (Phi^{t*} omega_FS)^n/n! are evaluated in the image chart y = mu^t(x), where
/// the pushed-forward volume is Lebesgue measure on kP, by solving mu^t = y with
/// Newton's method in log-linear coordinates.
struct FlowState {
    double t = 1.0;
    Eigen::VectorXd moment_diagonal;  // M(Phi_k^t), diagonal in the monomial basis
    double f_trace = 0.0;             // -Tr(A̲_k M(Phi_k^t))
    double f_integral = 0.0;          // int Phi^{t*} h_A vol_t + Tr(A_k)/(N_k+1) int vol_t
    double volume = 0.0;              // int (Phi^{t*} omega_FS)^n/n!
    double chart_volume = 0.0;        // the same integral on the embedding's nodes
    // Original-chart diagnostics: the density of the pushed-forward volume on P
    // and f computed from it with the embedding's nodes.
    double mass_concentration = 0.0;  // max/min of the density over the nodes
    double chart_f = 0.0;
    int newton_iterations = 0;        // worst node
};

/// Throws InvalidStructure for non-toric embeddings or t outside (0, 1],
/// UnderflowAtNode when every rescaled coordinate vanishes at a node and
/// NumericalFault when Newton's method stalls.
FlowState flow_f(const Embedding& embedding, const AlmostKahlerStructure& structure, const WeightMatrix& weights,
                 double t, const FlowOptions& options = {});

/// 1, 0.8, 0.8^2, ... down to t_min, with t_min appended.
std::vector<double> geometric_grid(double t_min = 1e-3, double ratio = 0.8);

struct MonotonicityReport {
    std::vector<double> ts;        // ascending
    std::vector<double> f;
    std::vector<double> derivative;  // centred finite differences of f in t
    std::vector<double> volume;
    std::vector<double> mass_concentration;
    bool monotone = true;
    bool strictly_increasing = false;
    double worst_drop = 0.0;       // max over pairs of f(t_i) - f(t_{i+1}), t_i < t_{i+1}
    double volume_spread = 0.0;    // max |volume - volume(1)|
    double formula_gap = 0.0;      // max |f_trace - f_integral|
};

/// Needs at least 20 grid points in [t_min, 1]. Throws MonotonicityViolation
/// naming the offending pair when f drops by more than `tolerance`.
MonotonicityReport monotonicity_check(const Embedding& embedding, const AlmostKahlerStructure& structure,
                                      const WeightMatrix& weights, const std::vector<double>& ts,
                                      double tolerance = 1e-9, const FlowOptions& options = {});

/// f is non-decreasing in t, so f(t_min) bounds lim_{t -> 0} f(t) from above.
/// For torus actions on toric manifolds the value is also known in closed form,
///     f = k^{n+1} int_P h + Vol(P) k^n Tr(A_k)/(N_k + 1),   h = <d, x> - lift,
/// which is k^n (b1 - (a1/a0) b0) + O(k^{n-1}).
struct LimitEstimate {
    std::vector<double> ts;
    std::vector<double> f;
    double f_min_t = 0.0;           // f(t_min)
    double extrapolated = 0.0;      // Richardson in t through the three smallest t
    double extrapolation_gap = 0.0; // |extrapolated - f(t_min)|
    Rational exact;                 // closed form above
    double leading = 0.0;           // k^n (b1 - (a1/a0) b0)
    bool oscillating = false;       // successive differences change sign beyond tolerance
    double mass_concentration = 0.0;
    MonotonicityReport monotonicity;
};

/// Runs monotonicity_check on geometric_grid(t_min) first.
LimitEstimate limit_f(const Embedding& embedding, const AlmostKahlerStructure& structure,
                      const WeightMatrix& weights, double t_min = 1e-3, const FlowOptions& options = {},
                      double tolerance = 1e-9);

/// Closed-form f for a toric torus action (see LimitEstimate).
Rational toric_flow_value(const DelzantPolytope& polytope, const WeightMatrix& weights);

/// Chain at one level:
///     ||A̲_k|| ||M̲(Phi_k)|| >= f(1) >= f(t_min),
/// and its normalized form 4 pi ||M̲|| / k^{n/2-1} >= 4 pi f(t_min) / (||A̲_k|| k^{n/2-1}).
struct ChainLink {
    int level = 0;
    double norm_a = 0.0;    // ||A̲_k||
    double norm_m = 0.0;    // ||M̲(Phi_k)||
    double f_one = 0.0;     // -Tr(A̲_k M(Phi_k)) with the embedding's own M
    double f_min_t = 0.0;
    double normalized_lhs = 0.0;
    double normalized_rhs = 0.0;
    double slack = 0.0;     // ||A̲|| ||M̲|| - f(t_min)
};

/// Throws NumericalFault when a link of the chain fails by more than `tolerance`
/// relative to max(1, ||A̲|| ||M̲||).
ChainLink chain_link(const Embedding& embedding, const AlmostKahlerStructure& structure,
                     const WeightMatrix& weights, const LimitEstimate& limit, double tolerance = 1e-8);

struct InequalityReport {
    std::vector<ChainLink> links;
    double extrapolated_rhs = 0.0;  // Richardson in 1/k of normalized_rhs
    double extrapolated_lhs = 0.0;
    double futaki_bound = 0.0;      // -4 pi F / ||chi|| from exact invariants
    double curvature_deviation = 0.0;  // ||s - S||_{L^2} of the structure
    double relative_gap = 0.0;      // |extrapolated_rhs - futaki_bound| / |futaki_bound|
};

/// Richardson extrapolation assuming a + b/k + c/k^2 through the last three levels.
double richardson(const std::vector<double>& ks, const std::vector<double>& values);

InequalityReport assemble_bound(const std::vector<ChainLink>& links, const InvariantReport& invariants,
                                double curvature_deviation);

nlohmann::json to_json(const ChainLink& link);
nlohmann::json to_json(const InequalityReport& report);

}  // namespace gq
