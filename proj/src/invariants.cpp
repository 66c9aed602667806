#include "gq/invariants.hpp"

#include "gq/bergman.hpp"
#include "gq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace gq {

Rational WeightMatrix::trace() const {
    Rational t = 0;
    for (long w : weights) t += w;
    return t;
}

Rational WeightMatrix::trace_square() const {
    Rational t = 0;
    for (long w : weights) t += Rational(w) * w;
    return t;
}

std::vector<Rational> WeightMatrix::trace_free() const {
    const Rational mean = trace() / Rational(size());
    std::vector<Rational> out;
    out.reserve(weights.size());
    for (long w : weights) out.emplace_back(Rational(w) - mean);
    return out;
}

Rational WeightMatrix::trace_free_square() const {
    const Rational t = trace();
    return trace_square() - t * t / Rational(size());
}

Eigen::VectorXd WeightMatrix::diagonal() const {
    Eigen::VectorXd d(size());
    for (int i = 0; i < size(); ++i) d(i) = static_cast<double>(weights[static_cast<std::size_t>(i)]);
    return d;
}

Eigen::VectorXd WeightMatrix::trace_free_diagonal() const {
    const auto tf = trace_free();
    Eigen::VectorXd d(size());
    for (int i = 0; i < size(); ++i) d(i) = to_double(tf[static_cast<std::size_t>(i)]);
    return d;
}

namespace {

Eigen::VectorXi lattice_direction(const Eigen::VectorXd& direction, const char* where) {
    Eigen::VectorXi d(direction.size());
    for (Eigen::Index a = 0; a < direction.size(); ++a) {
        const double r = std::round(direction(a));
        if (!std::isfinite(direction(a)) || std::abs(r - direction(a)) > 1e-12)
            throw LiftObstruction(where, "direction is not in the integer lattice; the action does not lift to L");
        d(a) = static_cast<int>(r);
    }
    return d;
}

void require_levels(const std::vector<long>& ks, std::size_t minimum, const char* where) {
    if (ks.size() < minimum) {
        std::ostringstream os;
        os << "need at least " << minimum << " levels, got " << ks.size();
        throw FitError(where, os.str());
    }
    if (std::set<long>(ks.begin(), ks.end()).size() != ks.size()) throw FitError(where, "repeated level");
}

}  // namespace

WeightMatrix weight_matrix(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction, int k, long lift) {
    const char* where = "invariants.weight_matrix";
    if (!structure.is_toric_chart()) throw InvalidStructure(where, "weights need a toric structure");
    if (direction.size() != structure.dimension()) throw InvalidStructure(where, "direction has wrong length");
    if (k < 1) throw InvalidStructure(where, "level k must be at least 1");
    WeightMatrix A;
    A.level = k;
    A.direction = lattice_direction(direction, where);
    A.lift = lift;
    for (const auto& lambda : structure.polytope().lattice_points(k))
        A.weights.push_back(lift * k - static_cast<long>(A.direction.cast<long>().dot(lambda.cast<long>())));
    return A;
}

EhrhartCoefficients ehrhart_coefficients(const DelzantPolytope& polytope, const std::vector<long>& ks) {
    const char* where = "invariants.ehrhart_coefficients";
    const int n = polytope.dimension();
    require_levels(ks, static_cast<std::size_t>(n + 2), where);
    std::vector<Rational> counts;
    for (long k : ks) counts.emplace_back(polytope.count_lattice_points(k));
    EhrhartCoefficients e;
    if (!interpolate_exact(ks, counts, n, e.polynomial))
        throw DimensionAnomaly(where, "lattice counts are not a polynomial of degree n");
    e.a0 = e.polynomial[static_cast<std::size_t>(n)];
    e.a1 = e.polynomial[static_cast<std::size_t>(n - 1)];
    return e;
}

TraceCoefficients trace_coefficients(const std::vector<long>& ks, const std::vector<Rational>& traces, int n) {
    const char* where = "invariants.trace_coefficients";
    if (ks.size() != traces.size()) throw FitError(where, "size mismatch");
    require_levels(ks, static_cast<std::size_t>(std::max(4, n + 3)), where);
    TraceCoefficients t;
    if (!interpolate_exact(ks, traces, n + 1, t.polynomial))
        throw TraceAnomaly(where, "traces are not a polynomial of degree n+1 in k");
    t.b0 = t.polynomial[static_cast<std::size_t>(n + 1)];
    t.b1 = t.polynomial[static_cast<std::size_t>(n)];
    return t;
}

ChiNorm chi_norm(const std::vector<WeightMatrix>& weights, int n) {
    const char* where = "invariants.chi_norm";
    std::vector<long> ks;
    std::vector<Rational> dims, traces, squares;
    for (const auto& A : weights) {
        ks.push_back(A.level);
        dims.emplace_back(A.size());
        traces.push_back(A.trace());
        squares.push_back(A.trace_square());
    }
    require_levels(ks, static_cast<std::size_t>(std::max(4, n + 4)), where);
    std::vector<Rational> dim_poly, trace_poly;
    ChiNorm c;
    if (!interpolate_exact(ks, dims, n, dim_poly)) throw TraceAnomaly(where, "dimensions are not polynomial in k");
    if (!interpolate_exact(ks, traces, n + 1, trace_poly)) throw TraceAnomaly(where, "Tr(A_k) is not polynomial in k");
    if (!interpolate_exact(ks, squares, n + 2, c.trace_square_polynomial))
        throw TraceAnomaly(where, "Tr(A_k^2) is not polynomial in k");
    const Rational& a0 = dim_poly[static_cast<std::size_t>(n)];
    const Rational& b0 = trace_poly[static_cast<std::size_t>(n + 1)];
    c.squared = c.trace_square_polynomial[static_cast<std::size_t>(n + 2)] - b0 * b0 / a0;
    if (c.squared < 0) throw TraceAnomaly(where, "negative leading coefficient " + to_string(c.squared));
    c.value = std::sqrt(to_double(c.squared));
    return c;
}

namespace {

struct CurvaturePairing {
    double pairing = 0.0;
    double chi_squared = 0.0;
    double scale = 0.0;  // ||S|| ||h - mean||, the Cauchy-Schwarz size of the pairing
};

CurvaturePairing curvature_pairing(const AlmostKahlerStructure& s, const Eigen::VectorXd& d, int order) {
    const Quadrature q = s.polytope().quadrature(order);
    Eigen::VectorXd S(q.size()), h = q.points * d;
    for (Eigen::Index i = 0; i < q.size(); ++i) S(i) = abreu_scalar(s.potential(), q.point(i));
    const double vol = q.weights.sum();
    const Eigen::VectorXd hc = h.array() - q.integrate(h) / vol;
    const Eigen::VectorXd Sc = S.array() - q.integrate(S) / vol;
    const double chi2 = q.integrate(hc.cwiseAbs2());
    return {q.integrate(Sc.cwiseProduct(hc)), chi2, std::sqrt(q.integrate(S.cwiseAbs2()) * chi2)};
}

}  // namespace

FutakiOracle futaki_oracle(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction) {
    const char* where = "invariants.futaki_oracle";
    if (!structure.is_toric_chart()) throw InvalidStructure(where, "the oracle needs a toric structure");
    const Eigen::VectorXd d = lattice_direction(direction, where).cast<double>();
    const double kappa = convention_kappa();
    const auto& P = structure.polytope();

    FutakiOracle out;
    const Quadrature bq = P.boundary_quadrature(8);
    const Quadrature iq = P.quadrature(std::max(64, structure.quadrature_order()));
    const double perimeter = to_double(P.boundary_measure());
    const double volume = to_double(P.volume());
    out.boundary = 2.0 * kappa * (bq.integrate(bq.points * d) - perimeter / volume * iq.integrate(iq.points * d));

    int order = structure.quadrature_order();
    for (int attempt = 0;; ++attempt) {
        const int finer = (3 * order + 1) / 2;
        const auto coarse = curvature_pairing(structure, d, order);
        const auto fine = curvature_pairing(structure, d, finer);
        if (std::abs(coarse.pairing - fine.pairing) <= 1e-11 * fine.scale) {
            out.curvature = kappa * fine.pairing;
            out.chi_squared = fine.chi_squared;
            out.quadrature_order = finer;
            return out;
        }
        if (attempt == 1) {
            std::ostringstream os;
            os << "curvature pairing changes by " << std::abs(coarse.pairing - fine.pairing) << " between orders "
               << order << " and " << finer;
            throw BoundaryQuadratureFailure(where, os.str());
        }
        order *= 2;
    }
}

InvariantReport futaki(const Rational& a0, const Rational& a1, const Rational& b0, const Rational& b1,
                       const Rational& chi_squared) {
    if (a0 <= 0) throw InvalidStructure("invariants.futaki", "a0 must be positive");
    InvariantReport r;
    r.a0 = a0;
    r.a1 = a1;
    r.b0 = b0;
    r.b1 = b1;
    r.chi_squared = chi_squared;
    r.chi_norm = std::sqrt(to_double(chi_squared));
    r.futaki = a1 / a0 * b0 - b1;
    if (chi_squared == 0 || r.futaki == 0) {
        if (r.futaki != 0)
            throw InconsistentAction("invariants.futaki", "||chi|| = 0 but F = " + to_string(r.futaki));
        r.lower_bound = 0.0;
    } else {
        r.lower_bound = -4.0 * std::numbers::pi * to_double(r.futaki) / r.chi_norm;
    }
    r.informative = r.lower_bound > 0.0;
    return r;
}

InvariantReport invariant_report(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction,
                                 const std::vector<long>& ks) {
    const int n = structure.dimension();
    std::vector<WeightMatrix> weights;
    std::vector<Rational> traces;
    for (long k : ks) {
        weights.push_back(weight_matrix(structure, direction, static_cast<int>(k)));
        traces.push_back(weights.back().trace());
    }
    const auto e = ehrhart_coefficients(structure.polytope(), ks);
    const auto t = trace_coefficients(ks, traces, n);
    const auto c = chi_norm(weights, n);
    InvariantReport r = futaki(e.a0, e.a1, t.b0, t.b1, c.squared);
    r.polytope = structure.polytope().name();
    r.direction = weights.front().direction;

    const auto oracle = futaki_oracle(structure, direction);
    r.oracle_futaki = oracle.boundary;
    r.oracle_curvature = oracle.curvature;
    const double F = to_double(r.futaki);
    const double scale = F != 0.0 ? std::abs(F) : 1.0;
    r.deviation_boundary = std::abs(F - oracle.boundary) / scale;
    r.deviation_curvature = std::abs(F - oracle.curvature) / scale;
    return r;
}

nlohmann::json to_json(const InvariantReport& r) {
    nlohmann::json dir = nlohmann::json::array();
    for (Eigen::Index a = 0; a < r.direction.size(); ++a) dir.push_back(r.direction(a));
    return {
        {"polytope", r.polytope},
        {"direction", dir},
        {"a0", to_string(r.a0)},
        {"a1", to_string(r.a1)},
        {"b0", to_string(r.b0)},
        {"b1", to_string(r.b1)},
        {"chi_norm_squared", to_string(r.chi_squared)},
        {"chi_norm", r.chi_norm},
        {"futaki", to_string(r.futaki)},
        {"futaki_value", to_double(r.futaki)},
        {"lower_bound", r.lower_bound},
        {"informative", r.informative},
        {"oracle_futaki", r.oracle_futaki},
        {"oracle_curvature", r.oracle_curvature},
        {"deviations", {{"boundary", r.deviation_boundary}, {"curvature", r.deviation_curvature}}},
    };
}

AlmostKahlerStructure random_admissible_structure(const DelzantPolytope& polytope, std::mt19937_64& rng,
                                                  int quadrature_order) {
    const int n = polytope.dimension();
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.05, 1.0);
    Polynomial shape(n, 2);
    for (int i = 0; i <= 2; ++i)
        for (int j = 0; j <= (n == 2 ? 2 - i : 0); ++j) shape.coeff(i, j) = normal(rng);
    ManifoldDescriptor d;
    d.polytope = polytope;
    d.perturbation_shape = shape;
    d.quadrature_order = quadrature_order;
    d.epsilon = uniform(rng);
    for (int attempt = 0; attempt < 40; ++attempt) {
        try {
            return build_structure(d);
        } catch (const ConvexityFailure&) {
            d.epsilon *= 0.5;
        }
    }
    throw ConvexityFailure("invariants.random_admissible_structure", "no admissible amplitude found");
}

double curvature_deviation(const AlmostKahlerStructure& structure) {
    return scalar_curvature(structure, convention_kappa()).hermitian_deviation_l2();
}

}  // namespace gq
