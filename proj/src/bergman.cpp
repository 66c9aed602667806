#include "gq/bergman.hpp"

#include "gq/error.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

namespace gq {

BergmanField bergman_function(const QuantumSpace& space) {
    const char* where = "bergman.bergman_function";
    if (!space.evaluated()) throw InvalidStructure(where, "space has no evaluated sections");
    BergmanField b;
    b.level = space.level;
    b.backend = space.backend;
    b.dimension = space.dimension();
    b.values = space.density().rowwise().sum();
    b.weights = space.nodes.weights;
    b.integral = space.level_weights().dot(b.values);
    b.completeness_residual = std::abs(b.integral - b.dimension) / std::max(1, b.dimension);
    if (b.completeness_residual > 1e-4) {
        std::ostringstream os;
        os << "int B_k (k omega)^n/n! = " << b.integral << " but dim H_k = " << b.dimension;
        throw IncompleteBasis(where, os.str());
    }
    if (b.values.minCoeff() <= 0.0) throw IncompleteBasis(where, "B_k vanishes at a node");
    return b;
}

namespace {

struct LinearFit {
    Eigen::VectorXd c0, c1;
    double condition = 0.0;
};

LinearFit fit_two_terms(const std::vector<BergmanField>& fields, std::size_t count) {
    const Eigen::Index m = static_cast<Eigen::Index>(count);
    Eigen::MatrixXd A(m, 2), Y(m, fields.front().values.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = 1.0 / fields[static_cast<std::size_t>(i)].level;
        Y.row(i) = fields[static_cast<std::size_t>(i)].values.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    LinearFit f;
    f.condition = svd.singularValues()(0) / svd.singularValues()(1);
    if (!(f.condition < 1e8)) throw FitError("bergman.fit_bergman_expansion", "ill-conditioned design in 1/k");
    const Eigen::MatrixXd C = A.colPivHouseholderQr().solve(Y);
    f.c0 = C.row(0).transpose();
    f.c1 = C.row(1).transpose();
    return f;
}

}  // namespace

AsymptoticFit fit_bergman_expansion(const std::vector<BergmanField>& input, const ScalarCurvatureField& curvature) {
    const char* where = "bergman.fit_bergman_expansion";
    if (input.size() < 4) throw FitError(where, "at least four levels are needed");
    std::vector<BergmanField> fields = input;
    std::sort(fields.begin(), fields.end(), [](const auto& a, const auto& b) { return a.level < b.level; });
    for (std::size_t i = 1; i < fields.size(); ++i)
        if (fields[i].level == fields[i - 1].level) throw FitError(where, "repeated level");
    if (fields.front().backend == Backend::ExactToric && fields.back().level < 20)
        throw FitError(where, "the exact backend needs a largest level of at least 20");
    const Eigen::Index nodes = fields.front().values.size();
    for (const auto& f : fields)
        if (f.values.size() != nodes) throw FitError(where, "fields live on different node sets");
    if (curvature.abreu.size() != nodes) throw FitError(where, "curvature field lives on a different node set");

    const std::size_t holdout = std::min<std::size_t>(3, fields.size() - 3);
    const std::size_t used = fields.size() - holdout;
    const double kappa = std::isnan(curvature.kappa) ? convention_kappa() : curvature.kappa;

    AsymptoticFit fit;
    for (const auto& f : fields) fit.ks.push_back(f.level);
    fit.fit_ks.assign(fit.ks.begin(), fit.ks.begin() + static_cast<std::ptrdiff_t>(used));
    const LinearFit lf = fit_two_terms(fields, used);
    fit.c0 = lf.c0;
    fit.c1 = lf.c1;
    fit.design_condition = lf.condition;
    fit.curvature = kappa * curvature.abreu;
    fit.c0_sup_error = (fit.c0.array() - 1.0).abs().maxCoeff();
    fit.c1_correlation = correlation(fit.c1, curvature.abreu);
    fit.c1_sup_deviation = (fit.c1 - fit.curvature).cwiseAbs().maxCoeff();
    const Eigen::VectorXd& w = fields.front().weights;
    fit.integral_c0 = w.dot(fit.c0);
    fit.integral_c1 = w.dot(fit.c1);

    std::vector<double> kd;
    for (const auto& f : fields) {
        const double k = f.level;
        kd.push_back(k);
        fit.remainder.push_back((f.values.array() - 1.0 - fit.curvature.array() / k).abs().maxCoeff());
    }
    fit.remainder_decay = fit_decay(kd, fit.remainder);
    for (std::size_t i = used; i < fields.size(); ++i) {
        const double k = fields[i].level;
        fit.holdout_error.push_back((fields[i].values - fit.c0 - fit.c1 / k).cwiseAbs().maxCoeff());
    }
    for (std::size_t count = used; count <= fields.size(); ++count)
        fit.extension_c0_error.push_back((fit_two_terms(fields, count).c0.array() - 1.0).abs().maxCoeff());
    fit.monotone_improvement = std::is_sorted(fit.extension_c0_error.rbegin(), fit.extension_c0_error.rend());
    return fit;
}

Calibration calibrate_convention(const std::vector<long>& ks, const std::vector<long>& dims, int n,
                                 double integral_abreu) {
    const char* where = "bergman.calibrate_convention";
    if (ks.size() != dims.size()) throw FitError(where, "size mismatch");
    if (ks.size() < 5) throw FitError(where, "at least five exact dimension counts are needed");
    if (!(std::abs(integral_abreu) > 0)) throw FitError(where, "curvature integral vanishes");
    std::vector<Rational> ys;
    for (long d : dims) ys.emplace_back(d);
    std::vector<Rational> c;
    if (!interpolate_exact(ks, ys, n, c)) throw DimensionAnomaly(where, "dimension counts are not a polynomial of degree n");
    Calibration cal;
    cal.a0 = c[static_cast<std::size_t>(n)];
    cal.a1 = c[static_cast<std::size_t>(n - 1)];
    cal.integral_abreu = integral_abreu;
    cal.kappa = to_double(cal.a1) / integral_abreu;
    return cal;
}

double convention_kappa() {
    static std::once_flag once;
    static double kappa = 0.0;
    std::call_once(once, [] {
        ManifoldDescriptor d;
        d.polytope = DelzantPolytope::interval(0, 1);
        const auto s = build_structure(d);
        std::vector<long> ks, dims;
        for (long k = 1; k <= 8; ++k) {
            ks.push_back(k);
            dims.push_back(s.polytope().count_lattice_points(k));
        }
        kappa = calibrate_convention(ks, dims, 1, scalar_curvature(s).integral_abreu).kappa;
    });
    return kappa;
}

ConventionLabels convention_labels(double abreu_value, double kappa) {
    ConventionLabels l;
    l.kappa_s = kappa * abreu_value;
    const double sr = 2.0 * std::numbers::pi * abreu_value;
    l.riemannian_over_4pi = sr / (4.0 * std::numbers::pi);
    l.riemannian_over_8pi = sr / (8.0 * std::numbers::pi);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); };
    l.matching = close(l.kappa_s, l.riemannian_over_4pi)   ? "s/(4pi)"
                 : close(l.kappa_s, l.riemannian_over_8pi) ? "s/(8pi)"
                                                           : "neither";
    return l;
}

QOperator::QOperator(const QuantumSpace& space)
    : level_(space.level), backend_(space.backend), weights_(space.level_weights()) {
    if (!space.evaluated()) throw InvalidStructure("bergman.q_apply", "space has no evaluated sections");
    if (backend_ == Backend::ExactToric) density_ = space.density();
    else values_ = space.values;
}

Eigen::VectorXd QOperator::apply(const Eigen::VectorXd& f) const {
    if (f.size() != weights_.size()) throw InvalidStructure("bergman.q_apply", "function has the wrong number of nodes");
    if (backend_ == Backend::ExactToric) {
        // theta-averaging leaves sum_lambda |s(x)|^2 |s(y)|^2
        const Eigen::VectorXd moments = density_.transpose() * weights_.cwiseProduct(f);
        return density_ * moments;
    }
    const Eigen::MatrixXcd F = values_.adjoint() * (weights_.cwiseProduct(f)).asDiagonal() * values_;
    return ((values_ * F).cwiseProduct(values_.conjugate())).rowwise().sum().real();
}

double QOperator::kernel(Eigen::Index x, Eigen::Index y) const {
    if (backend_ == Backend::ExactToric)
        return std::pow((density_.row(x).cwiseSqrt().cwiseProduct(density_.row(y).cwiseSqrt())).sum(), 2);
    return std::norm(values_.row(x).dot(values_.row(y)));
}

Eigen::VectorXd q_apply(const QOperator& q, const Eigen::VectorXd& f) { return q.apply(f); }

}  // namespace gq
