#include "gq/degeneration.hpp"

#include "gq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace gq {

namespace {

constexpr double kPi = std::numbers::pi;

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

Eigen::MatrixXd lattice_matrix(const std::vector<Eigen::VectorXi>& points, int n) {
    Eigen::MatrixXd L(static_cast<Eigen::Index>(points.size()), n);
    for (std::size_t j = 0; j < points.size(); ++j) L.row(static_cast<Eigen::Index>(j)) = points[j].cast<double>().transpose();
    return L;
}

void check_inputs(const Embedding& e, const WeightMatrix& weights, double t, const char* where) {
    if (e.backend != Backend::ExactToric) throw InvalidStructure(where, "the flow needs a toric embedding");
    if (weights.size() != e.dimension() || weights.level != e.level)
        throw InvalidStructure(where, "weight matrix does not match the embedding");
    if (!(t > 0.0 && t <= 1.0)) throw InvalidStructure(where, "t must lie in (0, 1]");
}

struct NewtonResult {
    Eigen::VectorXd p;
    int iterations = 0;
};

// Minimizes LSE(a + L xi) - <y, xi>, whose gradient is mu(xi) - y.
NewtonResult solve_image_point(const Eigen::VectorXd& a, const Eigen::MatrixXd& L, const Eigen::VectorXd& y,
                               Eigen::VectorXd xi, double tolerance) {
    auto objective = [&](const Eigen::VectorXd& z) { return log_sum_exp(a + L * z) - y.dot(z); };
    NewtonResult r;
    double F = objective(xi);
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd logits = a + L * xi;
        r.p = (logits.array() - log_sum_exp(logits)).exp().matrix();
        const Eigen::VectorXd mu = L.transpose() * r.p;
        const Eigen::VectorXd g = mu - y;
        r.iterations = it;
        if (g.norm() <= tolerance) return r;
        const Eigen::MatrixXd centred = L.rowwise() - mu.transpose();
        Eigen::MatrixXd C = centred.transpose() * r.p.asDiagonal() * centred;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
        Eigen::VectorXd step = ldlt.solve(g);
        if (!step.allFinite() || g.dot(step) <= 0.0) step = g;
        Eigen::VectorXd next = xi - step;
        double Fn = objective(next);
        auto residual = [&](const Eigen::VectorXd& z) {
            const Eigen::VectorXd lg = a + L * z;
            const Eigen::VectorXd q = (lg.array() - log_sum_exp(lg)).exp().matrix();
            return (L.transpose() * q - y).norm();
        };
        // near convergence F no longer resolves the decrease, so a full step
        // that shrinks the residual is taken as is
        if (!(residual(next) < g.norm())) {
            double alpha = 1.0;
            while (!(Fn <= F - 1e-4 * alpha * g.dot(step)) && alpha > 1e-12) {
                alpha *= 0.5;
                next = xi - alpha * step;
                Fn = objective(next);
            }
            if (alpha <= 1e-12) break;
        }
        xi = next;
        F = Fn;
    }
    std::ostringstream os;
    os << "Newton solve for the moment map stalled at y = " << y.transpose();
    throw NumericalFault("degeneration.flow_f", os.str());
}

Rational moment_integral(const DelzantPolytope& P, const Eigen::VectorXi& d) {
    const auto& v = P.vertices();
    if (P.dimension() == 1) {
        const Rational a = v.front()[0], b = v.back()[0];
        return Rational(d(0)) * (b * b - a * a) / 2;
    }
    Rational ix = 0, iy = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        const Rational cross = p[0] * q[1] - q[0] * p[1];
        ix += (p[0] + q[0]) * cross;
        iy += (p[1] + q[1]) * cross;
    }
    return (Rational(d(0)) * ix + Rational(d(1)) * iy) / 6;
}

}  // namespace

FlowState flow_f(const Embedding& e, const AlmostKahlerStructure& s, const WeightMatrix& weights, double t,
                 const FlowOptions& options) {
    check_inputs(e, weights, t, "degeneration.flow_f");
    const int n = e.complex_dimension;
    const int k = e.level;
    const Eigen::MatrixXd L = lattice_matrix(e.lattice_points, n);
    const Eigen::VectorXd w = weights.diagonal();
    const Eigen::VectorXd wbar = weights.trace_free_diagonal();
    const double mean_weight = to_double(weights.trace()) / weights.size();
    const double log_t = std::log(t);
    // |t^w Z|^2 = t^{2w} |Z|^2, applied in logs
    const Eigen::VectorXd tilt = 2.0 * log_t * w;

    FlowState st;
    st.t = t;

    // image chart: Lebesgue measure on kP
    const int order = options.image_order > 0 ? options.image_order : std::max(48, 3 * k + 24);
    const Quadrature image = s.polytope().quadrature(order).scaled(static_cast<double>(k));
    const Eigen::VectorXd a = e.log_coefficients + tilt;
    const Eigen::VectorXd d = weights.direction.cast<double>();
    st.moment_diagonal = Eigen::VectorXd::Zero(L.rows());
    double h_integral = 0.0;
    for (Eigen::Index i = 0; i < image.size(); ++i) {
        const Eigen::VectorXd y = image.point(i);
        const Eigen::VectorXd xi0 = 2.0 * s.potential().gradient(y / k) + 2.0 * log_t * d;
        const NewtonResult r = solve_image_point(a, L, y, xi0, options.newton_tolerance * k);
        st.newton_iterations = std::max(st.newton_iterations, r.iterations);
        st.moment_diagonal += image.weights(i) * r.p;
        h_integral += image.weights(i) * (-r.p.dot(w));
    }
    st.volume = image.weights.sum();
    st.f_trace = -wbar.dot(st.moment_diagonal);
    st.f_integral = h_integral + mean_weight * st.volume;

    // original chart: density det(d mu^t) on the embedding's nodes
    const Eigen::Index m = e.nodes.size();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    Eigen::VectorXd chart_m = Eigen::VectorXd::Zero(L.rows());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd logits = e.log_probability.row(i).transpose() + tilt;
        const double norm = log_sum_exp(logits);
        if (!std::isfinite(norm)) {
            std::ostringstream os;
            os << "all rescaled coordinates vanish at node " << i << " for t = " << t;
            throw UnderflowAtNode("degeneration.flow_f", os.str());
        }
        const Eigen::VectorXd p = (logits.array() - norm).exp().matrix();
        const Eigen::VectorXd mu = L.transpose() * p;
        const Eigen::MatrixXd centred = L.rowwise() - mu.transpose();
        const Eigen::MatrixXd cov = centred.transpose() * p.asDiagonal() * centred;
        const double density = (2.0 * cov * s.potential().hessian(e.nodes.point(i))).determinant();
        lo = std::min(lo, density);
        hi = std::max(hi, density);
        chart_m += e.nodes.weights(i) * density * p;
        st.chart_volume += e.nodes.weights(i) * density;
    }
    st.mass_concentration = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    st.chart_f = -wbar.dot(chart_m);
    return st;
}

std::vector<double> geometric_grid(double t_min, double ratio) {
    if (!(t_min > 0.0 && t_min < 1.0) || !(ratio > 0.0 && ratio < 1.0))
        throw InvalidStructure("degeneration.geometric_grid", "need 0 < t_min < 1 and 0 < ratio < 1");
    std::vector<double> ts;
    for (double t = 1.0; t > t_min; t *= ratio) ts.push_back(t);
    ts.push_back(t_min);
    return ts;
}

namespace {

std::vector<FlowState> flow_states(const Embedding& e, const AlmostKahlerStructure& s, const WeightMatrix& weights,
                                   const std::vector<double>& ts, const FlowOptions& options) {
    std::vector<FlowState> out(ts.size());
    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(ts.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < ts.size(); ++i) out[i] = flow_f(e, s, weights, ts[i], options);
        return out;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < ts.size(); i += static_cast<std::size_t>(threads))
                    out[i] = flow_f(e, s, weights, ts[i], options);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return out;
}

}  // namespace

MonotonicityReport monotonicity_check(const Embedding& e, const AlmostKahlerStructure& s, const WeightMatrix& weights,
                                      const std::vector<double>& grid, double tolerance, const FlowOptions& options) {
    std::vector<double> ts = grid;
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (ts.size() < 20) throw InvalidStructure("degeneration.monotonicity_check", "need at least 20 grid points");
    const std::vector<FlowState> states = flow_states(e, s, weights, ts, options);

    MonotonicityReport r;
    r.ts = ts;
    for (const auto& st : states) {
        r.f.push_back(st.f_trace);
        r.volume.push_back(st.volume);
        r.mass_concentration.push_back(st.mass_concentration);
        r.formula_gap = std::max(r.formula_gap, std::abs(st.f_trace - st.f_integral));
    }
    const std::size_t m = ts.size();
    for (double v : r.volume) r.volume_spread = std::max(r.volume_spread, std::abs(v - r.volume.back()));
    r.derivative.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == m ? i : i + 1;
        r.derivative[i] = (r.f[hi] - r.f[lo]) / (ts[hi] - ts[lo]);
    }
    r.strictly_increasing = true;
    std::size_t worst = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double drop = r.f[i] - r.f[i + 1];
        if (drop > r.worst_drop) {
            r.worst_drop = drop;
            worst = i;
        }
        if (!(r.f[i + 1] > r.f[i] + tolerance)) r.strictly_increasing = false;
    }
    double worst_slope = 0.0;
    for (double dv : r.derivative) worst_slope = std::min(worst_slope, dv);
    r.monotone = r.worst_drop <= tolerance && worst_slope >= -1e-8;
    if (!r.monotone) {
        std::ostringstream os;
        os.precision(17);
        os << "f(" << ts[worst] << ") = " << r.f[worst] << " exceeds f(" << ts[worst + 1] << ") = " << r.f[worst + 1];
        throw MonotonicityViolation("degeneration.monotonicity_check", os.str());
    }
    return r;
}

Rational toric_flow_value(const DelzantPolytope& P, const WeightMatrix& weights) {
    const int n = P.dimension();
    Rational kp = 1;
    for (int i = 0; i < n; ++i) kp *= weights.level;
    const Rational h_integral = moment_integral(P, weights.direction) - Rational(weights.lift) * P.volume();
    return kp * weights.level * h_integral + P.volume() * kp * weights.trace() / weights.size();
}

LimitEstimate limit_f(const Embedding& e, const AlmostKahlerStructure& s, const WeightMatrix& weights, double t_min,
                      const FlowOptions& options, double tolerance) {
    const std::vector<double> grid = geometric_grid(t_min);
    const MonotonicityReport mono = monotonicity_check(e, s, weights, grid, tolerance, options);
    LimitEstimate r;
    r.monotonicity = mono;
    r.ts = mono.ts;
    r.f = mono.f;
    r.f_min_t = mono.f.front();
    r.mass_concentration = *std::max_element(mono.mass_concentration.begin(), mono.mass_concentration.end());
    // f(t) = f0 + c1 t + c2 t^2 through the three smallest t
    const double t0 = r.ts[0], t1 = r.ts[1], t2 = r.ts[2];
    const double f0 = r.f[0], f1 = r.f[1], f2 = r.f[2];
    r.extrapolated = f0 * t1 * t2 / ((t0 - t1) * (t0 - t2)) + f1 * t0 * t2 / ((t1 - t0) * (t1 - t2)) +
                     f2 * t0 * t1 / ((t2 - t0) * (t2 - t1));
    r.extrapolation_gap = std::abs(r.extrapolated - r.f_min_t);
    const double scale = std::max(1.0, std::abs(r.f_min_t));
    for (std::size_t i = 0; i + 2 < r.f.size(); ++i) {
        const double d1 = r.f[i + 1] - r.f[i], d2 = r.f[i + 2] - r.f[i + 1];
        if (d1 * d2 < 0.0 && std::min(std::abs(d1), std::abs(d2)) > 1e-9 * scale) r.oscillating = true;
    }
    r.exact = toric_flow_value(s.polytope(), weights);
    return r;
}

ChainLink chain_link(const Embedding& e, const AlmostKahlerStructure& s, const WeightMatrix& weights,
                     const LimitEstimate& limit, double tolerance) {
    check_inputs(e, weights, 1.0, "degeneration.assemble_bound");
    const int n = s.polytope().dimension();
    ChainLink c;
    c.level = e.level;
    c.norm_a = std::sqrt(to_double(weights.trace_free_square()));
    const MomentMatrix M = moment_matrix(e);
    c.norm_m = M.norm;
    c.f_one = -weights.trace_free_diagonal().dot(M.matrix.diagonal().real());
    c.f_min_t = limit.f_min_t;
    const double product = c.norm_a * c.norm_m;
    c.slack = product - c.f_min_t;
    const double scale = std::pow(static_cast<double>(e.level), 0.5 * n - 1.0);
    c.normalized_lhs = 4.0 * kPi * c.norm_m / scale;
    c.normalized_rhs = c.norm_a > 0.0 ? 4.0 * kPi * c.f_min_t / (c.norm_a * scale) : 0.0;
    const double allowed = tolerance * std::max(1.0, product);
    std::ostringstream os;
    os.precision(17);
    if (product < c.f_one - allowed) {
        os << "||A|| ||M|| = " << product << " < f(1) = " << c.f_one;
        throw NumericalFault("degeneration.assemble_bound", os.str());
    }
    if (c.f_one < c.f_min_t - allowed) {
        os << "f(1) = " << c.f_one << " < f(t_min) = " << c.f_min_t;
        throw NumericalFault("degeneration.assemble_bound", os.str());
    }
    return c;
}

double richardson(const std::vector<double>& ks, const std::vector<double>& values) {
    if (ks.size() != values.size() || ks.size() < 3)
        throw InvalidStructure("degeneration.richardson", "need three levels");
    const std::size_t m = ks.size();
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
    for (int i = 0; i < 3; ++i) {
        const double k = ks[m - 3 + static_cast<std::size_t>(i)];
        A.row(i) << 1.0, 1.0 / k, 1.0 / (k * k);
        b(i) = values[m - 3 + static_cast<std::size_t>(i)];
    }
    return A.fullPivLu().solve(b)(0);
}

InequalityReport assemble_bound(const std::vector<ChainLink>& links, const InvariantReport& invariants,
                                double curvature_deviation) {
    InequalityReport r;
    r.links = links;
    std::vector<ChainLink> sorted = links;
    std::sort(sorted.begin(), sorted.end(), [](const ChainLink& a, const ChainLink& b) { return a.level < b.level; });
    std::vector<double> ks, lhs, rhs;
    for (const auto& c : sorted) {
        ks.push_back(c.level);
        lhs.push_back(c.normalized_lhs);
        rhs.push_back(c.normalized_rhs);
    }
    if (ks.size() >= 3) {
        r.extrapolated_lhs = richardson(ks, lhs);
        r.extrapolated_rhs = richardson(ks, rhs);
    } else if (!ks.empty()) {
        r.extrapolated_lhs = lhs.back();
        r.extrapolated_rhs = rhs.back();
    }
    r.futaki_bound = invariants.lower_bound;
    r.curvature_deviation = curvature_deviation;
    r.relative_gap = r.futaki_bound != 0.0 ? std::abs(r.extrapolated_rhs - r.futaki_bound) / std::abs(r.futaki_bound)
                                           : std::abs(r.extrapolated_rhs);
    return r;
}

nlohmann::json to_json(const ChainLink& c) {
    return {{"k", c.level},           {"norm_A", c.norm_a},
            {"norm_M", c.norm_m},     {"f_1", c.f_one},
            {"f_t_min", c.f_min_t},   {"slack", c.slack},
            {"normalized_lhs", c.normalized_lhs}, {"normalized_rhs", c.normalized_rhs}};
}

nlohmann::json to_json(const InequalityReport& r) {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& c : r.links) links.push_back(to_json(c));
    return {{"links", links},
            {"extrapolated_rhs", r.extrapolated_rhs},
            {"extrapolated_lhs", r.extrapolated_lhs},
            {"futaki_bound", r.futaki_bound},
            {"curvature_deviation", r.curvature_deviation},
            {"relative_gap", r.relative_gap}};
}

}  // namespace gq
