#include "gq/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gq {

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int order) {
    if (order < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
    Eigen::VectorXd x(order), w(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= order; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = order * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged root
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= order; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = order * (z * p0 - p1) / (z * z - 1.0);
        x(i) = -z;
        x(order - 1 - i) = z;
        w(i) = w(order - 1 - i) = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

Quadrature Quadrature::scaled(double scale) const {
    Quadrature q;
    q.points = points * scale;
    q.weights = weights * std::pow(scale, dimension());
    return q;
}

namespace {

// Nodes s in (0, 1) with weights for ds, via s = sin^2(theta).
std::pair<Eigen::VectorXd, Eigen::VectorXd> clustered_unit(int order) {
    auto [x, w] = gauss_legendre(order);
    Eigen::VectorXd s(order), ws(order);
    const double half_pi = std::numbers::pi / 2.0;
    for (int i = 0; i < order; ++i) {
        const double theta = half_pi * (x(i) + 1.0) / 2.0;
        const double sn = std::sin(theta);
        s(i) = sn * sn;
        ws(i) = w(i) * (half_pi / 2.0) * std::sin(2.0 * theta);
    }
    return {s, ws};
}

}  // namespace

Quadrature clustered_interval(double a, double b, int order) {
    auto [s, ws] = clustered_unit(order);
    Quadrature q;
    q.points.resize(order, 1);
    q.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        q.points(i, 0) = a + (b - a) * s(i);
        q.weights(i) = (b - a) * ws(i);
    }
    return q;
}

Quadrature clustered_polygon(const std::vector<Eigen::Vector2d>& v, int order) {
    if (v.size() < 3) throw std::invalid_argument("clustered_polygon: need at least 3 vertices");
    using Patch = std::array<Eigen::Vector2d, 4>;
    std::vector<Patch> patches;
    if (v.size() == 3) {
        patches.push_back({v[0], v[1], v[2], v[2]});
    } else if (v.size() == 4) {
        patches.push_back({v[0], v[1], v[2], v[3]});
    } else {
        Eigen::Vector2d c = Eigen::Vector2d::Zero();
        for (const auto& p : v) c += p;
        c /= static_cast<double>(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) patches.push_back({v[i], v[(i + 1) % v.size()], c, c});
    }

    auto [s, ws] = clustered_unit(order);
    const Eigen::Index per_patch = static_cast<Eigen::Index>(order) * order;
    Quadrature q;
    q.points.resize(per_patch * static_cast<Eigen::Index>(patches.size()), 2);
    q.weights.resize(q.points.rows());
    Eigen::Index idx = 0;
    for (const auto& P : patches) {
        for (int i = 0; i < order; ++i)
            for (int j = 0; j < order; ++j) {
                const double a = s(i), b = s(j);
                const Eigen::Vector2d X = (1 - a) * (1 - b) * P[0] + a * (1 - b) * P[1] + a * b * P[2] +
                                          (1 - a) * b * P[3];
                const Eigen::Vector2d Xa = (1 - b) * (P[1] - P[0]) + b * (P[2] - P[3]);
                const Eigen::Vector2d Xb = (1 - a) * (P[3] - P[0]) + a * (P[2] - P[1]);
                const double jac = std::abs(Xa(0) * Xb(1) - Xa(1) * Xb(0));
                q.points.row(idx) = X.transpose();
                q.weights(idx) = ws(i) * ws(j) * jac;
                ++idx;
            }
    }
    return q;
}

}  // namespace gq
