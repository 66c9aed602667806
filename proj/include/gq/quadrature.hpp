#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace gq {

/// Gauss–Legendre nodes and weights on [-1, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int order);

/// Nodes and weights for a measure on a region of R^n. Points are stored row-wise.
struct Quadrature {
    Eigen::MatrixXd points;  // nodes x n
    Eigen::VectorXd weights;

    Eigen::Index size() const { return weights.size(); }
    int dimension() const { return static_cast<int>(points.cols()); }
    Eigen::VectorXd point(Eigen::Index i) const { return points.row(i).transpose(); }
    double integrate(const Eigen::VectorXd& values) const { return weights.dot(values); }
    /// Image under x -> scale * x (weights pick up scale^n).
    Quadrature scaled(double scale) const;
};

/// Rule on [a, b] using x = a + (b - a) sin^2(theta), which clusters nodes at both ends.
Quadrature clustered_interval(double a, double b, int order);

/// Rule on a convex polygon (vertices counter-clockwise). Triangles and
/// quadrilaterals are a single bilinear patch; larger polygons are fanned
/// from the centroid. Each patch uses the sin^2 substitution on both axes.
Quadrature clustered_polygon(const std::vector<Eigen::Vector2d>& vertices, int order);

}  // namespace gq
