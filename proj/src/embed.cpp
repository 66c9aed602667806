#include "gq/embed.hpp"

#include "gq/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

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

Eigen::MatrixXd toric_form(const Eigen::MatrixXd& dmu) {
    const Eigen::Index n = dmu.rows();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    // Phi^* omega_FS = sum_ab (d mu_a / d x_b) dx_b ^ dtheta_a
    W.topRightCorner(n, n) = dmu.transpose();
    W.bottomLeftCorner(n, n) = -dmu;
    return W;
}

// Probabilities p_lambda at x from the stored coefficients.
Eigen::VectorXd toric_probabilities(const Embedding& e, const AlmostKahlerStructure& s, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd L = lattice_matrix(e.lattice_points, e.complex_dimension);
    const Eigen::VectorXd logits = e.log_coefficients + L * (2.0 * s.potential().gradient(x));
    return (logits.array() - log_sum_exp(logits)).exp().matrix();
}

Embedding embed_toric(const QuantumSpace& space, const AlmostKahlerStructure& structure) {
    const int n = space.complex_dimension;
    const int k = space.level;
    Embedding e;
    e.complex_dimension = n;
    e.nodes = space.nodes;
    e.lattice_points = space.lattice_points;
    const Eigen::MatrixXd L = lattice_matrix(space.lattice_points, n);
    const auto& u = structure.potential();
    e.log_coefficients.resize(L.rows());
    for (Eigen::Index j = 0; j < L.rows(); ++j)
        e.log_coefficients(j) = -2.0 * k * u.value(L.row(j).transpose() / k) - space.log_norms(j);

    const Eigen::Index m = space.nodes.size();
    e.log_norm.resize(m);
    e.log_probability.resize(m, L.rows());
    e.moment.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd row = space.log_density.row(i).transpose();
        e.log_norm(i) = log_sum_exp(row);
        if (!std::isfinite(e.log_norm(i))) {
            std::ostringstream os;
            os << "all coordinates vanish at node " << i;
            throw BasePointFailure("embed.kodaira_embed", os.str());
        }
        e.log_probability.row(i) = (row.array() - e.log_norm(i)).transpose();
        e.moment.row(i) = e.log_probability.row(i).array().exp().matrix() * L;
    }
    e.coordinates = space.values;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::MatrixXd dmu = toric_moment_derivative(e, structure, i);
        e.fs_form.push_back(toric_form(dmu));
        e.fs_metric.push_back(e.fs_form.back() * structure.complex_structure(space.nodes.point(i)));
    }
    e.fs_volume.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) e.fs_volume(i) = e.fs_form[static_cast<std::size_t>(i)].topRightCorner(n, n).determinant();
    return e;
}

// Chart derivative of Z along one grid axis. Neighbours are rotated into the
// phase of the centre, which removes gauge jumps across the period without
// changing the projective point; 5-point stencils at h and 2h are combined
// by Richardson extrapolation.
Eigen::VectorXcd grid_derivative(const Eigen::MatrixXcd& Z, int N, int i, int j, int axis, double h) {
    const Eigen::VectorXcd centre = Z.row(static_cast<Eigen::Index>(i) * N + j).transpose();
    auto aligned = [&](int offset) -> Eigen::VectorXcd {
        const int ii = axis == 0 ? ((i + offset) % N + N) % N : i;
        const int jj = axis == 1 ? ((j + offset) % N + N) % N : j;
        Eigen::VectorXcd z = Z.row(static_cast<Eigen::Index>(ii) * N + jj).transpose();
        const std::complex<double> overlap = z.dot(centre);  // sum conj(z) centre
        if (std::abs(overlap) == 0.0) throw StencilError("embed.kodaira_embed", "neighbouring coordinates are orthogonal");
        return z * (overlap / std::abs(overlap));
    };
    auto five_point = [&](int s) -> Eigen::VectorXcd {
        return (-aligned(2 * s) + 8.0 * aligned(s) - 8.0 * aligned(-s) + aligned(-2 * s)) / (12.0 * s * h);
    };
    return (16.0 * five_point(1) - five_point(2)) / 15.0;
}

Embedding embed_grid(const QuantumSpace& space, const AlmostKahlerStructure& structure) {
    const Eigen::Index m = space.nodes.size();
    const int N = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    if (static_cast<Eigen::Index>(N) * N != m || N < 8)
        throw InvalidStructure("embed.kodaira_embed", "spectral nodes are not a square periodic grid");
    const double h = 1.0 / N;
    Embedding e;
    e.coordinates = space.values;
    e.log_norm.resize(m);
    const double largest = e.coordinates.rowwise().squaredNorm().maxCoeff();
    for (Eigen::Index i = 0; i < m; ++i) {
        const double r = e.coordinates.row(i).squaredNorm();
        if (!(r > 1e-14 * largest)) {
            std::ostringstream os;
            os << "all coordinates vanish at node " << i;
            throw BasePointFailure("embed.kodaira_embed", os.str());
        }
        e.log_norm(i) = std::log(r);
    }
    const double omega = structure.symplectic_form(space.nodes.point(0))(0, 1);
    e.fs_volume.resize(m);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const Eigen::Index node = static_cast<Eigen::Index>(i) * N + j;
            const Eigen::VectorXcd z = e.coordinates.row(node).transpose();
            const double r = z.squaredNorm();
            std::array<Eigen::VectorXcd, 2> d;
            for (int a = 0; a < 2; ++a) {
                d[a] = grid_derivative(e.coordinates, N, i, j, a, h);
                d[a] -= z * (z.dot(d[a]) / r);  // orthogonal to Z
            }
            Eigen::Matrix2d W = Eigen::Matrix2d::Zero(), G;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const std::complex<double> hab = d[b].dot(d[a]) / r;  // sum d_a conj(d_b)
                    G(a, b) = hab.real() / kPi;
                    if (a != b) W(a, b) = -hab.imag() / kPi;
                }
            e.fs_form.emplace_back(W);
            e.fs_metric.emplace_back(G);
            e.fs_volume(node) = W(0, 1) / omega;
        }
    return e;
}

}  // namespace

Embedding kodaira_embed(const QuantumSpace& space, const AlmostKahlerStructure& structure) {
    if (!space.evaluated()) throw InvalidStructure("embed.kodaira_embed", "space has no evaluated sections");
    Embedding e = space.backend == Backend::ExactToric ? embed_toric(space, structure) : embed_grid(space, structure);
    e.level = space.level;
    e.backend = space.backend;
    e.complex_dimension = space.complex_dimension;
    e.manifold = space.manifold;
    e.nodes = space.nodes;
    return e;
}

Eigen::MatrixXd toric_moment_derivative(const Embedding& e, const AlmostKahlerStructure& structure, Eigen::Index node) {
    const int n = e.complex_dimension;
    const Eigen::MatrixXd L = lattice_matrix(e.lattice_points, n);
    const Eigen::VectorXd p = e.log_probability.row(node).transpose().array().exp();
    const Eigen::MatrixXd centred = L.rowwise() - e.moment.row(node);
    const Eigen::MatrixXd cov = centred.transpose() * p.asDiagonal() * centred;
    return 2.0 * cov * structure.potential().hessian(e.nodes.point(node));
}

Eigen::VectorXd toric_moment(const Embedding& e, const AlmostKahlerStructure& structure, const Eigen::VectorXd& x) {
    if (e.backend != Backend::ExactToric) throw InvalidStructure("embed.toric_moment", "needs a toric embedding");
    return lattice_matrix(e.lattice_points, e.complex_dimension).transpose() * toric_probabilities(e, structure, x);
}

Eigen::MatrixXd toric_moment_derivative_stencil(const Embedding& e, const AlmostKahlerStructure& structure,
                                                const Eigen::VectorXd& x, double h) {
    const int n = e.complex_dimension;
    const auto& P = structure.polytope();
    for (int a = 0; a < n; ++a)
        for (int s : {-4, 4}) {
            Eigen::VectorXd y = x;
            y(a) += s * h;
            for (std::size_t f = 0; f < P.facets().size(); ++f)
                if (!(P.slack(f, y) > 0.0)) {
                    std::ostringstream os;
                    os << "stencil of width " << 4 * h << " leaves the polytope along axis " << a;
                    throw StencilError("embed.fs_pullback_residual", os.str());
                }
        }
    Eigen::MatrixXd D(n, n);
    for (int b = 0; b < n; ++b) {
        auto mu = [&](double t) {
            Eigen::VectorXd y = x;
            y(b) += t;
            return toric_moment(e, structure, y);
        };
        auto five_point = [&](double s) -> Eigen::VectorXd {
            return (-mu(2 * s) + 8.0 * mu(s) - 8.0 * mu(-s) + mu(-2 * s)) / (12.0 * s);
        };
        D.col(b) = (16.0 * five_point(h) - five_point(2 * h)) / 15.0;
    }
    return D;
}

FsResidual fs_pullback_residual(const Embedding& e, const AlmostKahlerStructure& structure) {
    FsResidual r;
    r.level = e.level;
    for (Eigen::Index i = 0; i < e.nodes.size(); ++i) {
        const Eigen::VectorXd x = e.nodes.point(i);
        const Eigen::MatrixXd delta = e.fs_form[static_cast<std::size_t>(i)] / e.level - structure.symplectic_form(x);
        Eigen::LLT<Eigen::MatrixXd> llt(structure.metric(x));
        if (llt.info() != Eigen::Success) throw SingularMetric("embed.fs_pullback_residual", "metric not positive definite");
        const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(delta.rows(), delta.cols()));
        const Eigen::MatrixXd frame = Linv * delta * Linv.transpose();
        const double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(frame).singularValues()(0);
        if (norm > r.sup) {
            r.sup = norm;
            r.worst_node = i;
        }
    }
    return r;
}

MomentMatrix moment_matrix(const Embedding& e) {
    MomentMatrix M;
    const Eigen::Index N = e.dimension();
    const Eigen::VectorXd w = e.nodes.weights.cwiseProduct(e.fs_volume);
    if (e.backend == Backend::ExactToric) {
        // torus averaging removes every off-diagonal entry
        const Eigen::VectorXd diag = e.log_probability.array().exp().matrix().transpose() * w;
        M.matrix = diag.cast<std::complex<double>>().asDiagonal();
    } else {
        M.matrix = Eigen::MatrixXcd::Zero(N, N);
        for (Eigen::Index i = 0; i < e.nodes.size(); ++i) {
            const Eigen::VectorXcd z = e.coordinates.row(i).transpose() * std::exp(-0.5 * e.log_norm(i));
            M.matrix.noalias() += w(i) * z * z.adjoint();
        }
    }
    M.trace = M.matrix.trace().real();
    M.trace_free = M.matrix - Eigen::MatrixXcd::Identity(N, N) * (M.trace / static_cast<double>(N));
    M.norm = M.trace_free.norm();
    return M;
}

double moment_norm_bound(int level, int complex_dimension, double curvature_deviation) {
    return std::pow(static_cast<double>(level), 0.5 * complex_dimension - 1.0) / (4.0 * kPi) * curvature_deviation;
}

Eigen::VectorXd hamiltonian_pullback(const Embedding& e, const WeightMatrix& weights) {
    if (weights.size() != e.dimension())
        throw InvalidStructure("embed.hamiltonian_pullback", "weight matrix does not match the embedding");
    const Eigen::VectorXd w = weights.diagonal();
    if (e.backend == Backend::ExactToric) return -(e.log_probability.array().exp().matrix() * w);
    Eigen::VectorXd out(e.nodes.size());
    for (Eigen::Index i = 0; i < e.nodes.size(); ++i)
        out(i) = -(e.coordinates.row(i).cwiseAbs2().transpose().dot(w)) * std::exp(-e.log_norm(i));
    return out;
}

double hamiltonian_residual(const Embedding& e, const WeightMatrix& weights) {
    if (e.backend != Backend::ExactToric)
        throw InvalidStructure("embed.hamiltonian_residual", "linear Hamiltonians need a toric embedding");
    const Eigen::VectorXd pulled = hamiltonian_pullback(e, weights) / e.level;
    const Eigen::VectorXd h = (e.nodes.points * weights.direction.cast<double>()).array() - static_cast<double>(weights.lift);
    return (pulled - h).cwiseAbs().maxCoeff();
}

}  // namespace gq
