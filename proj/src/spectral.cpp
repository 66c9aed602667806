#include "gq/spectral.hpp"

#include "gq/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace gq {

namespace {

constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

int expected_per_block(const SpectralProblem& p) {
    if (p.real_dimension == 4) return 1;
    return static_cast<int>(std::lround(p.level * p.structure_flux));
}

SpectralProblem assemble_t2(const AlmostKahlerStructure& s, int k, int N) {
    const char* where = "quantize.assemble_laplacian";
    const auto& t = s.torus();
    const Eigen::MatrixXd G = s.metric(Eigen::Vector2d::Zero());
    if (std::abs(G(0, 1)) > 1e-12 * G.norm())
        throw InvalidStructure(where, "the lattice discretization needs a rectangular period lattice");
    const long K = static_cast<long>(k) * t.flux;
    if (N < 16 * K) {
        std::ostringstream os;
        os << "grid " << N << " resolves fewer than 16 nodes per period per unit of flux (total flux " << K << ")";
        throw ResolutionError(where, os.str());
    }
    SpectralProblem p;
    p.level = k;
    p.real_dimension = 2;
    p.grid = N;
    p.spacing = 1.0 / N;
    p.shift = 2.0 * kPi * k;
    p.metric_xx = G(0, 0);
    p.metric_yy = G(1, 1);
    p.structure_flux = t.flux;
    p.plaquette_flux = static_cast<double>(K) / (static_cast<double>(N) * N);
    if (p.plaquette_flux > 0.5) throw ResolutionError(where, "magnetic flux per plaquette exceeds 1/2");

    // Landau gauge for the connection d - 2 pi i K x dy, whose curvature satisfies
    // (i/2pi) R = K dx^dy: y-links carry -2 pi K x h and x-links crossing x = 1
    // carry the transition phase.
    p.phase_x = Eigen::MatrixXd::Zero(N, N);
    p.phase_y = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            p.phase_y(i, j) = -2.0 * kPi * static_cast<double>(K) * i / (static_cast<double>(N) * N);
            if (i == N - 1) p.phase_x(i, j) = 2.0 * kPi * static_cast<double>(K) * j / N;
        }

    const double h2 = p.spacing * p.spacing;
    const double cx = 1.0 / (p.metric_xx * h2), cy = 1.0 / (p.metric_yy * h2);
    auto idx = [N](int i, int j) { return ((i + N) % N) * N + (j + N) % N; };
    std::vector<Eigen::Triplet<cd>> trip;
    trip.reserve(static_cast<std::size_t>(5) * N * N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const int a = idx(i, j);
            trip.emplace_back(a, a, 2.0 * (cx + cy));
            const cd ux = std::polar(1.0, p.phase_x(i, j));
            const cd uy = std::polar(1.0, p.phase_y(i, j));
            trip.emplace_back(a, idx(i + 1, j), -cx * ux);
            trip.emplace_back(idx(i + 1, j), a, -cx * std::conj(ux));
            trip.emplace_back(a, idx(i, j + 1), -cy * uy);
            trip.emplace_back(idx(i, j + 1), a, -cy * std::conj(uy));
        }
    SparseMatrixC H(N * N, N * N);
    H.setFromTriplets(trip.begin(), trip.end());
    p.blocks.push_back(std::move(H));
    return p;
}

SpectralProblem assemble_t4(const AlmostKahlerStructure& s, int k) {
    const auto& t = s.torus();
    const int K = k * t.flux;
    SpectralProblem p;
    p.level = k;
    p.real_dimension = 4;
    p.spacing = 1.0 / (16.0 * K);
    p.shift = 4.0 * kPi * k;
    p.structure_flux = t.flux;
    const double half_width = std::sqrt(16.0 / (kPi * K));
    const int M = static_cast<int>(std::ceil(half_width / p.spacing));
    const int side = 2 * M + 1;
    p.grid = side;
    const double h = p.spacing;
    auto idx = [side](int i, int j) { return i * side + j; };

    for (int j1 = 0; j1 < K; ++j1)
        for (int j2 = 0; j2 < K; ++j2) {
            const Eigen::Vector2d centre(static_cast<double>(j1) / K, static_cast<double>(j2) / K);
            p.sector_centres.push_back(centre);
            // 9-point stencil per row, indexed by (di + 1) * 3 + (dj + 1)
            std::vector<std::array<cd, 9>> stencil(static_cast<std::size_t>(side) * side);
            for (auto& row : stencil) row.fill(0.0);
            for (int i = 0; i < side; ++i)
                for (int j = 0; j < side; ++j) {
                    const double x1 = centre(0) + (i - M) * h, x2 = centre(1) + (j - M) * h;
                    const Eigen::Matrix4d Ginv = deformed_torus_metric(t.deformation, x1, x2).inverse() / t.flux;
                    const double q1 = -2.0 * kPi * K * (x1 - centre(0));
                    const double q2 = -2.0 * kPi * K * (x2 - centre(1));
                    for (int s1 = 0; s1 < 2; ++s1)
                        for (int s2 = 0; s2 < 2; ++s2) {
                            // rows of V = (D1, D2, i q1, i q2) as (offset, coefficient) lists
                            struct Entry {
                                int di, dj;
                                cd c;
                            };
                            std::array<std::array<Entry, 2>, 4> rows;
                            std::array<int, 4> len{2, 2, 1, 1};
                            rows[0] = s1 == 0 ? std::array<Entry, 2>{{{1, 0, 1.0 / h}, {0, 0, -1.0 / h}}}
                                              : std::array<Entry, 2>{{{0, 0, 1.0 / h}, {-1, 0, -1.0 / h}}};
                            rows[1] = s2 == 0 ? std::array<Entry, 2>{{{0, 1, 1.0 / h}, {0, 0, -1.0 / h}}}
                                              : std::array<Entry, 2>{{{0, 0, 1.0 / h}, {0, -1, -1.0 / h}}};
                            rows[2][0] = {0, 0, cd(0.0, q1)};
                            rows[3][0] = {0, 0, cd(0.0, q2)};
                            for (int a = 0; a < 4; ++a)
                                for (int b = 0; b < 4; ++b) {
                                    const double g = Ginv(a, b);
                                    if (g == 0.0) continue;
                                    for (int ea = 0; ea < len[a]; ++ea)
                                        for (int eb = 0; eb < len[b]; ++eb) {
                                            const Entry& ra = rows[a][ea];
                                            const Entry& rb = rows[b][eb];
                                            const int ri = i + ra.di, rj = j + ra.dj;
                                            const int ci = i + rb.di, cj = j + rb.dj;
                                            if (ri < 0 || ri >= side || rj < 0 || rj >= side) continue;
                                            if (ci < 0 || ci >= side || cj < 0 || cj >= side) continue;
                                            stencil[idx(ri, rj)][(ci - ri + 1) * 3 + (cj - rj + 1)] +=
                                                0.25 * std::conj(ra.c) * g * rb.c;
                                        }
                                }
                        }
                }
            std::vector<Eigen::Triplet<cd>> trip;
            trip.reserve(stencil.size() * 9);
            for (int i = 0; i < side; ++i)
                for (int j = 0; j < side; ++j)
                    for (int di = -1; di <= 1; ++di)
                        for (int dj = -1; dj <= 1; ++dj) {
                            const cd v = stencil[idx(i, j)][(di + 1) * 3 + (dj + 1)];
                            if (v == 0.0) continue;
                            trip.emplace_back(idx(i, j), idx(i + di, j + dj), v);
                        }
            SparseMatrixC H(side * side, side * side);
            H.setFromTriplets(trip.begin(), trip.end());
            p.blocks.push_back(std::move(H));
        }
    return p;
}

}  // namespace

std::size_t SpectralProblem::unknowns() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += static_cast<std::size_t>(b.rows());
    return n;
}

double SpectralProblem::hermiticity_defect() const {
    double worst = 0.0;
    for (const auto& b : blocks) {
        double scale = 0.0, defect = 0.0;
        for (int c = 0; c < b.outerSize(); ++c)
            for (SparseMatrixC::InnerIterator it(b, c); it; ++it) scale = std::max(scale, std::abs(it.value()));
        const SparseMatrixC d = b - SparseMatrixC(b.adjoint());
        for (int c = 0; c < d.outerSize(); ++c)
            for (SparseMatrixC::InnerIterator it(d, c); it; ++it) defect = std::max(defect, std::abs(it.value()));
        worst = std::max(worst, defect / scale);
    }
    return worst;
}

double SpectralProblem::cocycle_defect() const {
    if (real_dimension != 2) return 0.0;
    const int N = grid;
    const cd target = std::polar(1.0, -2.0 * kPi * plaquette_flux);
    double worst = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const int ip = (i + 1) % N, jp = (j + 1) % N;
            const double angle = phase_x(i, j) + phase_y(ip, j) - phase_x(i, jp) - phase_y(i, j);
            worst = std::max(worst, std::abs(std::polar(1.0, angle) - target));
        }
    return worst;
}

SpectralProblem assemble_laplacian(const AlmostKahlerStructure& structure, int k, int grid) {
    const char* where = "quantize.assemble_laplacian";
    if (structure.kind() != ManifoldKind::FlatTorus)
        throw InvalidStructure(where, "the spectral backend needs a flat or deformed torus");
    if (k < 1) throw InvalidStructure(where, "pre-quantization requires k >= 1");
    if (structure.torus().real_dimension == 2) return assemble_t2(structure, k, grid);
    return assemble_t4(structure, k);
}

SpectralProblem regauge(const SpectralProblem& problem, const Eigen::VectorXd& phases) {
    if (problem.real_dimension != 2) throw InvalidStructure("quantize.regauge", "gauge changes are for T^2 problems");
    const int N = problem.grid;
    if (phases.size() != static_cast<Eigen::Index>(N) * N)
        throw InvalidStructure("quantize.regauge", "one phase per node required");
    SpectralProblem p = problem;
    auto phi = [&](int i, int j) { return phases(((i + N) % N) * N + (j + N) % N); };
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            p.phase_x(i, j) += phi(i, j) - phi(i + 1, j);
            p.phase_y(i, j) += phi(i, j) - phi(i, j + 1);
        }
    Eigen::VectorXcd d(phases.size());
    for (Eigen::Index a = 0; a < phases.size(); ++a) d(a) = std::polar(1.0, phases(a));
    p.blocks[0] = d.asDiagonal() * problem.blocks[0] * d.conjugate().asDiagonal();
    return p;
}

EigenPairs lowest_eigenpairs(const SparseMatrixC& A, int count, const EigenOptions& options) {
    const char* where = "quantize.low_cluster";
    const Eigen::Index n = A.rows();
    const Eigen::Index p = std::min<Eigen::Index>(n, count + options.extra);
    if (count < 1 || count > n) throw InvalidStructure(where, "invalid eigenpair count");
    Eigen::SimplicialLDLT<SparseMatrixC> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NumericalFault(where, "sparse factorization failed");

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXcd X(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) X(i, j) = cd(normal(rng), normal(rng));

    EigenPairs out;
    Eigen::VectorXd theta;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Eigen::MatrixXcd Y = ldlt.solve(X);
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Y);
        const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, p);
        const Eigen::MatrixXcd AQ = A * Q;
        Eigen::MatrixXcd T = Q.adjoint() * AQ;
        T = 0.5 * (T + T.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T);
        theta = es.eigenvalues();
        X = Q * es.eigenvectors();
        const Eigen::MatrixXcd R = AQ * es.eigenvectors() - X * theta.asDiagonal();
        double worst = 0.0;
        for (int j = 0; j < count; ++j) worst = std::max(worst, R.col(j).norm() / std::max(1.0, std::abs(theta(j))));
        out.iterations = it;
        if (worst <= options.tolerance) break;
        if (it == options.max_iterations) {
            std::ostringstream os;
            os << "eigensolver did not converge (residual " << worst << ")";
            throw NumericalFault(where, os.str());
        }
    }
    out.values = theta.head(count);
    out.vectors = X.leftCols(count);
    return out;
}

namespace {

struct Solved {
    Eigen::VectorXd values;                 // renormalized, ascending over all blocks
    std::vector<int> block_of;              // block index per value
    std::vector<Eigen::VectorXcd> vectors;  // per value
};

Solved solve_all(const SpectralProblem& problem, int per_block, const EigenOptions& options) {
    std::vector<std::tuple<double, int, Eigen::VectorXcd>> all;
    for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
        EigenOptions o = options;
        o.extra = std::max(options.extra, per_block / 2);
        const EigenPairs e = lowest_eigenpairs(problem.blocks[b], per_block, o);
        for (Eigen::Index i = 0; i < e.values.size(); ++i)
            all.emplace_back(e.values(i) - problem.shift, static_cast<int>(b), e.vectors.col(i));
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    Solved s;
    s.values.resize(static_cast<Eigen::Index>(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) {
        s.values(static_cast<Eigen::Index>(i)) = std::get<0>(all[i]);
        s.block_of.push_back(std::get<1>(all[i]));
        s.vectors.push_back(std::get<2>(all[i]));
    }
    return s;
}

}  // namespace

namespace {

// min(1, gap / 4) with the gap taken as the largest spacing in the computed spectrum
double window_from(const Eigen::VectorXd& values) {
    double gap = 0.0;
    for (Eigen::Index i = 0; i + 1 < values.size(); ++i) gap = std::max(gap, values(i + 1) - values(i));
    return std::min(1.0, gap / 4.0);
}

}  // namespace

double default_window(const SpectralProblem& problem) {
    EigenOptions loose;
    loose.tolerance = 1e-5;
    const int per_block = problem.real_dimension == 4 ? 3 : 2 * expected_per_block(problem);
    return window_from(solve_all(problem, std::max(per_block, 2), loose).values);
}

std::pair<QuantumSpace, SpectralCluster> low_cluster(const SpectralProblem& problem, double c1,
                                                     const EigenOptions& options) {
    const char* where = "quantize.low_cluster";
    int per_block = problem.real_dimension == 4 ? 3 : 2 * expected_per_block(problem);
    per_block = std::max(per_block, 2);

    Solved s;
    for (;;) {
        s = solve_all(problem, per_block, options);
        if (c1 <= 0.0) c1 = window_from(s.values);
        // every block must resolve at least one eigenvalue above the window
        bool resolved = true;
        for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
            double top = -1e300;
            for (Eigen::Index i = 0; i < s.values.size(); ++i)
                if (s.block_of[static_cast<std::size_t>(i)] == static_cast<int>(b)) top = std::max(top, s.values(i));
            if (top < c1) resolved = false;
        }
        if (resolved) break;
        if (per_block * 2 > static_cast<int>(problem.blocks.front().rows())) break;
        per_block *= 2;
    }

    int inside = 0, inside_small = 0, inside_large = 0;
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        const double a = std::abs(s.values(i));
        if (a < c1) ++inside;
        if (a < 0.9 * c1) ++inside_small;
        if (a < 1.1 * c1) ++inside_large;
    }
    if (inside_small != inside_large) {
        std::ostringstream os;
        os << "an eigenvalue lies within 10% of the window edge C1 = " << c1 << "; candidate dimensions "
           << inside_small << " and " << inside_large;
        throw AmbiguousWindow(where, os.str());
    }

    SpectralCluster cluster;
    cluster.c1 = c1;
    cluster.computed_eigenvalues = s.values;
    cluster.window_eigenvalues.resize(inside);
    std::vector<Eigen::Index> kept;
    cluster.first_above = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        if (std::abs(s.values(i)) < c1) {
            cluster.window_eigenvalues(static_cast<Eigen::Index>(kept.size())) = s.values(i);
            kept.push_back(i);
        } else if (s.values(i) >= c1) {
            cluster.first_above = std::min(cluster.first_above, s.values(i));
        }
    }
    cluster.gap_ratio = cluster.first_above / problem.level;
    cluster.c2_estimate = cluster.gap_ratio;

    QuantumSpace space;
    space.level = problem.level;
    space.backend = Backend::Spectral;
    space.complex_dimension = problem.real_dimension / 2;
    space.manifold = problem.real_dimension == 2 ? "flat-torus(T^2)" : "deformed-torus(T^4)";
    space.eigenvalues = cluster.window_eigenvalues;
    const int d = static_cast<int>(kept.size());
    if (problem.real_dimension == 2 && d > 0) {
        const int N = problem.grid;
        const double h2 = problem.spacing * problem.spacing;
        space.nodes.points.resize(static_cast<Eigen::Index>(N) * N, 2);
        space.nodes.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(N) * N, problem.structure_flux * h2);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                space.nodes.points(i * N + j, 0) = i * problem.spacing;
                space.nodes.points(i * N + j, 1) = j * problem.spacing;
            }
        Eigen::MatrixXcd raw(static_cast<Eigen::Index>(N) * N, d);
        for (int c = 0; c < d; ++c) raw.col(c) = s.vectors[static_cast<std::size_t>(kept[static_cast<std::size_t>(c)])];
        const Eigen::VectorXd w = space.level_weights();
        space.gram = raw.adjoint() * w.asDiagonal() * raw;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> gs(space.gram, Eigen::EigenvaluesOnly);
        space.gram_condition = gs.eigenvalues().maxCoeff() / gs.eigenvalues().minCoeff();
        Eigen::LLT<Eigen::MatrixXcd> llt(space.gram);
        space.values = llt.matrixU().solve<Eigen::OnTheRight>(raw);
    } else {
        space.gram = Eigen::MatrixXcd::Identity(d, d);
    }
    return {std::move(space), std::move(cluster)};
}

double nijenhuis_norm(double eps, double x1, double x2) {
    Eigen::Matrix4d W = Eigen::Matrix4d::Zero();
    W.topRightCorner<2, 2>().setIdentity();
    W.bottomLeftCorner<2, 2>() = -Eigen::Matrix2d::Identity();
    const Eigen::Matrix4d Winv = W.inverse();
    auto J = [&](double a, double b) { return Eigen::Matrix4d(Winv * deformed_torus_metric(eps, a, b)); };
    const double h = 1e-5;
    std::array<Eigen::Matrix4d, 4> dJ;
    dJ[0] = (J(x1 + h, x2) - J(x1 - h, x2)) / (2 * h);
    dJ[1] = (J(x1, x2 + h) - J(x1, x2 - h)) / (2 * h);
    dJ[2] = dJ[3] = Eigen::Matrix4d::Zero();
    const Eigen::Matrix4d J0 = J(x1, x2);
    double norm2 = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) {
                double v = 0.0;
                for (int l = 0; l < 4; ++l) {
                    v += J0(l, i) * dJ[l](k, j) - J0(l, j) * dJ[l](k, i);
                    v -= J0(k, l) * (dJ[i](l, j) - dJ[j](l, i));
                }
                norm2 += v * v;
            }
    return std::sqrt(norm2);
}

}  // namespace gq
