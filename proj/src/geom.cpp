#include "gq/geom.hpp"

#include "gq/error.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Rational dot(const Eigen::VectorXi& u, const std::vector<Rational>& x) {
    Rational acc = 0;
    for (int a = 0; a < u.size(); ++a) acc += Rational(u(a)) * x[a];
    return acc;
}

bool is_integer(const Rational& r) { return boost::multiprecision::denominator(r) == 1; }

Facet facet(std::initializer_list<int> normal, long offset) {
    Facet f;
    f.normal = Eigen::VectorXi(static_cast<int>(normal.size()));
    int i = 0;
    for (int v : normal) f.normal(i++) = v;
    f.offset = Rational(offset);
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// DelzantPolytope

DelzantPolytope::DelzantPolytope(std::vector<Facet> facets, std::string name)
    : name_(std::move(name)), facets_(std::move(facets)) {
    validate();
}

DelzantPolytope DelzantPolytope::interval(long a, long b) {
    return DelzantPolytope({facet({1}, a), facet({-1}, -b)},
                           a == 0 && b == 1 ? "interval" : "interval[" + std::to_string(a) + "," +
                                                               std::to_string(b) + "]");
}

DelzantPolytope DelzantPolytope::unit_square() {
    return DelzantPolytope({facet({1, 0}, 0), facet({0, 1}, 0), facet({-1, 0}, -1), facet({0, -1}, -1)},
                           "square");
}

DelzantPolytope DelzantPolytope::standard_triangle() {
    return DelzantPolytope({facet({1, 0}, 0), facet({0, 1}, 0), facet({-1, -1}, -1)}, "triangle");
}

DelzantPolytope DelzantPolytope::hirzebruch() {
    return DelzantPolytope({facet({1, 0}, 0), facet({0, 1}, 0), facet({0, -1}, -1), facet({-1, -1}, -2)},
                           "hirzebruch");
}

DelzantPolytope DelzantPolytope::preset(const std::string& name) {
    if (name == "interval" || name == "cp1") return interval(0, 1);
    if (name == "interval2") return interval(0, 2);
    if (name == "square") return unit_square();
    if (name == "triangle") return standard_triangle();
    if (name == "hirzebruch") return hirzebruch();
    throw InvalidStructure("geom.build_structure", "unknown polytope preset '" + name + "'");
}

void DelzantPolytope::validate() {
    const char* where = "geom.build_structure";
    if (facets_.empty()) throw DelzantViolation(where, "no facets");
    dimension_ = static_cast<int>(facets_.front().normal.size());
    for (const auto& f : facets_)
        if (f.normal.size() != dimension_) throw DelzantViolation(where, "facet normals of mixed dimension");

    if (dimension_ == 1) {
        if (facets_.size() != 2) throw DelzantViolation(where, "an interval needs exactly two facets");
        std::sort(facets_.begin(), facets_.end(),
                  [](const Facet& a, const Facet& b) { return a.normal(0) > b.normal(0); });
        if (facets_[0].normal(0) != 1 || facets_[1].normal(0) != -1)
            throw DelzantViolation(where, "interval normals must be +1 and -1");
        const Rational a = facets_[0].offset, b = -facets_[1].offset;
        if (!(a < b)) throw DelzantViolation(where, "empty interior");
        vertices_ = {{a}, {b}};
        volume_ = b - a;
        boundary_measure_ = 2;
        return;
    }
    if (dimension_ != 2) throw DelzantViolation(where, "only dimensions 1 and 2 are supported");

    const std::size_t m = facets_.size();
    if (m < 3) throw DelzantViolation(where, "unbounded: fewer than three facets");
    for (const auto& f : facets_)
        if (std::gcd(std::abs(f.normal(0)), std::abs(f.normal(1))) != 1)
            throw DelzantViolation(where, "facet normal is not primitive");

    struct Vertex {
        std::vector<Rational> p;
        std::vector<int> tight;
    };
    std::vector<Vertex> verts;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto& u = facets_[i].normal;
            const auto& v = facets_[j].normal;
            const long det = static_cast<long>(u(0)) * v(1) - static_cast<long>(u(1)) * v(0);
            if (det == 0) continue;
            const Rational a = facets_[i].offset, b = facets_[j].offset;
            std::vector<Rational> p{(a * v(1) - b * u(1)) / det, (b * u(0) - a * v(0)) / det};
            bool feasible = true;
            std::vector<int> tight;
            for (std::size_t f = 0; f < m && feasible; ++f) {
                const Rational s = dot(facets_[f].normal, p) - facets_[f].offset;
                if (s < 0) feasible = false;
                if (s == 0) tight.push_back(static_cast<int>(f));
            }
            if (!feasible) continue;
            if (std::none_of(verts.begin(), verts.end(), [&](const Vertex& w) { return w.p == p; }))
                verts.push_back({p, tight});
        }

    if (verts.size() != m)
        throw DelzantViolation(where, "polytope is unbounded, empty or has redundant facets");
    for (const auto& w : verts) {
        if (w.tight.size() != 2) throw DelzantViolation(where, "vertex lies on more than two facets");
        const auto& u = facets_[w.tight[0]].normal;
        const auto& v = facets_[w.tight[1]].normal;
        const long det = static_cast<long>(u(0)) * v(1) - static_cast<long>(u(1)) * v(0);
        if (std::abs(det) != 1) {
            std::ostringstream os;
            os << "normals at vertex (" << to_string(w.p[0]) << ", " << to_string(w.p[1])
               << ") do not form a lattice basis (det " << det << ")";
            throw DelzantViolation(where, os.str());
        }
    }

    // counter-clockwise order around the centroid
    double cx = 0, cy = 0;
    for (const auto& w : verts) {
        cx += to_double(w.p[0]);
        cy += to_double(w.p[1]);
    }
    cx /= static_cast<double>(verts.size());
    cy /= static_cast<double>(verts.size());
    std::sort(verts.begin(), verts.end(), [&](const Vertex& a, const Vertex& b) {
        return std::atan2(to_double(a.p[1]) - cy, to_double(a.p[0]) - cx) <
               std::atan2(to_double(b.p[1]) - cy, to_double(b.p[0]) - cx);
    });
    vertices_.clear();
    for (const auto& w : verts) vertices_.push_back(w.p);

    volume_ = 0;
    boundary_measure_ = 0;
    edges_.assign(m, {-1, -1});
    const std::size_t nv = verts.size();
    for (std::size_t i = 0; i < nv; ++i) {
        const auto& a = verts[i];
        const auto& b = verts[(i + 1) % nv];
        volume_ += a.p[0] * b.p[1] - b.p[0] * a.p[1];
        int shared = -1;
        for (int f : a.tight)
            if (std::find(b.tight.begin(), b.tight.end(), f) != b.tight.end()) shared = f;
        if (shared < 0) throw DelzantViolation(where, "consecutive vertices share no facet");
        edges_[shared] = {static_cast<int>(i), static_cast<int>((i + 1) % nv)};
        const auto& u = facets_[shared].normal;
        // primitive edge direction is (-u1, u0); lattice length = e . p / |p|^2
        const Rational ex = b.p[0] - a.p[0], ey = b.p[1] - a.p[1];
        Rational len = (ex * (-u(1)) + ey * u(0)) / Rational(u(0) * u(0) + u(1) * u(1));
        if (len < 0) len = -len;
        boundary_measure_ += len;
    }
    volume_ /= 2;
    if (volume_ <= 0) throw DelzantViolation(where, "empty interior");
}

std::vector<Eigen::VectorXd> DelzantPolytope::vertices_double() const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& v : vertices_) {
        Eigen::VectorXd p(dimension_);
        for (int a = 0; a < dimension_; ++a) p(a) = to_double(v[a]);
        out.push_back(p);
    }
    return out;
}

bool DelzantPolytope::is_lattice_polytope() const {
    return std::all_of(vertices_.begin(), vertices_.end(), [](const auto& v) {
        return std::all_of(v.begin(), v.end(), [](const Rational& r) { return is_integer(r); });
    });
}

double DelzantPolytope::slack(std::size_t f, const Eigen::VectorXd& x) const {
    double acc = -to_double(facets_[f].offset);
    for (int a = 0; a < dimension_; ++a) acc += facets_[f].normal(a) * x(a);
    return acc;
}

bool DelzantPolytope::contains(const std::vector<long>& point, long k) const {
    for (const auto& f : facets_) {
        Rational s = 0;
        for (int a = 0; a < dimension_; ++a) s += Rational(static_cast<long>(f.normal(a)) * point[a]);
        if (s < f.offset * k) return false;
    }
    return true;
}

static long ceil_to_long(const Rational& r) {
    const BigInt num = boost::multiprecision::numerator(r);
    const BigInt den = boost::multiprecision::denominator(r);
    BigInt q = num / den;
    if (num % den != 0 && num > 0) q += 1;
    return static_cast<long>(q);
}

std::vector<Eigen::VectorXi> DelzantPolytope::lattice_points(long k) const {
    std::vector<long> lo(dimension_), hi(dimension_);
    for (int a = 0; a < dimension_; ++a) {
        Rational mn = vertices_[0][a], mx = vertices_[0][a];
        for (const auto& v : vertices_) {
            mn = std::min(mn, v[a]);
            mx = std::max(mx, v[a]);
        }
        lo[a] = static_cast<long>(std::floor(to_double(mn * k))) - 1;
        hi[a] = static_cast<long>(std::ceil(to_double(mx * k))) + 1;
    }
    // integer dot products clear a rational offset iff they clear its ceiling
    std::vector<long> threshold;
    for (const auto& f : facets_) threshold.push_back(ceil_to_long(f.offset * k));
    auto inside = [&](const std::vector<long>& q) {
        for (std::size_t i = 0; i < facets_.size(); ++i) {
            long s = 0;
            for (int a = 0; a < dimension_; ++a) s += static_cast<long>(facets_[i].normal(a)) * q[a];
            if (s < threshold[i]) return false;
        }
        return true;
    };
    std::vector<Eigen::VectorXi> pts;
    std::vector<long> p(dimension_);
    if (dimension_ == 1) {
        for (p[0] = lo[0]; p[0] <= hi[0]; ++p[0])
            if (inside(p)) pts.push_back(Eigen::VectorXi::Constant(1, static_cast<int>(p[0])));
    } else {
        for (p[0] = lo[0]; p[0] <= hi[0]; ++p[0])
            for (p[1] = lo[1]; p[1] <= hi[1]; ++p[1])
                if (inside(p)) {
                    Eigen::VectorXi q(2);
                    q << static_cast<int>(p[0]), static_cast<int>(p[1]);
                    pts.push_back(q);
                }
    }
    return pts;
}

long DelzantPolytope::count_lattice_points(long k) const {
    return static_cast<long>(lattice_points(k).size());
}

Quadrature DelzantPolytope::quadrature(int order) const {
    const auto v = vertices_double();
    if (dimension_ == 1) return clustered_interval(v[0](0), v[1](0), order);
    std::vector<Eigen::Vector2d> poly;
    for (const auto& p : v) poly.emplace_back(p(0), p(1));
    const Quadrature raw = clustered_polygon(poly, order);
    // Patch maps can round a node onto or just past a facet; such nodes carry
    // negligible weight and are dropped so every node is strictly interior.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        bool inside = true;
        for (std::size_t f = 0; f < facets_.size() && inside; ++f) inside = slack(f, raw.point(i)) > 0.0;
        if (inside) keep.push_back(i);
    }
    if (keep.size() == static_cast<std::size_t>(raw.size())) return raw;
    Quadrature q;
    q.points.resize(static_cast<Eigen::Index>(keep.size()), 2);
    q.weights.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        q.points.row(static_cast<Eigen::Index>(j)) = raw.points.row(keep[j]);
        q.weights(static_cast<Eigen::Index>(j)) = raw.weights(keep[j]);
    }
    return q;
}

Quadrature DelzantPolytope::boundary_quadrature(int order) const {
    Quadrature q;
    const auto v = vertices_double();
    if (dimension_ == 1) {
        q.points.resize(2, 1);
        q.points << v[0](0), v[1](0);
        q.weights = Eigen::VectorXd::Ones(2);
        return q;
    }
    auto [t, w] = gauss_legendre(order);
    const std::size_t m = facets_.size();
    q.points.resize(static_cast<Eigen::Index>(m) * order, 2);
    q.weights.resize(q.points.rows());
    Eigen::Index idx = 0;
    for (std::size_t f = 0; f < m; ++f) {
        const auto [ia, ib] = edges_[f];
        const Eigen::VectorXd a = v[ia], b = v[ib];
        const auto& u = facets_[f].normal;
        const double euclid = (b - a).norm();
        const double primitive = std::hypot(static_cast<double>(u(0)), static_cast<double>(u(1)));
        const double lattice_length = euclid / primitive;
        for (int i = 0; i < order; ++i) {
            const double s = 0.5 * (t(i) + 1.0);
            q.points.row(idx) = (a + s * (b - a)).transpose();
            q.weights(idx) = 0.5 * w(i) * lattice_length;
            ++idx;
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// SymplecticPotential

SymplecticPotential SymplecticPotential::guillemin(const DelzantPolytope& polytope) {
    SymplecticPotential u;
    u.dimension_ = polytope.dimension();
    for (const auto& f : polytope.facets()) {
        u.normals_.push_back(f.normal.cast<double>());
        u.offsets_.push_back(to_double(f.offset));
    }
    u.perturbation_ = Polynomial::constant(u.dimension_, 0.0);
    u.precompute();
    return u;
}

SymplecticPotential SymplecticPotential::perturbed(const DelzantPolytope& polytope, const Polynomial& shape,
                                                   double epsilon) {
    SymplecticPotential u = guillemin(polytope);
    Polynomial bump = shape;
    for (std::size_t f = 0; f < u.normals_.size(); ++f) {
        const Polynomial l = Polynomial::affine(-u.offsets_[f], u.normals_[f]);
        bump = bump * l * l;
    }
    u.perturbation_ = bump * epsilon;
    u.epsilon_ = epsilon;
    u.precompute();
    return u;
}

void SymplecticPotential::precompute() {
    partials_.assign(5, std::vector<Polynomial>(5));
    partials_[0][0] = perturbation_;
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; i + j <= 4; ++j) {
            if (i == 0 && j == 0) continue;
            if (dimension_ == 1 && j > 0) {
                partials_[i][j] = Polynomial::constant(1, 0.0);
                continue;
            }
            partials_[i][j] = j > 0 ? partials_[i][j - 1].derivative(1) : partials_[i - 1][j].derivative(0);
        }
}

double SymplecticPotential::value(const Eigen::VectorXd& x) const {
    double acc = perturbation_(x);
    for (std::size_t f = 0; f < normals_.size(); ++f) {
        const double l = normals_[f].dot(x) - offsets_[f];
        if (l > 0) acc += 0.5 * l * std::log(l);
    }
    return acc;
}

Eigen::VectorXd SymplecticPotential::gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(dimension_);
    g(0) = partials_[1][0](x);
    if (dimension_ > 1) g(1) = partials_[0][1](x);
    for (std::size_t f = 0; f < normals_.size(); ++f) {
        const double l = normals_[f].dot(x) - offsets_[f];
        g += 0.5 * (std::log(l) + 1.0) * normals_[f];
    }
    return g;
}

Eigen::MatrixXd SymplecticPotential::hessian(const Eigen::VectorXd& x) const { return jet(x, 2).hessian; }

SymplecticPotential::Jet SymplecticPotential::jet(const Eigen::VectorXd& x, int order) const {
    return jet(x, order, Eigen::MatrixXd::Identity(dimension_, dimension_));
}

SymplecticPotential::Jet SymplecticPotential::jet(const Eigen::VectorXd& x, int order, const Eigen::MatrixXd& C) const {
    const int n = dimension_;
    Jet J;
    J.value = value(x);
    J.gradient = C.transpose() * gradient(x);
    auto partial = [&](int i, int j) { return partials_[i][j](x); };
    // index helpers: multi-index from a list of axis labels
    auto pd = [&](std::initializer_list<int> axes) {
        int i = 0, j = 0;
        for (int a : axes) (a == 0 ? i : j)++;
        return partial(i, j);
    };

    // Perturbation derivatives in x, pulled back along x = C y.
    Eigen::MatrixXd h(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) h(a, b) = pd({a, b});
    J.hessian = C.transpose() * h * C;

    std::vector<double> ls(normals_.size());
    std::vector<Eigen::VectorXd> us(normals_.size());
    for (std::size_t f = 0; f < normals_.size(); ++f) {
        ls[f] = normals_[f].dot(x) - offsets_[f];
        us[f] = C.transpose() * normals_[f];
        J.hessian += 0.5 / ls[f] * us[f] * us[f].transpose();
    }
    if (order >= 3) {
        std::vector<Eigen::MatrixXd> tx(n, Eigen::MatrixXd(n, n));
        for (int c = 0; c < n; ++c)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) tx[c](a, b) = pd({a, b, c});
        J.third.assign(n, Eigen::MatrixXd::Zero(n, n));
        for (int c = 0; c < n; ++c) {
            for (int k = 0; k < n; ++k) J.third[c] += C(k, c) * (C.transpose() * tx[k] * C);
            for (std::size_t f = 0; f < normals_.size(); ++f)
                J.third[c] -= 0.5 * us[f](c) / (ls[f] * ls[f]) * us[f] * us[f].transpose();
        }
    }
    if (order >= 4) {
        std::vector<std::vector<Eigen::MatrixXd>> fx(n, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd(n, n)));
        for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d)
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) fx[c][d](a, b) = pd({a, b, c, d});
        J.fourth.assign(n, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n)));
        for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) {
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) J.fourth[c][d] += C(k, c) * C(l, d) * (C.transpose() * fx[k][l] * C);
                for (std::size_t f = 0; f < normals_.size(); ++f)
                    J.fourth[c][d] += us[f](c) * us[f](d) / (ls[f] * ls[f] * ls[f]) * us[f] * us[f].transpose();
            }
    }
    return J;
}

Eigen::MatrixXd SymplecticPotential::adapted_frame(const Eigen::VectorXd& x) const {
    const int n = dimension_;
    std::vector<std::size_t> order(normals_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return normals_[a].dot(x) - offsets_[a] < normals_[b].dot(x) - offsets_[b];
    });
    Eigen::MatrixXd B(n, n);
    B.row(0) = normals_[order[0]].transpose();
    if (n == 2) {
        for (std::size_t i = 1; i < order.size(); ++i) {
            const auto& v = normals_[order[i]];
            if (std::abs(B(0, 0) * v(1) - B(0, 1) * v(0)) > 0.5) {
                B.row(1) = v.transpose();
                break;
            }
        }
    }
    return B.inverse();
}

double abreu_scalar(const SymplecticPotential& potential, const Eigen::VectorXd& x) {
    // S is invariant under affine changes of chart. In coordinates given by the
    // nearest facets the Hessian is diagonally dominated by 1/(2 l_f), so its
    // inverse is accurate entrywise even very close to the boundary.
    const auto J = potential.jet(x, 4, potential.adapted_frame(x));
    const int n = potential.dimension();
    const Eigen::VectorXd d = J.hessian.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::LLT<Eigen::MatrixXd> llt(d.asDiagonal() * J.hessian * d.asDiagonal());
    if (llt.info() != Eigen::Success) throw SingularMetric("geom.scalar_curvature", "Hessian not positive definite");
    const Eigen::MatrixXd V = d.asDiagonal() * llt.solve(Eigen::MatrixXd::Identity(n, n)) * d.asDiagonal();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // d_i d_j V = V H_i V H_j V + V H_j V H_i V - V H_ij V
            const Eigen::MatrixXd t = V * J.third[i] * V * J.third[j] * V + V * J.third[j] * V * J.third[i] * V -
                                      V * J.fourth[i][j] * V;
            s -= t(i, j);
        }
    return s;
}

// ---------------------------------------------------------------------------
// AlmostKahlerStructure

const DelzantPolytope& AlmostKahlerStructure::polytope() const {
    if (!polytope_) throw InvalidStructure("geom", "structure has no moment polytope");
    return *polytope_;
}

const SymplecticPotential& AlmostKahlerStructure::potential() const {
    if (!potential_) throw InvalidStructure("geom", "structure has no symplectic potential");
    return *potential_;
}

const FlatTorusSpec& AlmostKahlerStructure::torus() const {
    if (kind_ != ManifoldKind::FlatTorus) throw InvalidStructure("geom", "structure is not a flat torus");
    return torus_;
}

std::string AlmostKahlerStructure::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case ManifoldKind::Toric:
            os << "toric(" << polytope().name();
            if (potential().epsilon() != 0.0) os << ", eps=" << potential().epsilon();
            os << ")";
            break;
        case ManifoldKind::RoundSphere: os << "round-sphere(area=" << volume_ << ")"; break;
        case ManifoldKind::FlatTorus:
            os << "flat-torus(T^" << torus_.real_dimension << ", flux=" << torus_.flux;
            if (torus_.deformation != 0.0) os << ", deformation=" << torus_.deformation;
            os << ")";
            break;
    }
    return os.str();
}

Eigen::Matrix4d deformed_torus_metric(double eps, double x1, double x2) {
    const double c2 = std::cos(kTwoPi * x2), s2 = std::sin(kTwoPi * x2);
    const double s1 = std::sin(kTwoPi * x1), c1 = std::cos(kTwoPi * x1);
    Eigen::Matrix2d A, B;
    A << c2, s1, s1, -c2;
    B << s2, 0.0, 0.0, c1;
    Eigen::Matrix4d Y;
    Y << A, B, B, -A;
    return (eps * Y).exp();
}

namespace {

Eigen::MatrixXd standard_symplectic(int n) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    W.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    W.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    return W;
}

}  // namespace

Eigen::MatrixXd AlmostKahlerStructure::symplectic_form(const Eigen::VectorXd&) const {
    const double scale = kind_ == ManifoldKind::FlatTorus ? torus_.flux : 1.0;
    return scale * standard_symplectic(dimension_);
}

Eigen::MatrixXd AlmostKahlerStructure::metric(const Eigen::VectorXd& p) const {
    const int n = dimension_;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    if (kind_ != ManifoldKind::FlatTorus) {
        const Eigen::MatrixXd H = potential_->hessian(p.head(n));
        G.topLeftCorner(n, n) = H / kTwoPi;
        G.bottomRightCorner(n, n) = kTwoPi * H.inverse();
        return G;
    }
    if (n == 1) {
        // Euclidean metric of the lattice basis rescaled to Riemannian area = flux.
        const double area = std::abs(torus_.basis.determinant());
        return (torus_.flux / area) * torus_.basis.transpose() * torus_.basis;
    }
    return torus_.flux * deformed_torus_metric(torus_.deformation, p(0), p(1));
}

Eigen::MatrixXd AlmostKahlerStructure::complex_structure(const Eigen::VectorXd& p) const {
    // g(u, v) = omega(u, J v)  =>  J = Omega^{-1} G
    return symplectic_form(p).inverse() * metric(p);
}

double AlmostKahlerStructure::volume_density(const Eigen::VectorXd&) const {
    if (kind_ == ManifoldKind::FlatTorus) return std::pow(static_cast<double>(torus_.flux), dimension_);
    return 1.0;
}

double AlmostKahlerStructure::compatibility_defect() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < quadrature_.size(); ++i) {
        const Eigen::VectorXd p = quadrature_.point(i);
        const Eigen::MatrixXd G = metric(p);
        const Eigen::MatrixXd J = complex_structure(p);
        const double scale = std::max(1.0, G.norm() * G.inverse().norm());
        worst = std::max(worst, (G - G.transpose()).norm() / G.norm());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0.0) worst = std::numeric_limits<double>::infinity();
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(G.rows(), G.cols());
        worst = std::max(worst, (J * J + id).norm() / scale);
    }
    return worst;
}

AlmostKahlerStructure build_structure(const ManifoldDescriptor& d) {
    const char* where = "geom.build_structure";
    AlmostKahlerStructure s;
    s.kind_ = d.kind;
    s.quadrature_order_ = d.quadrature_order;
    switch (d.kind) {
        case ManifoldKind::RoundSphere: {
            if (!(d.area > 0)) throw InvalidStructure(where, "sphere area must be positive");
            const double rounded = std::round(d.area);
            if (std::abs(rounded - d.area) > 1e-12 || rounded < 1)
                throw InvalidStructure(where, "sphere area must be a positive integer to be pre-quantizable");
            s.polytope_ = DelzantPolytope::interval(0, static_cast<long>(rounded));
            s.potential_ = SymplecticPotential::guillemin(*s.polytope_);
            break;
        }
        case ManifoldKind::Toric: {
            if (!d.polytope) throw InvalidStructure(where, "toric structure needs a polytope");
            s.polytope_ = *d.polytope;
            s.potential_ = d.epsilon == 0.0
                               ? SymplecticPotential::guillemin(*s.polytope_)
                               : SymplecticPotential::perturbed(*s.polytope_, d.perturbation_shape, d.epsilon);
            break;
        }
        case ManifoldKind::FlatTorus: {
            const auto& t = d.torus;
            if (t.flux < 1) throw InvalidStructure(where, "flux must be at least 1");
            if (t.real_dimension != 2 && t.real_dimension != 4)
                throw InvalidStructure(where, "flat tori of real dimension 2 or 4 only");
            if (t.real_dimension == 2 && std::abs(t.basis.determinant()) <= 0)
                throw InvalidStructure(where, "degenerate lattice basis");
            if (t.real_dimension == 2 && t.deformation != 0.0)
                throw InvalidStructure(where, "deformations are implemented for T^4 only");
            s.torus_ = t;
            s.dimension_ = t.real_dimension / 2;
            s.volume_ = std::pow(static_cast<double>(t.flux), s.dimension_);
            // uniform periodic grid (midpoint rule) on the unit cube, measure omega^n/n!
            const int m = std::max(4, d.quadrature_order / (s.dimension_ == 1 ? 1 : 4));
            const int dims = t.real_dimension;
            Eigen::Index total = 1;
            for (int a = 0; a < dims; ++a) total *= m;
            s.quadrature_.points.resize(total, dims);
            s.quadrature_.weights = Eigen::VectorXd::Constant(total, s.volume_ / static_cast<double>(total));
            for (Eigen::Index i = 0; i < total; ++i) {
                Eigen::Index r = i;
                for (int a = 0; a < dims; ++a) {
                    s.quadrature_.points(i, a) = (static_cast<double>(r % m) + 0.5) / m;
                    r /= m;
                }
            }
            if (s.compatibility_defect() > 1e-10) throw InvalidStructure(where, "compatibility check failed");
            return s;
        }
    }

    s.dimension_ = s.polytope_->dimension();
    s.volume_ = to_double(s.polytope_->volume());
    s.quadrature_ = s.polytope_->quadrature(d.quadrature_order);
    for (Eigen::Index i = 0; i < s.quadrature_.size(); ++i) {
        const Eigen::VectorXd x = s.quadrature_.point(i);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.potential_->hessian(x), Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 0.0)) {
            std::ostringstream os;
            os << "Hessian of the potential is not positive definite at node " << i << " (x = "
               << x.transpose() << ")";
            throw ConvexityFailure(where, os.str());
        }
    }
    if (s.compatibility_defect() > 1e-10) throw InvalidStructure(where, "compatibility check failed");
    return s;
}

// ---------------------------------------------------------------------------
// Curvature and Hamiltonians

Eigen::VectorXd ScalarCurvatureField::hermitian() const { return 4.0 * std::numbers::pi * kappa * abreu; }

double ScalarCurvatureField::hermitian_mean() const { return 4.0 * std::numbers::pi * kappa * mean_abreu; }

double ScalarCurvatureField::hermitian_deviation_l2() const {
    const Eigen::VectorXd dev = (hermitian().array() - hermitian_mean()).matrix();
    return std::sqrt(weights.dot(dev.cwiseAbs2()));
}

Eigen::VectorXd ScalarCurvatureField::riemannian() const { return kTwoPi * abreu; }

ScalarCurvatureField scalar_curvature(const AlmostKahlerStructure& structure, double kappa) {
    ScalarCurvatureField field;
    field.kappa = kappa;
    const auto& q = structure.quadrature();
    field.weights = q.weights;
    if (structure.kind() == ManifoldKind::FlatTorus) {
        if (structure.torus().deformation != 0.0)
            throw InvalidStructure("geom.scalar_curvature",
                                   "Hermitian scalar curvature is only implemented for flat and toric structures");
        field.abreu = Eigen::VectorXd::Zero(q.size());
        return field;
    }
    field.abreu.resize(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        try {
            field.abreu(i) = abreu_scalar(structure.potential(), q.point(i));
        } catch (const SingularMetric&) {
            std::ostringstream os;
            os << "Hessian inversion failed at node " << i;
            throw SingularMetric("geom.scalar_curvature", os.str());
        }
        if (!std::isfinite(field.abreu(i))) {
            std::ostringstream os;
            os << "non-finite curvature at node " << i;
            throw SingularMetric("geom.scalar_curvature", os.str());
        }
    }
    field.integral_abreu = q.integrate(field.abreu);
    field.mean_abreu = field.integral_abreu / q.weights.sum();
    return field;
}

double Hamiltonian::operator()(const Eigen::VectorXd& x) const { return direction.cast<double>().dot(x); }

Eigen::VectorXd Hamiltonian::centered() const { return (values.array() - mean).matrix(); }

Hamiltonian hamiltonian(const AlmostKahlerStructure& structure, const Eigen::VectorXd& direction) {
    const char* where = "geom.hamiltonian";
    if (!structure.is_toric_chart()) throw InvalidStructure(where, "Hamiltonians need a toric structure");
    if (direction.size() != structure.dimension()) throw InvalidStructure(where, "direction has wrong length");
    Hamiltonian h;
    h.direction = Eigen::VectorXi(direction.size());
    for (Eigen::Index a = 0; a < direction.size(); ++a) {
        const double r = std::round(direction(a));
        if (!std::isfinite(direction(a)) || std::abs(r - direction(a)) > 1e-12)
            throw LiftObstruction(where, "direction is not in the integer lattice; the action does not lift to L");
        h.direction(a) = static_cast<int>(r);
    }
    const auto& q = structure.quadrature();
    h.weights = q.weights;
    h.values = q.points * h.direction.cast<double>();
    h.mean = q.integrate(h.values) / q.weights.sum();
    return h;
}

}  // namespace gq
