#include "gq/quantize.hpp"

#include "gq/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gq {

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::ExactToric: return "exact-toric";
        case Backend::Spectral: return "spectral";
    }
    return "unknown";
}

int QuantumSpace::dimension() const {
    if (backend == Backend::ExactToric) return static_cast<int>(lattice_points.size());
    return static_cast<int>(eigenvalues.size());
}

Eigen::VectorXd QuantumSpace::level_weights() const {
    return nodes.weights * std::pow(static_cast<double>(level), complex_dimension);
}

Eigen::MatrixXd QuantumSpace::density() const {
    if (log_density.size() > 0) return log_density.array().exp().matrix();
    return values.cwiseAbs2();
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

struct NodeData {
    Eigen::VectorXd log_weight;
    Eigen::VectorXd base;      // 2k (u - <x, grad u>)
    Eigen::MatrixXd slope;     // nodes x n: 2 grad u
};

NodeData node_data(const SymplecticPotential& u, const Quadrature& q, int k) {
    NodeData d;
    const Eigen::Index m = q.size();
    d.log_weight = q.weights.array().log();
    d.base.resize(m);
    d.slope.resize(m, q.dimension());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd x = q.point(i);
        const Eigen::VectorXd g = u.gradient(x);
        d.base(i) = 2.0 * k * (u.value(x) - x.dot(g));
        d.slope.row(i) = 2.0 * g.transpose();
    }
    return d;
}

// log |s_lambda(x)|^2 = 2 [k u(x) + <lambda - kx, grad u(x)>] - 2k u(lambda/k) <= 0
Eigen::MatrixXd log_monomials(const NodeData& d, const Eigen::MatrixXd& lambdas, const Eigen::VectorXd& offsets) {
    Eigen::MatrixXd out = d.slope * lambdas.transpose();
    out.colwise() += d.base;
    out.rowwise() += offsets.transpose();
    return out;
}

Eigen::VectorXd log_norms_at(const SymplecticPotential& u, const DelzantPolytope& P, int k, int order,
                             const Eigen::MatrixXd& lambdas, const Eigen::VectorXd& offsets) {
    const Quadrature q = P.quadrature(order);
    const NodeData d = node_data(u, q, k);
    const Eigen::MatrixXd logs = log_monomials(d, lambdas, offsets);
    Eigen::VectorXd out(lambdas.rows());
    const double log_scale = P.dimension() * std::log(static_cast<double>(k));
    for (Eigen::Index j = 0; j < lambdas.rows(); ++j)
        out(j) = log_scale + log_sum_exp(logs.col(j) + d.log_weight);
    return out;
}

}  // namespace

QuantumSpace toric_basis(const AlmostKahlerStructure& structure, int k, const BasisOptions& options) {
    const char* where = "quantize.toric_basis";
    if (!structure.is_toric_chart()) throw InvalidStructure(where, "the exact backend needs a toric structure");
    if (k < 1) throw InvalidStructure(where, "level k must be at least 1");
    const auto& P = structure.polytope();
    const auto& u = structure.potential();

    QuantumSpace space;
    space.level = k;
    space.backend = Backend::ExactToric;
    space.complex_dimension = P.dimension();
    space.manifold = structure.describe();
    space.lattice_points = P.lattice_points(k);
    space.nodes = options.quadrature_order == structure.quadrature_order() ? structure.quadrature()
                                                                           : P.quadrature(options.quadrature_order);
    if (!options.evaluate) return space;

    const Eigen::Index N = static_cast<Eigen::Index>(space.lattice_points.size());
    const int n = P.dimension();
    Eigen::MatrixXd lambdas(N, n);
    Eigen::VectorXd offsets(N);
    for (Eigen::Index j = 0; j < N; ++j) {
        lambdas.row(j) = space.lattice_points[j].cast<double>().transpose();
        offsets(j) = -2.0 * k * u.value(lambdas.row(j).transpose() / k);
    }

    int order = std::max(options.quadrature_order, static_cast<int>(std::ceil(1.25 * k)) + 24);
    for (int attempt = 0;; ++attempt) {
        const int finer = (3 * order + 1) / 2;
        const Eigen::VectorXd coarse = log_norms_at(u, P, k, order, lambdas, offsets);
        const Eigen::VectorXd fine = log_norms_at(u, P, k, finer, lambdas, offsets);
        const double disagreement = ((coarse - fine).array().exp() - 1.0).abs().maxCoeff();
        if (disagreement <= options.refinement_tolerance) {
            space.log_norms = fine;
            space.norm_quadrature_order = finer;
            break;
        }
        if (attempt == 1) {
            std::ostringstream os;
            os << "section norms disagree by " << disagreement << " between orders " << order << " and " << finer;
            throw QuadratureFailure(where, os.str());
        }
        order *= 2;
    }

    const NodeData d = node_data(u, space.nodes, k);
    space.log_density = log_monomials(d, lambdas, offsets);
    space.log_density.rowwise() -= space.log_norms.transpose();
    space.values = (0.5 * space.log_density.array()).exp().matrix().cast<std::complex<double>>();
    space.gram_condition = std::exp(space.log_norms.maxCoeff() - space.log_norms.minCoeff());
    return space;
}

double orthonormality_defect(const QuantumSpace& space) {
    if (!space.evaluated()) throw InvalidStructure("quantize", "space has no evaluated sections");
    const Eigen::VectorXd w = space.level_weights();
    if (space.backend == Backend::ExactToric) {
        // theta-integration makes distinct monomials orthogonal exactly
        const Eigen::VectorXd diag = space.density().transpose() * w;
        return (diag.array() - 1.0).abs().maxCoeff();
    }
    const Eigen::MatrixXcd G = space.values.adjoint() * w.asDiagonal() * space.values;
    return (G - Eigen::MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

namespace {

BigInt floor_rational(const Rational& r) {
    const BigInt num = boost::multiprecision::numerator(r);
    const BigInt den = boost::multiprecision::denominator(r);
    BigInt q = num / den;
    if (num % den != 0 && num < 0) q -= 1;
    return q;
}

BigInt ceil_rational(const Rational& r) { return -floor_rational(-r); }

}  // namespace

long lattice_count_oracle(const DelzantPolytope& P, long k) {
    if (P.dimension() == 1) {
        const auto& v = P.vertices();
        const BigInt c = floor_rational(v[1][0] * k) - ceil_rational(v[0][0] * k) + 1;
        return std::max(0L, static_cast<long>(c));
    }
    if (P.is_lattice_polytope()) {
        // Pick: interior + boundary = A k^2 + B k / 2 + 1 with B = lattice boundary length
        const Rational count = P.volume() * k * k + P.boundary_measure() * k / 2 + 1;
        return static_cast<long>(boost::multiprecision::numerator(count));
    }
    Rational xmin = P.vertices()[0][0], xmax = xmin;
    for (const auto& v : P.vertices()) {
        xmin = std::min(xmin, v[0]);
        xmax = std::max(xmax, v[0]);
    }
    long total = 0;
    for (BigInt x = ceil_rational(xmin * k); x <= floor_rational(xmax * k); ++x) {
        Rational lo = -1e18, hi = 1e18;
        bool empty = false;
        for (const auto& f : P.facets()) {
            const Rational rhs = f.offset * k - Rational(f.normal(0)) * Rational(x);
            if (f.normal(1) > 0) lo = std::max(lo, Rational(rhs / f.normal(1)));
            else if (f.normal(1) < 0) hi = std::min(hi, Rational(rhs / f.normal(1)));
            else if (rhs > 0) empty = true;
        }
        if (empty) continue;
        const BigInt c = floor_rational(hi) - ceil_rational(lo) + 1;
        if (c > 0) total += static_cast<long>(c);
    }
    return total;
}

DimensionReport dim_count(const QuantumSpace& space, const AlmostKahlerStructure& structure) {
    DimensionReport r;
    r.dimension = space.dimension();
    if (structure.kind() == ManifoldKind::FlatTorus) {
        const auto& t = structure.torus();
        r.oracle = 1;
        for (int a = 0; a < structure.dimension(); ++a) r.oracle *= static_cast<long>(space.level) * t.flux;
        r.oracle_kind = "theta-count";
    } else {
        r.oracle = lattice_count_oracle(structure.polytope(), space.level);
        r.oracle_kind = structure.polytope().dimension() == 2 && structure.polytope().is_lattice_polytope()
                            ? "pick"
                            : "column-sweep";
    }
    r.match = r.oracle == r.dimension;
    if (!r.match && space.backend == Backend::ExactToric) {
        std::ostringstream os;
        os << "dim H_" << space.level << " = " << r.dimension << " but the " << r.oracle_kind << " oracle gives "
           << r.oracle;
        throw DimensionAnomaly("quantize.dim_count", os.str());
    }
    return r;
}

// ---------------------------------------------------------------------------
// QSPACE container

namespace {

constexpr char kMagic[8] = {'Q', 'S', 'P', 'A', 'C', 'E', '0', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void c128(std::complex<double> v) {
        f64(v.real());
        f64(v.imag());
    }
    void bytes(const std::string& s) { buf_.append(s); }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string data) : buf_(std::move(data)) {}
    bool done() const { return pos_ >= buf_.size(); }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::complex<double> c128() {
        const double re = f64();
        return {re, f64()};
    }
    std::string bytes(std::uint64_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint64_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::uint64_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError("quantize.read_qspace", "truncated container");
    }
    std::string buf_;
    std::size_t pos_ = 0;
};

void put_section(Writer& w, const char tag[5], const Writer& payload) {
    w.bytes(std::string(tag, 4));
    w.u64(payload.data().size());
    w.bytes(payload.data());
}

std::uint64_t checked_size(Reader& r, std::uint64_t a, std::uint64_t b, std::uint64_t item) {
    if (a != 0 && b > r.remaining() / item / a) throw FormatError("quantize.read_qspace", "implausible matrix size");
    return a * b;
}

}  // namespace

void write_qspace(std::ostream& out, const QuantumSpace& s) {
    Writer w;
    w.bytes(std::string(kMagic, 8));
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(s.backend));
    w.u32(static_cast<std::uint32_t>(s.level));
    w.u32(static_cast<std::uint32_t>(s.complex_dimension));

    {
        Writer p;
        p.bytes(s.manifold);
        put_section(w, "NAME", p);
    }
    {
        Writer p;
        p.u32(static_cast<std::uint32_t>(s.norm_quadrature_order));
        p.f64(s.gram_condition);
        put_section(w, "META", p);
    }
    {
        Writer p;
        p.u64(static_cast<std::uint64_t>(s.nodes.points.rows()));
        p.u64(static_cast<std::uint64_t>(s.nodes.points.cols()));
        for (Eigen::Index i = 0; i < s.nodes.points.rows(); ++i)
            for (Eigen::Index j = 0; j < s.nodes.points.cols(); ++j) p.f64(s.nodes.points(i, j));
        for (Eigen::Index i = 0; i < s.nodes.weights.size(); ++i) p.f64(s.nodes.weights(i));
        put_section(w, "NODE", p);
    }
    if (!s.lattice_points.empty()) {
        Writer p;
        p.u64(s.lattice_points.size());
        p.u64(static_cast<std::uint64_t>(s.lattice_points.front().size()));
        for (const auto& l : s.lattice_points)
            for (Eigen::Index a = 0; a < l.size(); ++a) p.i32(l(a));
        put_section(w, "LATT", p);
    }
    {
        Writer p;
        if (s.backend == Backend::ExactToric) {
            p.u8(0);
            p.u64(static_cast<std::uint64_t>(s.log_norms.size()));
            for (Eigen::Index i = 0; i < s.log_norms.size(); ++i) p.f64(s.log_norms(i));
        } else {
            p.u8(1);
            p.u64(static_cast<std::uint64_t>(s.gram.rows()));
            for (Eigen::Index i = 0; i < s.gram.rows(); ++i)
                for (Eigen::Index j = 0; j < s.gram.cols(); ++j) p.c128(s.gram(i, j));
        }
        put_section(w, "GRAM", p);
    }
    if (s.eigenvalues.size() > 0) {
        Writer p;
        p.u64(static_cast<std::uint64_t>(s.eigenvalues.size()));
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) p.f64(s.eigenvalues(i));
        put_section(w, "EIGS", p);
    }
    if (s.log_density.size() > 0) {
        Writer p;
        p.u64(static_cast<std::uint64_t>(s.log_density.rows()));
        p.u64(static_cast<std::uint64_t>(s.log_density.cols()));
        for (Eigen::Index i = 0; i < s.log_density.rows(); ++i)
            for (Eigen::Index j = 0; j < s.log_density.cols(); ++j) p.f64(s.log_density(i, j));
        put_section(w, "LOGD", p);
    }
    if (s.values.size() > 0) {
        Writer p;
        p.u64(static_cast<std::uint64_t>(s.values.rows()));
        p.u64(static_cast<std::uint64_t>(s.values.cols()));
        for (Eigen::Index i = 0; i < s.values.rows(); ++i)
            for (Eigen::Index j = 0; j < s.values.cols(); ++j) p.c128(s.values(i, j));
        put_section(w, "VALS", p);
    }
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw FormatError("quantize.write_qspace", "write failed");
}

QuantumSpace read_qspace(std::istream& in) {
    const char* where = "quantize.read_qspace";
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(data));
    if (r.remaining() < 8 || r.bytes(8) != std::string(kMagic, 8)) throw FormatError(where, "bad magic header");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError(where, "unsupported version " + std::to_string(version));
    QuantumSpace s;
    const std::uint32_t backend = r.u32();
    if (backend != 1 && backend != 2) throw FormatError(where, "unknown backend tag");
    s.backend = static_cast<Backend>(backend);
    s.level = static_cast<int>(r.u32());
    s.complex_dimension = static_cast<int>(r.u32());
    while (!r.done()) {
        const std::string tag = r.bytes(4);
        const std::uint64_t size = r.u64();
        Reader p(r.bytes(size));
        if (tag == "NAME") {
            s.manifold = p.bytes(size);
        } else if (tag == "META") {
            s.norm_quadrature_order = static_cast<int>(p.u32());
            s.gram_condition = p.f64();
        } else if (tag == "NODE") {
            const std::uint64_t rows = p.u64(), cols = p.u64();
            checked_size(p, rows, cols + 1, 8);
            s.nodes.points.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            s.nodes.weights.resize(static_cast<Eigen::Index>(rows));
            for (Eigen::Index i = 0; i < s.nodes.points.rows(); ++i)
                for (Eigen::Index j = 0; j < s.nodes.points.cols(); ++j) s.nodes.points(i, j) = p.f64();
            for (Eigen::Index i = 0; i < s.nodes.weights.size(); ++i) s.nodes.weights(i) = p.f64();
        } else if (tag == "LATT") {
            const std::uint64_t count = p.u64(), n = p.u64();
            checked_size(p, count, n, 4);
            for (std::uint64_t i = 0; i < count; ++i) {
                Eigen::VectorXi l(static_cast<Eigen::Index>(n));
                for (Eigen::Index a = 0; a < l.size(); ++a) l(a) = p.i32();
                s.lattice_points.push_back(l);
            }
        } else if (tag == "GRAM") {
            const std::uint8_t kind = p.u8();
            const std::uint64_t n = p.u64();
            if (kind == 0) {
                checked_size(p, n, 1, 8);
                s.log_norms.resize(static_cast<Eigen::Index>(n));
                for (Eigen::Index i = 0; i < s.log_norms.size(); ++i) s.log_norms(i) = p.f64();
            } else {
                checked_size(p, n, n, 16);
                s.gram.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
                for (Eigen::Index i = 0; i < s.gram.rows(); ++i)
                    for (Eigen::Index j = 0; j < s.gram.cols(); ++j) s.gram(i, j) = p.c128();
            }
        } else if (tag == "EIGS") {
            const std::uint64_t n = p.u64();
            checked_size(p, n, 1, 8);
            s.eigenvalues.resize(static_cast<Eigen::Index>(n));
            for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) s.eigenvalues(i) = p.f64();
        } else if (tag == "LOGD") {
            const std::uint64_t rows = p.u64(), cols = p.u64();
            checked_size(p, rows, cols, 8);
            s.log_density.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            for (Eigen::Index i = 0; i < s.log_density.rows(); ++i)
                for (Eigen::Index j = 0; j < s.log_density.cols(); ++j) s.log_density(i, j) = p.f64();
        } else if (tag == "VALS") {
            const std::uint64_t rows = p.u64(), cols = p.u64();
            checked_size(p, rows, cols, 16);
            s.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            for (Eigen::Index i = 0; i < s.values.rows(); ++i)
                for (Eigen::Index j = 0; j < s.values.cols(); ++j) s.values(i, j) = p.c128();
        }
        // unknown tags are skipped
    }
    return s;
}

void save_qspace(const std::string& path, const QuantumSpace& space) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("quantize.save_qspace", "cannot open " + path);
    write_qspace(out, space);
}

QuantumSpace load_qspace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("quantize.load_qspace", "cannot open " + path);
    return read_qspace(in);
}

}  // namespace gq
