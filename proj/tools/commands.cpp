#include "commands.hpp"

#include "gq/bergman.hpp"
#include "gq/degeneration.hpp"
#include "gq/embed.hpp"
#include "gq/error.hpp"
#include "gq/fit.hpp"
#include "gq/invariants.hpp"
#include "gq/quantize.hpp"
#include "gq/spectral.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <random>
#include <sstream>
#include <thread>

namespace gq::cli {

namespace {

using Row = std::vector<std::string>;

std::string num(double v) { return format_number(v); }
std::string num(long v) { return std::to_string(v); }

std::string direction_label(const Eigen::VectorXd& d) {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < d.size(); ++i) os << (i ? "_" : "") << std::lround(d(i));
    return os.str();
}

nlohmann::json direction_json(const Eigen::VectorXd& d) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < d.size(); ++i) j.push_back(std::lround(d(i)));
    return j;
}

// Runs fn(i) for i < count on a small pool; results keep their index order.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t count, int threads, F fn) {
    std::vector<T> out(count);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<Eigen::VectorXd> default_directions(int n) {
    auto v = [](std::initializer_list<double> xs) {
        Eigen::VectorXd d(static_cast<Eigen::Index>(xs.size()));
        Eigen::Index i = 0;
        for (double x : xs) d(i++) = x;
        return d;
    };
    if (n == 1) return {v({1})};
    return {v({1, 0}), v({0, 1}), v({1, 1}), v({2, 1})};
}

std::vector<Eigen::VectorXd> directions_for(const ExperimentConfig& c, int n) {
    std::vector<Eigen::VectorXd> ds = c.directions.empty() ? default_directions(n) : c.directions;
    for (const auto& d : ds)
        if (d.size() != n) throw ConfigError("cli.config", "field 'action.directions': direction has the wrong length");
    return ds;
}

std::vector<long> as_long(const std::vector<int>& ks) { return {ks.begin(), ks.end()}; }

void require_toric(const ExperimentConfig& c, const char* command) {
    if (c.spectral()) throw InvalidStructure(command, "this command needs a toric manifold");
}

// Evaluated space at level k, read from or written to the cache directory.
QuantumSpace space_at(const ExperimentConfig& c, const AlmostKahlerStructure& s, int k) {
    if (c.spectral()) return low_cluster(assemble_laplacian(s, k, c.spectral_grid), c.spectral_window).first;
    BasisOptions options;
    options.quadrature_order = c.quadrature_order;
    options.refinement_tolerance = c.effective_tolerances().refinement;
    if (c.cache.empty()) return toric_basis(s, k, options);
    std::ostringstream key;
    key.precision(17);
    key << s.describe() << "|k=" << k << "|order=" << options.quadrature_order << "|tol=" << options.refinement_tolerance;
    const auto path = std::filesystem::path(c.cache) / (sha256_hex(key.str()).substr(0, 24) + ".qspace");
    if (std::filesystem::exists(path)) return load_qspace(path.string());
    std::filesystem::create_directories(c.cache);
    QuantumSpace space = toric_basis(s, k, options);
    // write under a temporary name so concurrent runs never read a partial file
    const auto tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    save_qspace(tmp, space);
    std::filesystem::rename(tmp, path);
    return space;
}

std::vector<long> invariant_levels(const ExperimentConfig& c) {
    // exact interpolation needs at least n + 4 levels; the configured ones are used when enough
    if (c.ks.size() >= 6) return as_long(c.ks);
    return {1, 2, 3, 4, 5, 6, 7, 8};
}

}  // namespace

int dim_count_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    const auto s = make_structure(c);
    struct Result {
        int k = 0;
        DimensionReport report;
    };
    const auto results = parallel_map<Result>(c.ks.size(), c.threads, [&](std::size_t i) {
        const int k = c.ks[i];
        if (c.spectral()) return Result{k, dim_count(space_at(c, s, k), s)};
        BasisOptions options;
        options.evaluate = false;
        options.quadrature_order = c.quadrature_order;
        return Result{k, dim_count(toric_basis(s, k, options), s)};
    });
    std::vector<Row> rows;
    bool all = true;
    for (const auto& r : results) {
        rows.push_back({num(static_cast<long>(r.k)), num(r.report.dimension), num(r.report.oracle), r.report.oracle_kind,
                        r.report.match ? "1" : "0"});
        all = all && r.report.match;
    }
    sink.write_csv("dim_count.csv", {"k", "dim", "oracle", "oracle_kind", "match"}, rows);
    log << "dim-count: " << results.size() << " levels, " << (all ? "all match" : "MISMATCH") << "\n";
    return all ? 0 : 1;
}

int calibrate_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    const std::vector<long> ks = c.ks.size() >= 5 ? as_long(c.ks) : std::vector<long>{1, 2, 3, 4, 5, 6, 7, 8};
    auto counts = [&](const DelzantPolytope& P) {
        std::vector<long> dims;
        for (long k : ks) dims.push_back(P.count_lattice_points(k));
        return dims;
    };
    ManifoldDescriptor d;
    d.polytope = DelzantPolytope::interval(0, 1);
    const double sphere_integral = scalar_curvature(build_structure(d)).integral_abreu;
    const Calibration cal = calibrate_convention(ks, counts(*d.polytope), 1, sphere_integral);
    d.polytope = DelzantPolytope::unit_square();
    const double square_integral = scalar_curvature(build_structure(d)).integral_abreu;
    const Calibration sq = calibrate_convention(ks, counts(*d.polytope), 2, square_integral);
    const double square_error = std::abs(cal.kappa * square_integral - to_double(sq.a1));
    const auto labels = convention_labels(1.0, cal.kappa);
    sink.write_json("calibration.json", {{"a0", to_string(cal.a0)},
                                         {"a1", to_string(cal.a1)},
                                         {"integral_abreu", cal.integral_abreu},
                                         {"kappa", cal.kappa},
                                         {"label", labels.matching},
                                         {"square_a1", to_string(sq.a1)},
                                         {"square_kappa_integral", cal.kappa * square_integral},
                                         {"square_error", square_error}});
    sink.set("kappa", cal.kappa);
    sink.set("curvature_label", labels.matching);
    log << "calibrate: kappa = " << cal.kappa << " (" << labels.matching << "), square a1 error " << square_error << "\n";
    return square_error < 1e-10 ? 0 : 1;
}

int bergman_fit_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    require_toric(c, "cli.bergman-fit");
    if (!sink.manifest().contains("kappa")) {
        log << "bergman-fit: no calibration in the manifest, running calibrate first\n";
        ExperimentConfig cal = c;
        cal.ks.clear();
        if (const int status = calibrate_command(cal, sink, log); status != 0) return status;
        sink.commit("calibrate");
    }
    const double kappa = sink.manifest().at("kappa").get<double>();
    const auto s = make_structure(c);
    const auto fields = parallel_map<BergmanField>(c.ks.size(), c.threads,
                                                   [&](std::size_t i) { return bergman_function(space_at(c, s, c.ks[i])); });
    const auto curvature = scalar_curvature(s, kappa);
    const AsymptoticFit fit = fit_bergman_expansion(fields, curvature);
    std::vector<Row> levels;
    for (std::size_t i = 0; i < fields.size(); ++i)
        levels.push_back({num(static_cast<long>(fields[i].level)), num(fit.remainder[i]), num(fields[i].completeness_residual)});
    sink.write_csv("bergman_levels.csv", {"k", "remainder_sup", "completeness_residual"}, levels);
    std::vector<Row> nodes;
    const auto& Q = s.quadrature();
    for (Eigen::Index i = 0; i < Q.size(); ++i) {
        Row r;
        for (int a = 0; a < Q.dimension(); ++a) r.push_back(num(Q.points(i, a)));
        r.push_back(num(fit.c0(i)));
        r.push_back(num(fit.c1(i)));
        r.push_back(num(fit.curvature(i)));
        nodes.push_back(r);
    }
    std::vector<std::string> columns;
    for (int a = 0; a < Q.dimension(); ++a) columns.push_back("x" + std::to_string(a));
    const std::string label = sink.manifest().value("curvature_label", std::string("kappa_S"));
    columns.insert(columns.end(), {"c0", "c1", "kappa_S_abreu"});
    sink.write_csv("bergman_coefficients.csv", columns, nodes);
    nlohmann::json j = {{"manifold", s.describe()},
                        {"kappa", kappa},
                        {"curvature_label", label},
                        {"c0_sup_error", fit.c0_sup_error},
                        {"c1_correlation", std::isnan(fit.c1_correlation) ? nlohmann::json(nullptr) : nlohmann::json(fit.c1_correlation)},
                        {"c1_sup_deviation", fit.c1_sup_deviation},
                        {"integral_c0", fit.integral_c0},
                        {"integral_c1", fit.integral_c1},
                        {"remainder_exponent", fit.remainder_decay.exponent},
                        {"remainder_at_floor", fit.remainder_decay.at_floor},
                        {"holdout_error", fit.holdout_error},
                        {"monotone_improvement", fit.monotone_improvement}};
    sink.write_json("bergman_fit.json", j);
    log << "bergman-fit: sup|c0 - 1| = " << fit.c0_sup_error << ", correlation = " << fit.c1_correlation
        << ", remainder exponent = " << fit.remainder_decay.exponent << "\n";
    return 0;
}

int embed_check_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    const auto s = make_structure(c);
    const int n = s.dimension();
    const double deviation = c.spectral() ? 0.0 : curvature_deviation(s);
    struct Result {
        int k = 0;
        double residual = 0.0, moment = 0.0, bound = 0.0, volume = 0.0, hamiltonian = 0.0;
    };
    const auto results = parallel_map<Result>(c.ks.size(), c.threads, [&](std::size_t i) {
        const int k = c.ks[i];
        const Embedding e = kodaira_embed(space_at(c, s, k), s);
        Result r;
        r.k = k;
        r.residual = fs_pullback_residual(e, s).sup;
        r.moment = moment_matrix(e).norm;
        r.bound = moment_norm_bound(k, n, deviation) * (1.0 + 10.0 / k);
        r.volume = e.fs_volume_integral();
        if (!c.spectral()) r.hamiltonian = hamiltonian_residual(e, weight_matrix(s, default_directions(n).front(), k));
        return r;
    });
    std::vector<Row> rows;
    std::vector<double> ks, residuals;
    bool bound_ok = true;
    for (const auto& r : results) {
        rows.push_back({num(static_cast<long>(r.k)), num(r.residual), num(r.moment), num(r.bound), num(r.volume),
                        num(r.hamiltonian)});
        ks.push_back(r.k);
        residuals.push_back(r.residual);
        if (!c.spectral() && r.k >= 10) bound_ok = bound_ok && r.moment <= r.bound;
    }
    sink.write_csv("embed_check.csv", {"k", "fs_residual_sup", "moment_norm", "moment_bound", "fs_volume", "hamiltonian_residual"},
                   rows);
    nlohmann::json j = {{"manifold", s.describe()}, {"curvature_deviation", deviation}, {"moment_bound_holds", bound_ok}};
    if (ks.size() >= 2) {
        const DecayFit fit = fit_decay(ks, residuals);
        j["fs_decay_exponent"] = std::isnan(fit.exponent) ? nlohmann::json(nullptr) : nlohmann::json(fit.exponent);
        j["fs_at_floor"] = fit.at_floor;
    }
    sink.write_json("embed_check.json", j);
    log << "embed-check: " << results.size() << " levels, moment bound " << (bound_ok ? "holds" : "VIOLATED") << "\n";
    return bound_ok ? 0 : 1;
}

int futaki_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    require_toric(c, "cli.futaki");
    const auto s = make_structure(c);
    const auto ds = directions_for(c, s.dimension());
    const auto levels = invariant_levels(c);
    const auto reports = parallel_map<InvariantReport>(ds.size(), c.threads,
                                                       [&](std::size_t i) { return invariant_report(s, ds[i], levels); });
    nlohmann::json j = {{"polytope", s.polytope().name()}, {"reports", nlohmann::json::array()}};
    std::vector<Row> rows;
    int nonzero = 0;
    for (const auto& r : reports) {
        j["reports"].push_back(to_json(r));
        rows.push_back({direction_label(r.direction.cast<double>()), to_string(r.futaki), num(to_double(r.futaki)),
                        num(r.chi_norm), num(r.lower_bound), num(r.oracle_futaki), num(r.deviation_boundary)});
        if (r.futaki != 0) ++nonzero;
    }
    sink.write_json("futaki.json", j);
    sink.write_csv("futaki.csv", {"direction", "futaki", "futaki_value", "chi_norm", "lower_bound", "oracle", "oracle_deviation"},
                   rows);
    log << "futaki: " << reports.size() << " directions, " << nonzero << " nonzero\n";
    return 0;
}

int lower_bound_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    require_toric(c, "cli.lower-bound");
    const auto s = make_structure(c);
    const auto& P = s.polytope();
    const auto levels = invariant_levels(c);
    // the configured directions, or the one with the largest bound
    std::vector<InvariantReport> reports;
    for (const auto& d : directions_for(c, P.dimension())) reports.push_back(invariant_report(s, d, levels));
    if (c.directions.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < reports.size(); ++i)
            if (reports[i].lower_bound > reports[best].lower_bound) best = i;
        reports = {reports[best]};
    }
    std::mt19937_64 rng(c.seed);
    std::vector<AlmostKahlerStructure> samples;
    for (int i = 0; i < c.samples; ++i) samples.push_back(random_admissible_structure(P, rng, c.quadrature_order));
    const auto deviations = parallel_map<double>(samples.size(), c.threads,
                                                 [&](std::size_t i) { return curvature_deviation(samples[i]); });
    const double tol = c.effective_tolerances().inequality;
    std::vector<Row> rows;
    bool all = true;
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (const auto& r : reports) {
            const bool ok = deviations[i] >= r.lower_bound - tol;
            all = all && ok;
            rows.push_back({num(static_cast<long>(i)), num(samples[i].potential().epsilon()),
                            direction_label(r.direction.cast<double>()), num(deviations[i]), num(r.lower_bound),
                            ok ? "1" : "0"});
        }
    sink.write_csv("lower_bound.csv", {"sample", "epsilon", "direction", "curvature_deviation", "futaki_bound", "satisfied"},
                   rows);
    sink.write_json("lower_bound.json", {{"polytope", P.name()},
                                         {"seed", c.seed},
                                         {"samples", c.samples},
                                         {"tolerance", tol},
                                         {"lines", rows.size()},
                                         {"all_satisfied", all}});
    log << "lower-bound: " << rows.size() << " inequalities, " << (all ? "all satisfied" : "VIOLATION") << "\n";
    return all ? 0 : 1;
}

int flow_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    require_toric(c, "cli.flow");
    const auto s = make_structure(c);
    const auto ds = directions_for(c, s.dimension());
    const Tolerances tol = c.effective_tolerances();
    FlowOptions options;
    options.newton_tolerance = tol.newton;
    options.threads = c.threads;
    nlohmann::json j = {{"manifold", s.describe()}, {"t_min", c.t_min}, {"runs", nlohmann::json::array()}};
    std::vector<std::vector<ChainLink>> links(ds.size());
    int status = 0;
    for (int k : c.ks) {
        const Embedding e = kodaira_embed(space_at(c, s, k), s);
        for (std::size_t di = 0; di < ds.size(); ++di) {
            const auto W = weight_matrix(s, ds[di], k);
            const LimitEstimate limit = limit_f(e, s, W, c.t_min, options, tol.monotonicity);
            const MonotonicityReport& report = limit.monotonicity;
            const ChainLink link = chain_link(e, s, W, limit, tol.chain);
            links[di].push_back(link);
            std::vector<Row> rows;
            for (std::size_t i = 0; i < report.ts.size(); ++i)
                rows.push_back({num(report.ts[i]), num(report.f[i]), num(report.derivative[i]), num(report.volume[i]),
                                num(report.mass_concentration[i])});
            const std::string name = "flow_k" + std::to_string(k) + "_d" + direction_label(ds[di]) + ".csv";
            sink.write_csv(name, {"t", "f", "f_prime", "volume", "mass_concentration"}, rows);
            j["runs"].push_back({{"k", k},
                                 {"direction", direction_json(ds[di])},
                                 {"monotone", report.monotone},
                                 {"strictly_increasing", report.strictly_increasing},
                                 {"worst_drop", report.worst_drop},
                                 {"formula_gap", report.formula_gap},
                                 {"f_t_min", limit.f_min_t},
                                 {"extrapolated", limit.extrapolated},
                                 {"closed_form", to_string(limit.exact)},
                                 {"oscillating", limit.oscillating},
                                 {"max_mass_concentration", limit.mass_concentration},
                                 {"chain", to_json(link)}});
        }
    }
    if (c.ks.size() >= 3) {
        j["bounds"] = nlohmann::json::array();
        const double deviation = curvature_deviation(s);
        for (std::size_t di = 0; di < ds.size(); ++di) {
            const auto inv = invariant_report(s, ds[di], {1, 2, 3, 4, 5, 6, 7, 8});
            nlohmann::json b = to_json(assemble_bound(links[di], inv, deviation));
            b["direction"] = direction_json(ds[di]);
            j["bounds"].push_back(b);
        }
    }
    sink.write_json("flow.json", j);
    log << "flow: " << c.ks.size() * ds.size() << " runs, monotone, chain holds\n";
    return status;
}

int qop_command(const ExperimentConfig& c, OutputSink& sink, std::ostream& log) {
    const auto s = make_structure(c);
    const auto errors = parallel_map<double>(c.ks.size(), c.threads, [&](std::size_t i) {
        const QuantumSpace space = space_at(c, s, c.ks[i]);
        const Eigen::VectorXd x = space.nodes.points.col(0);
        const Eigen::VectorXd f = x.array() - space.nodes.integrate(x) / space.nodes.weights.sum();
        return (q_apply(QOperator(space), f) - f).cwiseAbs().maxCoeff();
    });
    std::vector<Row> rows;
    std::vector<double> ks;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        rows.push_back({num(static_cast<long>(c.ks[i])), num(errors[i])});
        ks.push_back(c.ks[i]);
    }
    sink.write_csv("qop.csv", {"k", "sup_Qf_minus_f"}, rows);
    nlohmann::json j = {{"manifold", s.describe()}, {"function", "x0 - mean(x0)"}};
    if (ks.size() >= 2) {
        const DecayFit fit = fit_decay(ks, errors);
        j["decay_exponent"] = fit.exponent;
        j["points_used"] = fit.points_used;
    }
    sink.write_json("qop.json", j);
    log << "qop: decay exponent " << j.value("decay_exponent", std::nan("")) << "\n";
    return 0;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
    ExperimentConfig c = config;
    static const std::map<std::string, std::string> default_levels{
        {"dim-count", "1..50"}, {"calibrate", "1..8"}, {"bergman-fit", "10..40"}, {"embed-check", "5..40:5"},
        {"futaki", "1..8"},     {"lower-bound", "1..8"}, {"flow", "6..10:2"},     {"qop", "10..40:2"}};
    const auto it = default_levels.find(c.command);
    if (it == default_levels.end()) throw ConfigError("cli.config", "field 'command': unknown command '" + c.command + "'");
    if (c.ks.empty()) c.ks = parse_k_range(it->second);
    c.validate();
    OutputSink sink(c.output);
    int status = 0;
    if (c.command == "dim-count") status = dim_count_command(c, sink, log);
    else if (c.command == "calibrate") status = calibrate_command(c, sink, log);
    else if (c.command == "bergman-fit") status = bergman_fit_command(c, sink, log);
    else if (c.command == "embed-check") status = embed_check_command(c, sink, log);
    else if (c.command == "futaki") status = futaki_command(c, sink, log);
    else if (c.command == "lower-bound") status = lower_bound_command(c, sink, log);
    else if (c.command == "flow") status = flow_command(c, sink, log);
    else status = qop_command(c, sink, log);
    sink.commit(c.command);
    return status;
}

}  // namespace gq::cli
