#include "config.hpp"

#include "gq/error.hpp"
#include "gq/rational.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace gq::cli {

namespace {

const char* kWhere = "cli.config";

[[noreturn]] void fail(const std::string& source, const toml::source_region& region, const std::string& field,
                       const std::string& message) {
    std::ostringstream os;
    os << source;
    if (region.begin.line > 0) os << ":" << region.begin.line;
    os << ": field '" << field << "': " << message;
    throw ConfigError(kWhere, os.str());
}

template <typename T>
T required_value(const toml::node& node, const std::string& source, const std::string& field, const char* kind) {
    if (auto v = node.value<T>()) return *v;
    fail(source, node.source(), field, std::string("expected ") + kind);
}

double number(const toml::node& node, const std::string& source, const std::string& field) {
    return required_value<double>(node, source, field, "a number");
}

long integer(const toml::node& node, const std::string& source, const std::string& field) {
    return required_value<int64_t>(node, source, field, "an integer");
}

std::string string(const toml::node& node, const std::string& source, const std::string& field) {
    return required_value<std::string>(node, source, field, "a string");
}

Eigen::VectorXd direction(const toml::node& node, const std::string& source, const std::string& field) {
    const auto* arr = node.as_array();
    if (!arr || arr->empty()) fail(source, node.source(), field, "expected a nonempty array of integers");
    Eigen::VectorXd d(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) d(static_cast<Eigen::Index>(i)) = number((*arr)[i], source, field);
    return d;
}

}  // namespace

Tolerances Tolerances::scaled(double f) const {
    Tolerances t = *this;
    t.newton *= f;
    t.monotonicity *= f;
    t.chain *= f;
    t.inequality *= f;
    t.refinement *= f;
    return t;
}

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& field, const std::string& msg) {
        throw ConfigError(kWhere, "field '" + field + "': " + msg);
    };
    if (ks.empty()) bad("levels.k", "k-range is empty");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] < 1) bad("levels.k", "levels must be positive");
        if (i > 0 && ks[i] <= ks[i - 1]) bad("levels.k", "levels must be strictly increasing");
    }
    const Tolerances t = effective_tolerances();
    for (auto [name, v] : {std::pair{"newton", t.newton}, {"monotonicity", t.monotonicity}, {"chain", t.chain},
                           {"inequality", t.inequality}, {"refinement", t.refinement}})
        if (!(v > 0.0)) bad(std::string("tolerances.") + name, "tolerances must be positive");
    if (!(tolerance_scale > 0.0)) bad("tolerance_scale", "must be positive");
    if (!(t_min > 0.0 && t_min < 1.0)) bad("flow.t_min", "must lie in (0, 1)");
    if (samples < 1) bad("sampling.samples", "must be positive");
    if (threads < 1) bad("threads", "must be positive");
    if (quadrature_order < 4) bad("manifold.quadrature_order", "must be at least 4");
    if (spectral_grid < 8) bad("spectral.grid", "must be at least 8");
}

std::vector<int> parse_k_range(const std::string& text) {
    std::vector<int> ks;
    try {
        const auto dots = text.find("..");
        if (dots != std::string::npos) {
            const int a = std::stoi(text.substr(0, dots));
            std::string rest = text.substr(dots + 2);
            int step = 1;
            if (const auto colon = rest.find(':'); colon != std::string::npos) {
                step = std::stoi(rest.substr(colon + 1));
                rest = rest.substr(0, colon);
            }
            const int b = std::stoi(rest);
            if (step < 1) throw ConfigError(kWhere, "field 'levels.k': step must be positive");
            for (int k = a; k <= b; k += step) ks.push_back(k);
        } else if (!text.empty()) {
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) ks.push_back(std::stoi(item));
        }
    } catch (const std::logic_error&) {
        throw ConfigError(kWhere, "field 'levels.k': cannot parse '" + text + "'");
    }
    return ks;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw ConfigError(kWhere, os.str());
    }
    ExperimentConfig c;
    static const std::vector<std::string> known_top{"command", "output", "seed", "threads", "cache", "tolerance_scale",
                                                    "manifold", "levels", "action", "sampling", "flow", "tolerances",
                                                    "spectral"};
    for (const auto& [key, node] : root)
        if (std::find(known_top.begin(), known_top.end(), std::string(key.str())) == known_top.end())
            fail(source, node.source(), std::string(key.str()), "unknown key");

    if (auto* n = root.get("command")) c.command = string(*n, source, "command");
    if (auto* n = root.get("output")) c.output = string(*n, source, "output");
    if (auto* n = root.get("cache")) c.cache = string(*n, source, "cache");
    if (auto* n = root.get("seed")) c.seed = static_cast<std::uint64_t>(integer(*n, source, "seed"));
    if (auto* n = root.get("threads")) c.threads = static_cast<int>(integer(*n, source, "threads"));
    if (auto* n = root.get("tolerance_scale")) c.tolerance_scale = number(*n, source, "tolerance_scale");

    if (auto* m = root["manifold"].as_table()) {
        if (auto* n = m->get("name")) c.manifold = string(*n, source, "manifold.name");
        if (auto* n = m->get("polytope")) {
            c.polytope_file = string(*n, source, "manifold.polytope");
            c.manifold.clear();
        }
        if (auto* n = m->get("epsilon")) c.epsilon = number(*n, source, "manifold.epsilon");
        if (auto* n = m->get("quadrature_order"))
            c.quadrature_order = static_cast<int>(integer(*n, source, "manifold.quadrature_order"));
    }
    if (auto* l = root["levels"].as_table()) {
        if (auto* n = l->get("k")) {
            if (auto* arr = n->as_array()) {
                for (const auto& v : *arr) c.ks.push_back(static_cast<int>(integer(v, source, "levels.k")));
            } else {
                try {
                    c.ks = parse_k_range(string(*n, source, "levels.k"));
                } catch (const ConfigError& e) {
                    fail(source, n->source(), "levels.k", e.what());
                }
            }
            if (c.ks.empty()) fail(source, n->source(), "levels.k", "k-range is empty");
        }
    }
    if (auto* a = root["action"].as_table()) {
        if (auto* n = a->get("directions")) {
            const auto* arr = n->as_array();
            if (!arr) fail(source, n->source(), "action.directions", "expected an array of arrays");
            for (const auto& d : *arr) c.directions.push_back(direction(d, source, "action.directions"));
        }
    }
    if (auto* s = root["sampling"].as_table())
        if (auto* n = s->get("samples")) c.samples = static_cast<int>(integer(*n, source, "sampling.samples"));
    if (auto* f = root["flow"].as_table())
        if (auto* n = f->get("t_min")) c.t_min = number(*n, source, "flow.t_min");
    if (auto* sp = root["spectral"].as_table()) {
        if (auto* n = sp->get("grid")) c.spectral_grid = static_cast<int>(integer(*n, source, "spectral.grid"));
        if (auto* n = sp->get("window")) c.spectral_window = number(*n, source, "spectral.window");
    }
    if (auto* t = root["tolerances"].as_table()) {
        for (const auto& [key, node] : *t) {
            const std::string k(key.str());
            const double v = number(node, source, "tolerances." + k);
            if (k == "newton") c.tolerances.newton = v;
            else if (k == "monotonicity") c.tolerances.monotonicity = v;
            else if (k == "chain") c.tolerances.chain = v;
            else if (k == "inequality") c.tolerances.inequality = v;
            else if (k == "refinement") c.tolerances.refinement = v;
            else fail(source, node.source(), "tolerances." + k, "unknown tolerance");
            if (!(v > 0.0)) fail(source, node.source(), "tolerances." + k, "tolerances must be positive");
        }
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(kWhere, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

DelzantPolytope load_polytope(const std::string& name_or_path) {
    std::ifstream in(name_or_path);
    if (!in) return DelzantPolytope::preset(name_or_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(kWhere, name_or_path + ": " + e.what());
    }
    if (j.contains("preset")) return DelzantPolytope::preset(j.at("preset").get<std::string>());
    if (!j.contains("facets") || !j.at("facets").is_array())
        throw ConfigError(kWhere, name_or_path + ": field 'facets': expected an array");
    std::vector<Facet> facets;
    for (const auto& f : j.at("facets")) {
        Facet facet;
        const auto& normal = f.at("normal");
        facet.normal.resize(static_cast<Eigen::Index>(normal.size()));
        for (std::size_t i = 0; i < normal.size(); ++i) facet.normal(static_cast<Eigen::Index>(i)) = normal[i].get<int>();
        const auto& off = f.at("offset");
        facet.offset = off.is_string() ? parse_rational(off.get<std::string>()) : Rational(off.get<long>());
        facets.push_back(facet);
    }
    return DelzantPolytope(std::move(facets), j.value("name", std::string("custom")));
}

AlmostKahlerStructure make_structure(const ExperimentConfig& c) {
    ManifoldDescriptor d;
    d.quadrature_order = c.quadrature_order;
    if (c.spectral()) {
        d.kind = ManifoldKind::FlatTorus;
        return build_structure(d);
    }
    d.polytope = load_polytope(c.polytope_file.empty() ? c.manifold : c.polytope_file);
    if (c.epsilon != 0.0) {
        d.epsilon = c.epsilon;
        d.perturbation_shape = Polynomial::constant(d.polytope->dimension(), 1.0);
    }
    return build_structure(d);
}

}  // namespace gq::cli
