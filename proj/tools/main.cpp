#include "commands.hpp"
#include "config.hpp"

#include "gq/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides {
    std::string config, out, manifold, polytope, k, cache;
    double epsilon = 0.0, tolerance_scale = 1.0, t_min = 1e-3, window = 1.0;
    int threads = 1, samples = 20, grid = 128, order = 64;
    std::uint64_t seed = 7;
    std::vector<std::vector<double>> directions;
};

}  // namespace

int main(int argc, char** argv) {
    using namespace gq::cli;
    CLI::App app{"Quantization experiments on toric and flat-torus models"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "TOML experiment configuration");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--tolerance-scale", o.tolerance_scale, "multiplies every configured tolerance");
    app.fallthrough();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--manifold", o.manifold, "cp1, interval2, square, triangle, hirzebruch or t2");
        sub->add_option("--polytope", o.polytope, "polytope JSON file or preset name");
        sub->add_option("--epsilon", o.epsilon, "perturbation amplitude of the potential");
        sub->add_option("--k", o.k, "levels: a..b, a..b:step or a comma list");
        sub->add_option("--order", o.order, "quadrature order");
        sub->add_option("--cache", o.cache, "directory of cached quantum spaces");
    };
    std::vector<std::pair<std::string, CLI::App*>> subs;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    std::string positional;
    run->add_option("config_file", positional, "TOML configuration");
    for (const auto& [name, help] :
         std::vector<std::pair<std::string, std::string>>{{"dim-count", "dim H_k against lattice counts"},
                                                          {"calibrate", "fix the curvature convention"},
                                                          {"bergman-fit", "two-term Bergman expansion fit"},
                                                          {"embed-check", "Fubini-Study pullback and moment matrix"},
                                                          {"futaki", "Donaldson-Futaki invariants"},
                                                          {"lower-bound", "curvature lower bound on random potentials"},
                                                          {"flow", "degeneration flow and the inequality chain"},
                                                          {"qop", "Q operator decay"}}) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        subs.emplace_back(name, sub);
    }
    for (auto& [name, sub] : subs) {
        if (name == "futaki" || name == "lower-bound" || name == "flow")
            sub->add_option("--direction", o.directions, "integer direction, repeatable")->allow_extra_args();
        if (name == "lower-bound") sub->add_option("--samples", o.samples, "random potentials");
        if (name == "flow") sub->add_option("--t-min", o.t_min, "smallest flow parameter");
        if (name == "dim-count" || name == "embed-check") {
            sub->add_option("--grid", o.grid, "spectral grid nodes per period");
            sub->add_option("--window", o.window, "spectral window C1 (<= 0: automatic)");
        }
    }
    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig c;
        const std::string config_path = !positional.empty() ? positional : o.config;
        if (!config_path.empty()) c = load_config(config_path);
        const std::string command = app.get_subcommands().front()->get_name();
        if (command != "run") c.command = command;
        if (c.command.empty()) throw gq::ConfigError("cli.config", "field 'command': missing");
        auto given = [&](const std::string& flag) {
            for (auto* sub : app.get_subcommands())
                if (auto* opt = sub->get_option_no_throw(flag); opt && opt->count() > 0) return true;
            auto* opt = app.get_option_no_throw(flag);
            return opt && opt->count() > 0;
        };
        if (given("--out")) c.output = o.out;
        if (given("--threads")) c.threads = o.threads;
        if (given("--seed")) c.seed = o.seed;
        if (given("--tolerance-scale")) c.tolerance_scale = o.tolerance_scale;
        if (given("--manifold")) {
            c.manifold = o.manifold;
            c.polytope_file.clear();
        }
        if (given("--polytope")) c.polytope_file = o.polytope;
        if (given("--epsilon")) c.epsilon = o.epsilon;
        if (given("--order")) c.quadrature_order = o.order;
        if (given("--cache")) c.cache = o.cache;
        if (given("--k")) {
            c.ks = parse_k_range(o.k);
            if (c.ks.empty()) throw gq::ConfigError("cli.config", "field 'levels.k': k-range is empty");
        }
        if (given("--direction")) {
            c.directions.clear();
            for (const auto& d : o.directions) c.directions.push_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
        }
        if (given("--samples")) c.samples = o.samples;
        if (given("--t-min")) c.t_min = o.t_min;
        if (given("--grid")) c.spectral_grid = o.grid;
        if (given("--window")) c.spectral_window = o.window;
        return run_experiment(c, std::cout);
    } catch (const gq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
